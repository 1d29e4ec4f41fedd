// qdyn: exact-arithmetic lab for machines, orbits, learning iterations and
// self-similar accept sets. See README.md for the config format.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "qdyn/dynamics.hpp"
#include "qdyn/emit.hpp"
#include "qdyn/experiment.hpp"
#include "qdyn/fractal.hpp"
#include "qdyn/learning.hpp"
#include "qdyn/tm.hpp"

namespace {

using namespace qdyn;

std::vector<std::size_t> parse_scales(const std::string& spec) {
  // "1:10" or "1,2,5"
  std::vector<std::size_t> out;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    std::size_t lo = std::stoul(spec.substr(0, colon));
    std::size_t hi = std::stoul(spec.substr(colon + 1));
    for (std::size_t s = lo; s <= hi; ++s) out.push_back(s);
  } else {
    std::size_t pos = 0;
    while (pos < spec.size()) {
      auto comma = spec.find(',', pos);
      if (comma == std::string::npos) comma = spec.size();
      out.push_back(std::stoul(spec.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  if (out.empty()) throw UsageError("empty scale list '" + spec + "'");
  return out;
}

void print_verdict(const dynamics::OrbitVerdict& v) {
  std::printf("sample length:     %zu\n", v.sample_length);
  std::printf("bounds:            [%s, %s], within [%s, %s]: %s\n", v.sample_min.str().c_str(),
              v.sample_max.str().c_str(), v.interval_lo.str().c_str(), v.interval_hi.str().c_str(),
              v.within_interval ? "yes" : "no");
  if (v.period)
    std::printf("period:            preperiod %zu, period %zu\n", v.period->preperiod,
                v.period->period);
  else
    std::printf("period:            none detected (all points distinct)\n");
  for (const auto& c : v.cauchy) {
    if (c.index)
      std::printf("cauchy eps=%-8s N = %zu\n", c.epsilon.str().c_str(), *c.index);
    else
      std::printf("cauchy eps=%-8s no N within sample\n", c.epsilon.str().c_str());
  }
  std::printf("chaotic per criterion (bounded and non-repeating): %s\n",
              v.chaotic_per_criterion ? "yes" : "no");
}

int do_run(const std::string& config_path, const std::string& out_dir, unsigned parallelism) {
  cli::ExecutionOptions opts;
  opts.parallelism = parallelism;
  opts.output_dir = out_dir;
  auto rep = cli::run_experiment_file(config_path, opts);
  std::cout << rep.full().dump(2) << "\n";
  return 0;
}

int do_tm(const std::string& machine_path, const std::string& input, std::uint64_t budget,
          bool trace_mode, bool detect_cycles) {
  auto text = cli::detail::read_text_file(machine_path);
  auto m = tm::parse_machine(text);
  if (trace_mode) {
    auto trace = tm::tape_trace(m, input, budget);
    auto values = tm::rationalized_trace(m, input, budget, tm::tape_godel_map(m));
    std::size_t window = 1;
    for (const auto& c : trace) window = std::max(window, c.tape.size());
    std::printf("step  state            head  window%*s  rho\n",
                static_cast<int>(window > 6 ? window - 6 : 0), "");
    for (std::size_t i = 0; i < trace.size(); ++i) {
      std::printf("%-5zu %-16s %-5zu %s  %s\n", i, m.state_name(trace[i].state).c_str(),
                  trace[i].head, tm::tape_window(trace[i], window, m.blank()).c_str(),
                  values[i].str().c_str());
    }
    dynamics::Orbit o{"rho-trace", values};
    print_verdict(dynamics::chaos_verdict(o, Rational(0), Rational(1)));
  } else {
    tm::RunOptions ropts;
    ropts.detect_cycles = detect_cycles;
    auto res = tm::run(m, input, budget, ropts);
    std::string tape = res.final_config.tape;
    while (tape.size() > 1 && tape.back() == m.blank()) tape.pop_back();
    std::printf("outcome: %s\nsteps:   %llu\nstate:   %s\ntape:    %s\nhead:    %zu\n",
                std::string(tm::outcome_name(res.outcome)).c_str(),
                static_cast<unsigned long long>(res.steps),
                m.state_name(res.final_config.state).c_str(), tape.c_str(),
                res.final_config.head);
  }
  return 0;
}

int do_orbit(const std::string& map_spec, const std::string& x0_text, std::size_t n,
             const std::string& lo_text, const std::string& hi_text,
             const std::string& delta_text) {
  auto f = dynamics::named_map(map_spec);
  Rational x0 = Rational::parse(x0_text);
  auto o = dynamics::orbit(f, x0, n);
  if (delta_text.empty()) {
    for (std::size_t i = 0; i < o.points.size(); ++i)
      std::printf("%-4zu %s\n", i, o.points[i].str().c_str());
  } else {
    auto divergence = dynamics::sensitivity_probe(f, x0, Rational::parse(delta_text), n);
    std::printf("k     x_k    |x_k - x'_k|  (x'_0 = x_0 + %s)\n", delta_text.c_str());
    for (std::size_t i = 0; i < o.points.size(); ++i)
      std::printf("%-4zu %s    %s\n", i, o.points[i].str().c_str(), divergence[i].str().c_str());
  }
  print_verdict(dynamics::chaos_verdict(o, Rational::parse(lo_text), Rational::parse(hi_text)));
  return 0;
}

fractal::FunctionSystem system_from_flag(const std::string& maps_flag) {
  if (maps_flag.empty()) return fractal::cantor_system();
  // "1/3,0;1/3,2/3"
  std::vector<fractal::AffineMap> maps;
  std::size_t pos = 0;
  while (pos < maps_flag.size()) {
    auto semi = maps_flag.find(';', pos);
    if (semi == std::string::npos) semi = maps_flag.size();
    std::string pair = maps_flag.substr(pos, semi - pos);
    auto comma = pair.find(',');
    if (comma == std::string::npos)
      throw UsageError("map spec '" + pair + "' must be scale,offset");
    maps.push_back({Rational::parse(pair.substr(0, comma)), Rational::parse(pair.substr(comma + 1))});
    pos = semi + 1;
  }
  return fractal::FunctionSystem("custom", std::move(maps));
}

int do_fractal_cover(std::size_t depth, const std::string& maps_flag) {
  auto cover = fractal::ifs_cover(system_from_flag(maps_flag), depth);
  std::vector<std::vector<std::string>> rows;
  for (const auto& iv : cover.intervals)
    rows.push_back({std::to_string(depth), iv.lo.num().str(), iv.lo.den().str(),
                    iv.hi.num().str(), iv.hi.den().str()});
  std::cout << cli::emit_table({"depth", "lo_num", "lo_den", "hi_num", "hi_den"}, rows);
  std::fprintf(stderr, "intervals: %zu, total length: %s\n", cover.intervals.size(),
               cover.total_length().str().c_str());
  return 0;
}

int do_fractal_dim(std::size_t depth, const std::string& scales_flag, unsigned base,
                   const std::string& maps_flag) {
  auto cover = fractal::ifs_cover(system_from_flag(maps_flag), depth);
  auto est = fractal::box_count_dimension(cover, parse_scales(scales_flag), base);
  for (const auto& [s, nboxes] : est.counts)
    std::printf("scale %-3zu boxes %s\n", s, nboxes.str().c_str());
  std::printf("box-counting dimension estimate: %.5f (base %u, cover depth %zu)\n", est.slope,
              est.base, depth);
  return 0;
}

int do_learn(const std::string& functional, const std::string& seed_str,
             const std::string& seed_alphabet, const std::string& target_str,
             const std::string& training_flag, const std::string& machine_path, std::size_t n,
             std::size_t grid_depth, const std::string& window_flag, unsigned parallelism) {
  learning::FunctionalParams params;
  if (!training_flag.empty()) {
    // "1/16:1;9/16:0;..."
    std::size_t pos = 0;
    while (pos < training_flag.size()) {
      auto semi = training_flag.find(';', pos);
      if (semi == std::string::npos) semi = training_flag.size();
      std::string item = training_flag.substr(pos, semi - pos);
      auto colon = item.rfind(':');
      if (colon == std::string::npos)
        throw UsageError("training item '" + item + "' must be x:label");
      params.training.push_back(
          {Rational::parse(item.substr(0, colon)), item.substr(colon + 1) == "1"});
      pos = semi + 1;
    }
  }
  if (!machine_path.empty()) params.machine_text = cli::detail::read_text_file(machine_path);
  if (functional == "constant") {
    const std::string& target = !target_str.empty() ? target_str : seed_str;
    if (target.empty()) throw UsageError("constant functional needs --target (or --seed)");
    params.target =
        encoding::rationalize(target, encoding::GodelMap(encoding::Alphabet(seed_alphabet)));
  }
  auto L = learning::builtin_functional(functional, params);

  encoding::Encoding seed;
  if (!seed_str.empty()) {
    seed = encoding::rationalize(seed_str,
                                 encoding::GodelMap(encoding::Alphabet(seed_alphabet)));
  } else if (functional == "stump_learner") {
    seed = learning::encode_training_set(params.training);
  } else {
    throw UsageError("--seed is required for this functional");
  }

  std::size_t wstart = 0, wend = n + 1;
  if (!window_flag.empty()) {
    auto colon = window_flag.find(':');
    if (colon == std::string::npos) throw UsageError("--window must be start:end");
    wstart = std::stoul(window_flag.substr(0, colon));
    wend = std::stoul(window_flag.substr(colon + 1));
  }

  auto grid = learning::ProbeGrid::dyadic_grid(grid_depth);
  auto trace = learning::evaluate_trace(L, seed, n, grid, parallelism);
  auto rep = learning::limit_sets(trace, wstart, wend);

  std::printf("functional:        %s\n", L.name.c_str());
  std::printf("iterations:        %zu over %zu grid points (depth %zu)\n", n,
              grid.points.size(), grid_depth);
  std::printf("window:            [%zu, %zu)\n", rep.window_start, rep.window_end);
  std::printf("converged:         %s\n", rep.converged ? "yes" : "no");
  if (rep.first_stable_index)
    std::printf("first stable at:   %zu\n", *rep.first_stable_index);
  else
    std::printf("first stable at:   never within window\n");
  std::printf("|limsup| = %zu, |liminf| = %zu\n", learning::popcount(rep.limsup),
              learning::popcount(rep.liminf));
  std::printf("churn:            ");
  for (auto c : rep.churn) std::printf(" %zu", c);
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdyn: exact rational dynamics of computation"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned parallelism = 1;
  auto* run = app.add_subcommand("run", "run an experiment config (JSON)");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory for report files")->envname("QDYN_OUT");
  run->add_option("--parallel", parallelism, "worker threads for grid evaluation");

  std::string machine_path, tm_input;
  std::uint64_t budget = tm::kDefaultBudget;
  bool detect_cycles = false;
  auto* tm_cmd = app.add_subcommand("tm", "parse and execute a machine");
  tm_cmd->require_subcommand(1);
  auto* tm_run = tm_cmd->add_subcommand("run", "run to halt or budget");
  auto* tm_trace = tm_cmd->add_subcommand("trace", "print every configuration and rho value");
  for (auto* sub : {tm_run, tm_trace}) {
    sub->add_option("machine", machine_path, "machine description file")->required();
    sub->add_option("input", tm_input, "input string over the machine's input alphabet")
        ->required();
    sub->add_option("--budget", budget, "step budget");
  }
  tm_run->add_flag("--detect-cycles", detect_cycles,
                   "report provably-non-halting configurations");

  std::string map_spec, x0_text = "0", lo_text = "0", hi_text = "1", delta_text;
  std::size_t orbit_n = 16;
  auto* orbit_cmd = app.add_subcommand("orbit", "iterate a named rational map");
  orbit_cmd->add_option("map", map_spec,
                        "identity | one-minus | newton-sqrt2 | double-mod1 | affine:a:c")
      ->required();
  orbit_cmd->add_option("x0", x0_text, "start point, e.g. 1/3")->required();
  orbit_cmd->add_option("n", orbit_n, "number of iterations")->required();
  orbit_cmd->add_option("--lo", lo_text, "verdict interval lower end");
  orbit_cmd->add_option("--hi", hi_text, "verdict interval upper end");
  orbit_cmd->add_option("--delta", delta_text,
                        "also print the divergence series against x0 + delta");

  std::size_t depth = 12;
  std::string scales_flag = "1:10", maps_flag;
  unsigned box_base = 3;
  auto* fractal_cmd = app.add_subcommand("fractal", "interval covers and box dimension");
  fractal_cmd->require_subcommand(1);
  auto* cover_cmd = fractal_cmd->add_subcommand("cover", "emit the depth-k cover as CSV");
  auto* dim_cmd = fractal_cmd->add_subcommand("dim", "estimate the box-counting dimension");
  for (auto* sub : {cover_cmd, dim_cmd}) {
    sub->add_option("--depth", depth, "cover depth");
    sub->add_option("--maps", maps_flag, "scale,offset;scale,offset (default: cantor)");
  }
  dim_cmd->add_option("--scales", scales_flag, "scales as lo:hi or comma list");
  dim_cmd->add_option("--base", box_base, "box grid base");

  std::string functional_name, seed_str, seed_alphabet = "01", target_str, training_flag,
              learn_machine, window_flag;
  std::size_t learn_n = 64, grid_depth = 10;
  auto* learn_cmd = app.add_subcommand("learn", "learning iteration diagnostics");
  learn_cmd->require_subcommand(1);
  auto* iterate_cmd = learn_cmd->add_subcommand("iterate", "iterate a built-in functional");
  iterate_cmd->add_option("--functional", functional_name,
                          "constant | oscillator | stump_learner | tm_functional")
      ->required();
  iterate_cmd->add_option("--seed", seed_str, "seed string over --alphabet");
  iterate_cmd->add_option("--alphabet", seed_alphabet, "seed alphabet symbols");
  iterate_cmd->add_option("--target", target_str, "target string for the constant functional");
  iterate_cmd->add_option("--training", training_flag, "x:label;x:label;... for stump_learner");
  iterate_cmd->add_option("--machine", learn_machine, "machine file for tm_functional");
  iterate_cmd->add_option("--n", learn_n, "iterations");
  iterate_cmd->add_option("--grid-depth", grid_depth, "dyadic probe grid depth");
  iterate_cmd->add_option("--window", window_flag, "convergence window start:end");
  iterate_cmd->add_option("--parallel", parallelism, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(config_path, out_dir, parallelism);
    if (*tm_run) return do_tm(machine_path, tm_input, budget, false, detect_cycles);
    if (*tm_trace) return do_tm(machine_path, tm_input, budget, true, false);
    if (*orbit_cmd)
      return do_orbit(map_spec, x0_text, orbit_n, lo_text, hi_text, delta_text);
    if (*cover_cmd) return do_fractal_cover(depth, maps_flag);
    if (*dim_cmd) return do_fractal_dim(depth, scales_flag, box_base, maps_flag);
    if (*iterate_cmd)
      return do_learn(functional_name, seed_str, seed_alphabet, target_str, training_flag,
                      learn_machine, learn_n, grid_depth, window_flag, parallelism);
  } catch (const qdyn::Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.code().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_INTERNAL: %s\n", e.what());
    return 1;
  }
  return 0;
}
