#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qdyn/dynamics.hpp"
#include "qdyn/emit.hpp"
#include "qdyn/encoding.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/fractal.hpp"
#include "qdyn/learning.hpp"
#include "qdyn/rational.hpp"
#include "qdyn/tm.hpp"

namespace qdyn::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

struct ExecutionOptions {
  unsigned parallelism = 1;
  std::string output_dir;  // overrides the config's output_dir when set
};

/// meta holds everything run-dependent (timestamp, parallelism); body is a
/// pure function of the config, which is what the determinism guarantee is
/// about.
struct Report {
  json meta;
  json body;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content

  std::string body_text() const { return body.dump(2) + "\n"; }

  json full() const {
    json j;
    j["meta"] = meta;
    j["body"] = body;
    return j;
  }
};

namespace detail {

inline const json& require_field(const json& j, const std::string& key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing required field '" + key + "'");
  return *it;
}

inline Rational rational_field(const json& j, const char* where) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  throw ConfigError(std::string(where) + ": expected a rational as \"num/den\" or integer");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string bitmap_string(const learning::Bitmap& b) {
  std::string s(b.size(), '0');
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i]) s[i] = '1';
  return s;
}

inline json verdict_json(const dynamics::OrbitVerdict& v) {
  json j;
  j["sample_length"] = v.sample_length;
  j["interval"] = {v.interval_lo.str(), v.interval_hi.str()};
  j["within_interval"] = v.within_interval;
  j["sample_min"] = v.sample_min.str();
  j["sample_max"] = v.sample_max.str();
  if (v.period) {
    j["period"] = {{"preperiod", v.period->preperiod}, {"period", v.period->period}};
  } else {
    j["period"] = nullptr;
  }
  json ev = json::array();
  for (const auto& c : v.cauchy) {
    json e;
    e["epsilon"] = c.epsilon.str();
    if (c.index) e["N"] = *c.index;
    else e["N"] = nullptr;
    ev.push_back(e);
  }
  j["cauchy"] = ev;
  j["chaotic_per_criterion"] = v.chaotic_per_criterion;
  return j;
}

inline std::string iso_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- kind: tm_trace ------------------------------------------------------

inline std::string machine_text_from_config(const json& cfg, const char* where) {
  bool has_path = cfg.contains("machine"), has_text = cfg.contains("machine_text");
  if (has_path == has_text)
    throw ConfigError(std::string(where) + ": provide exactly one of 'machine' or 'machine_text'");
  if (has_text) return cfg.at("machine_text").get<std::string>();
  return read_text_file(cfg.at("machine").get<std::string>());
}

inline void run_tm_trace(const json& cfg, const ExecutionOptions&, Report& rep) {
  std::string text = machine_text_from_config(cfg, "tm_trace");
  auto m = tm::parse_machine(text);
  std::string input = require_field(cfg, "input", "tm_trace").get<std::string>();
  std::uint64_t budget = cfg.value("budget", tm::kDefaultBudget);
  tm::RunOptions ropts;
  ropts.detect_cycles = cfg.value("detect_cycles", false);

  auto result = tm::run(m, input, budget, ropts);
  auto trace = tm::tape_trace(m, input, budget);
  auto g = tm::tape_godel_map(m);
  auto values = tm::rationalized_trace(m, input, budget, g);

  dynamics::Orbit orbit;
  orbit.map_name = "rho-trace";
  orbit.points = values;
  auto verdict = dynamics::chaos_verdict(orbit, Rational(0), Rational(1));

  std::size_t window = 1;
  for (const auto& c : trace) window = std::max(window, c.tape.size());

  json body;
  body["machine"] = {{"states", m.states().size()}, {"rules", m.rule_count()}};
  body["run"] = {{"outcome", std::string(tm::outcome_name(result.outcome))},
                 {"steps", result.steps}};
  json vals = json::array();
  for (const auto& v : values) vals.push_back(v.str());
  body["trace"] = {{"length", values.size()}, {"window", window}, {"values", vals}};
  body["verdict"] = verdict_json(verdict);
  rep.body["results"] = body;

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    rows.push_back({std::to_string(i), m.state_name(trace[i].state),
                    std::to_string(trace[i].head), tm::tape_window(trace[i], window, m.blank()),
                    values[i].num().str(), values[i].den().str()});
  }
  rep.files.emplace_back("trace.csv",
                         emit_table({"step", "state", "head", "window", "num", "den"}, rows));
  rep.files.emplace_back("trace.svg", emit_plot({{"rho(T_n)", values}}, "rationalized tape trace"));
}

// --- kind: learning_run ---------------------------------------------------

inline encoding::Encoding encoding_from_config(const json& j, const char* where) {
  std::string str = require_field(j, "string", where).get<std::string>();
  std::string alphabet = require_field(j, "alphabet", where).get<std::string>();
  return encoding::rationalize(str, encoding::GodelMap(encoding::Alphabet(alphabet)));
}

inline learning::Functional functional_from_config(const json& cfg) {
  const json& f = require_field(cfg, "functional", "learning_run");
  std::string name = require_field(f, "name", "functional").get<std::string>();
  learning::FunctionalParams params;
  if (f.contains("target")) params.target = encoding_from_config(f.at("target"), "functional.target");
  if (f.contains("training")) {
    for (const auto& pair : f.at("training")) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("functional.training entries must be [x, 0|1] pairs");
      params.training.push_back(
          {rational_field(pair[0], "functional.training"), pair[1].get<int>() != 0});
    }
  }
  if (f.contains("machine") || f.contains("machine_text"))
    params.machine_text = machine_text_from_config(f, "functional");
  params.budget = f.value("budget", params.budget);
  params.probe_digits = f.value("probe_digits", params.probe_digits);
  return learning::builtin_functional(name, params);
}

inline void run_learning(const json& cfg, const ExecutionOptions& opts, Report& rep) {
  auto L = functional_from_config(cfg);

  encoding::Encoding seed;
  if (cfg.contains("seed")) {
    seed = encoding_from_config(cfg.at("seed"), "learning_run.seed");
  } else if (L.name == "stump_learner") {
    // default seed: the rationalized training set
    learning::TrainingSet ts;
    for (const auto& pair : cfg.at("functional").at("training"))
      ts.push_back({rational_field(pair[0], "training"), pair[1].get<int>() != 0});
    seed = learning::encode_training_set(ts);
  } else {
    throw ConfigError("learning_run: missing 'seed'");
  }

  std::size_t iterations = cfg.value("iterations", 64);
  std::size_t grid_depth = cfg.value("grid_depth", 10);
  auto grid = learning::ProbeGrid::dyadic_grid(grid_depth);
  std::size_t wstart = 0, wend = iterations + 1;
  if (cfg.contains("window")) {
    const auto& w = cfg.at("window");
    if (!w.is_array() || w.size() != 2) throw ConfigError("learning_run.window must be [start, end]");
    wstart = w[0].get<std::size_t>();
    wend = w[1].get<std::size_t>();
  }

  auto trace = learning::evaluate_trace(L, seed, iterations, grid, opts.parallelism);
  auto report = learning::limit_sets(trace, wstart, wend);
  auto chain = learning::iterate_learner(L, seed, iterations);
  auto orbit = learning::encoding_orbit(chain, L.name);
  auto verdict = dynamics::chaos_verdict(orbit, Rational(0), Rational(1));

  std::vector<std::size_t> accept_counts;
  for (const auto& bm : trace.memberships) accept_counts.push_back(learning::popcount(bm));

  json body;
  body["functional"] = L.name;
  body["seed"] = {{"value", seed.value.str()}, {"length", seed.length}, {"base", seed.base}};
  body["iterations"] = iterations;
  body["grid"] = {{"depth", grid_depth}, {"points", grid.points.size()}};
  json conv;
  conv["window"] = {report.window_start, report.window_end};
  conv["converged"] = report.converged;
  if (report.first_stable_index) conv["first_stable_index"] = *report.first_stable_index;
  else conv["first_stable_index"] = nullptr;
  conv["limsup"] = bitmap_string(report.limsup);
  conv["liminf"] = bitmap_string(report.liminf);
  conv["limsup_count"] = learning::popcount(report.limsup);
  conv["liminf_count"] = learning::popcount(report.liminf);
  conv["churn"] = report.churn;
  body["convergence"] = conv;
  body["accept_counts"] = accept_counts;
  body["orbit_verdict"] = verdict_json(verdict);
  rep.body["results"] = body;

  std::vector<std::vector<std::string>> churn_rows;
  for (std::size_t i = 0; i < report.churn.size(); ++i)
    churn_rows.push_back({std::to_string(report.window_start + i), std::to_string(report.churn[i])});
  rep.files.emplace_back("churn.csv", emit_table({"iteration", "churn"}, churn_rows));

  std::vector<std::vector<std::string>> set_rows;
  for (std::size_t i = 0; i < accept_counts.size(); ++i)
    set_rows.push_back({std::to_string(i), std::to_string(accept_counts[i])});
  rep.files.emplace_back("sets.csv", emit_table({"iteration", "accepted_points"}, set_rows));

  std::vector<Rational> churn_series;
  for (auto c : report.churn) churn_series.emplace_back(static_cast<long long>(c));
  std::vector<Rational> count_series;
  for (auto c : accept_counts) count_series.emplace_back(static_cast<long long>(c));
  rep.files.emplace_back("churn.svg", emit_plot({{"churn |S_{n+1} delta S_n|", churn_series},
                                                 {"|S_n|", count_series}},
                                                "accept-set evolution"));
}

// --- kind: fractal_probe ----------------------------------------------------

inline fractal::FunctionSystem system_from_config(const json& j) {
  std::string label = j.value("label", std::string("system"));
  std::vector<fractal::AffineMap> maps;
  for (const auto& pair : require_field(j, "maps", "fractal_probe.system")) {
    if (!pair.is_array() || pair.size() != 2)
      throw ConfigError("system.maps entries must be [scale, offset] pairs");
    maps.push_back({rational_field(pair[0], "system.maps"), rational_field(pair[1], "system.maps")});
  }
  return fractal::FunctionSystem(label, std::move(maps));
}

inline fractal::Decision decision_from_string(const std::string& s, const char* where) {
  if (s == "0") return fractal::Decision::Reject0;
  if (s == "1") return fractal::Decision::Accept1;
  if (s == "l") return fractal::Decision::GoLeft;
  if (s == "r") return fractal::Decision::GoRight;
  throw ConfigError(std::string(where) + ": decision must be one of 0/1/l/r, got '" + s + "'");
}

inline fractal::DecisionTree tree_from_config(const json& j) {
  std::vector<fractal::DeciderPair> pool;
  for (const auto& p : require_field(j, "pool", "fractal_probe.tree")) {
    fractal::DeciderPair pair;
    pair.name = p.value("name", "pair" + std::to_string(pool.size()));
    if (!p.contains("transform") || p.at("transform").is_string()) {
      pair.transform = dynamics::identity_map();
    } else {
      const auto& t = p.at("transform");
      pair.transform = dynamics::affine_map(rational_field(require_field(t, "scale", "transform"), "scale"),
                                            rational_field(require_field(t, "offset", "transform"), "offset"));
    }
    struct Rule {
      Rational lo, hi;
      fractal::Decision then;
    };
    std::vector<Rule> rules;
    for (const auto& r : require_field(p, "rules", "tree.pool")) {
      rules.push_back({rational_field(require_field(r, "lo", "rule"), "rule.lo"),
                       rational_field(require_field(r, "hi", "rule"), "rule.hi"),
                       decision_from_string(require_field(r, "then", "rule").get<std::string>(), "rule")});
    }
    fractal::Decision fallback =
        decision_from_string(p.value("else", std::string("0")), "tree.pool.else");
    pair.decide = [rules, fallback](const Rational& y) {
      for (const auto& r : rules)
        if (y >= r.lo && y <= r.hi) return r.then;
      return fallback;
    };
    pool.push_back(std::move(pair));
  }
  std::vector<fractal::TreeNode> nodes;
  for (const auto& n : require_field(j, "nodes", "fractal_probe.tree")) {
    fractal::TreeNode node;
    node.pair = require_field(n, "pair", "tree.nodes").get<int>();
    node.left = n.value("left", -1);
    node.right = n.value("right", -1);
    nodes.push_back(node);
  }
  return fractal::DecisionTree(std::move(pool), std::move(nodes), j.value("root", 0));
}

inline void run_fractal(const json& cfg, const ExecutionOptions& opts, Report& rep) {
  bool has_system = cfg.contains("system"), has_tree = cfg.contains("tree");
  if (has_system == has_tree)
    throw ConfigError("fractal_probe: provide exactly one of 'system' or 'tree'");

  json body;
  if (has_system) {
    auto fs = system_from_config(cfg.at("system"));
    std::size_t depth = cfg.value("depth", 12);
    auto cover = fractal::ifs_cover(fs, depth);

    std::vector<std::size_t> scales;
    if (cfg.contains("scales")) {
      for (const auto& s : cfg.at("scales")) scales.push_back(s.get<std::size_t>());
    } else {
      for (std::size_t s = 1; s <= 10; ++s) scales.push_back(s);
    }
    unsigned base = cfg.value("box_base", 3);
    auto est = fractal::box_count_dimension(cover, scales, base);

    body["system"] = fs.label;
    body["cover"] = {{"depth", depth},
                     {"intervals", cover.intervals.size()},
                     {"total_length", cover.total_length().str()}};
    json counts = json::array();
    for (const auto& [s, n] : est.counts) counts.push_back({s, n.str()});
    body["dimension"] = {{"slope", est.slope}, {"base", base}, {"counts", counts}};

    if (cfg.contains("probe")) {
      const auto& probe = cfg.at("probe");
      Rational point = rational_field(require_field(probe, "point", "probe"), "probe.point");
      std::vector<Rational> epsilons;
      for (const auto& e : require_field(probe, "epsilons", "probe"))
        epsilons.push_back(rational_field(e, "probe.epsilons"));
      auto outcomes = fractal::dense_rejection_probe(
          [&cover](const Rational& x) { return cover.contains(x); }, point, epsilons);
      json arr = json::array();
      for (const auto& o : outcomes) {
        json e;
        e["epsilon"] = o.epsilon.str();
        if (o.witness) e["witness"] = o.witness->str();
        else e["witness"] = nullptr;
        arr.push_back(e);
      }
      body["dense_probe"] = arr;
    }
    rep.body["results"] = body;

    std::vector<std::vector<std::string>> cover_rows;
    for (const auto& iv : cover.intervals)
      cover_rows.push_back({std::to_string(depth), iv.lo.num().str(), iv.lo.den().str(),
                            iv.hi.num().str(), iv.hi.den().str()});
    rep.files.emplace_back("cover.csv",
                           emit_table({"depth", "lo_num", "lo_den", "hi_num", "hi_den"}, cover_rows));
    std::vector<std::vector<std::string>> count_rows;
    std::vector<Rational> count_series;
    for (const auto& [s, n] : est.counts) {
      count_rows.push_back({std::to_string(s), n.str()});
      count_series.emplace_back(n);
    }
    rep.files.emplace_back("counts.csv", emit_table({"scale", "boxes"}, count_rows));
    rep.files.emplace_back("counts.svg", emit_plot({{"N(s)", count_series}}, "box counts"));
  } else {
    auto tree = tree_from_config(cfg.at("tree"));
    std::size_t grid_depth = cfg.value("grid_depth", 10);
    auto grid = learning::ProbeGrid::dyadic_grid(grid_depth);
    auto cells = fractal::partition(tree, grid, opts.parallelism);

    std::size_t accepted_cells = 0, accepted_points = 0;
    json detail = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : cells) {
      if (cell.accepted) {
        ++accepted_cells;
        accepted_points += cell.point_indices.size();
      }
      detail.push_back({{"path", cell.path_key},
                        {"accepted", cell.accepted},
                        {"size", cell.point_indices.size()}});
      rows.push_back({cell.path_key, cell.accepted ? "1" : "0",
                      std::to_string(cell.point_indices.size()),
                      grid.points[cell.point_indices.front()].str(),
                      grid.points[cell.point_indices.back()].str()});
    }
    body["grid"] = {{"depth", grid_depth}, {"points", grid.points.size()}};
    body["partition"] = {{"cells", cells.size()},
                         {"accepted_cells", accepted_cells},
                         {"accepted_points", accepted_points},
                         {"detail", detail}};
    rep.body["results"] = body;
    rep.files.emplace_back(
        "partition.csv",
        emit_table({"path", "accepted", "size", "first_point", "last_point"}, rows));
  }
}

}  // namespace detail

/// Executes one experiment. The report body (and every emitted file) is a
/// deterministic function of the config alone; parallelism and timestamps
/// live in meta.
inline Report run_experiment(const json& config, const ExecutionOptions& opts = {}) {
  if (!config.is_object()) throw ConfigError("experiment config must be a JSON object");
  std::string kind = detail::require_field(config, "kind", "config").get<std::string>();

  Report rep;
  rep.meta["tool"] = "qdyn";
  rep.meta["version"] = kToolVersion;
  rep.meta["generated_at"] = detail::iso_timestamp();
  rep.meta["parallelism"] = opts.parallelism;
  rep.body["config"] = config;

  if (kind == "tm_trace") detail::run_tm_trace(config, opts, rep);
  else if (kind == "learning_run") detail::run_learning(config, opts, rep);
  else if (kind == "fractal_probe") detail::run_fractal(config, opts, rep);
  else throw ConfigError("unknown experiment kind '" + kind + "'");
  return rep;
}

inline json load_config(const std::string& path) {
  std::string text = detail::read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() carries the byte offset of the syntax error
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

/// Writes report.json plus the per-kind CSV/SVG files, once, at the end.
inline void write_report(const Report& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto dump = [&](const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + (fs::path(dir) / name).string() + "'");
    out << content;
  };
  dump("report.json", rep.full().dump(2) + "\n");
  for (const auto& [name, content] : rep.files) dump(name, content);
}

inline Report run_experiment_file(const std::string& path, const ExecutionOptions& opts = {}) {
  json config = load_config(path);
  Report rep = run_experiment(config, opts);
  std::string dir = !opts.output_dir.empty()
                        ? opts.output_dir
                        : config.value("output_dir", std::string());
  if (!dir.empty()) write_report(rep, dir);
  return rep;
}

}  // namespace qdyn::cli
