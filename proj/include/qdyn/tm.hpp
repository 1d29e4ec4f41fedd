#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qdyn/encoding.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/rational.hpp"

namespace qdyn::tm {

inline constexpr std::uint64_t kDefaultBudget = 1'000'000;

enum class Move { Left, Right };

struct Transition {
  std::size_t next_state;
  char write;
  Move move;
};

/// A parsed 7-tuple machine. States are kept by declaration order; symbols
/// are single characters. The transition table may be partial in the
/// source text: an undeclared (state, symbol) pair behaves as an implicit
/// halt-in-reject rule, which keeps the step function total.
class TMDescription {
 public:
  TMDescription(std::vector<std::string> states,
                encoding::Alphabet input_alphabet,
                encoding::Alphabet tape_alphabet,
                std::size_t start, std::size_t accept, std::size_t reject,
                std::vector<std::unordered_map<char, Transition>> delta)
      : states_(std::move(states)),
        input_alphabet_(std::move(input_alphabet)),
        tape_alphabet_(std::move(tape_alphabet)),
        start_(start),
        accept_(accept),
        reject_(reject),
        delta_(std::move(delta)) {
    if (start_ >= states_.size() || accept_ >= states_.size() || reject_ >= states_.size())
      throw UsageError("start/accept/reject must be declared states");
    if (!tape_alphabet_.blank()) throw UsageError("tape alphabet must designate a blank");
    if (input_alphabet_.contains(*tape_alphabet_.blank()))
      throw UsageError("blank symbol must not belong to the input alphabet");
    for (char c : input_alphabet_.symbols())
      if (!tape_alphabet_.contains(c))
        throw UsageError("input alphabet must be a subset of the tape alphabet");
    if (delta_.size() != states_.size())
      throw UsageError("delta table must have one row per state");
  }

  const std::vector<std::string>& states() const { return states_; }
  const std::string& state_name(std::size_t id) const { return states_.at(id); }
  const encoding::Alphabet& input_alphabet() const { return input_alphabet_; }
  const encoding::Alphabet& tape_alphabet() const { return tape_alphabet_; }
  char blank() const { return *tape_alphabet_.blank(); }
  std::size_t start() const { return start_; }
  std::size_t accept() const { return accept_; }
  std::size_t reject() const { return reject_; }

  bool is_halting(std::size_t state) const { return state == accept_ || state == reject_; }

  /// The declared rule, or the implicit halt-in-reject rule.
  Transition transition(std::size_t state, char symbol) const {
    const auto& row = delta_.at(state);
    if (auto it = row.find(symbol); it != row.end()) return it->second;
    return Transition{reject_, symbol, Move::Right};
  }

  std::size_t rule_count() const {
    std::size_t n = 0;
    for (const auto& row : delta_) n += row.size();
    return n;
  }

 private:
  std::vector<std::string> states_;
  encoding::Alphabet input_alphabet_;
  encoding::Alphabet tape_alphabet_;
  std::size_t start_, accept_, reject_;
  std::vector<std::unordered_map<char, Transition>> delta_;
};

/// Snapshot of a run: control state, explicit tape cells, head index.
/// Cells are kept exactly up to max(rightmost non-blank, head); everything
/// beyond is implicit blank.
struct TMConfiguration {
  std::size_t state = 0;
  std::string tape;
  std::size_t head = 0;
  std::uint64_t steps_taken = 0;

  friend bool operator==(const TMConfiguration& a, const TMConfiguration& b) {
    return a.state == b.state && a.tape == b.tape && a.head == b.head;
  }
};

enum class Outcome { Accepted, Rejected, BudgetExhausted, NonHaltingCycle };

inline std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Accepted: return "accepted";
    case Outcome::Rejected: return "rejected";
    case Outcome::BudgetExhausted: return "budget_exhausted";
    case Outcome::NonHaltingCycle: return "non_halting_cycle";
  }
  return "unknown";
}

struct RunResult {
  Outcome outcome;
  TMConfiguration final_config;
  std::uint64_t steps = 0;
};

struct RunOptions {
  /// With detection on, revisiting an identical (state, tape, head) proves
  /// the machine never halts and the run reports NonHaltingCycle instead
  /// of burning the rest of the budget.
  bool detect_cycles = false;
};

inline TMConfiguration initial_configuration(const TMDescription& m, std::string_view input) {
  for (char c : input)
    if (!m.input_alphabet().contains(c))
      throw EncodingError(std::string("input symbol '") + c + "' not in the input alphabet");
  TMConfiguration c;
  c.state = m.start();
  c.tape = input.empty() ? std::string(1, m.blank()) : std::string(input);
  c.head = 0;
  c.steps_taken = 0;
  return c;
}

/// One delta application. Moving L at the leftmost cell keeps the head at
/// cell 0; moving R past the rightmost cell extends the tape by a blank.
inline TMConfiguration step(const TMDescription& m, const TMConfiguration& c) {
  if (m.is_halting(c.state))
    throw UsageError("cannot step a halted configuration (state " + m.state_name(c.state) + ")");
  TMConfiguration next = c;
  char sym = next.tape[next.head];
  Transition t = m.transition(next.state, sym);
  next.tape[next.head] = t.write;
  next.state = t.next_state;
  if (t.move == Move::Right) {
    ++next.head;
    if (next.head == next.tape.size()) next.tape.push_back(m.blank());
  } else if (next.head > 0) {
    --next.head;
  }
  while (next.tape.size() > next.head + 1 && next.tape.back() == m.blank()) next.tape.pop_back();
  ++next.steps_taken;
  return next;
}

namespace detail {
inline std::string config_key(const TMConfiguration& c) {
  return std::to_string(c.state) + ':' + std::to_string(c.head) + ':' + c.tape;
}
}  // namespace detail

inline RunResult run(const TMDescription& m, std::string_view input,
                     std::uint64_t budget = kDefaultBudget, const RunOptions& opts = {}) {
  TMConfiguration c = initial_configuration(m, input);
  std::unordered_set<std::string> seen;
  if (opts.detect_cycles) seen.insert(detail::config_key(c));
  while (!m.is_halting(c.state) && c.steps_taken < budget) {
    c = step(m, c);
    if (opts.detect_cycles && !m.is_halting(c.state)) {
      if (!seen.insert(detail::config_key(c)).second)
        return RunResult{Outcome::NonHaltingCycle, c, c.steps_taken};
    }
  }
  Outcome out = Outcome::BudgetExhausted;
  if (c.state == m.accept()) out = Outcome::Accepted;  // accept wins when accept == reject
  else if (c.state == m.reject()) out = Outcome::Rejected;
  return RunResult{out, c, c.steps_taken};
}

/// Configurations after 0, 1, 2, ... steps, up to halting or the budget.
inline std::vector<TMConfiguration> tape_trace(const TMDescription& m, std::string_view input,
                                               std::uint64_t budget = kDefaultBudget) {
  std::vector<TMConfiguration> trace;
  trace.push_back(initial_configuration(m, input));
  while (!m.is_halting(trace.back().state) && trace.back().steps_taken < budget)
    trace.push_back(step(m, trace.back()));
  return trace;
}

/// Like run/tape_trace but the tape is seeded with an arbitrary string over
/// the tape alphabet (blanks allowed). This is how functionals feed a
/// machine its own previous output.
inline TMConfiguration seeded_configuration(const TMDescription& m, std::string_view tape) {
  for (char c : tape)
    if (!m.tape_alphabet().contains(c))
      throw EncodingError(std::string("tape symbol '") + c + "' not in the tape alphabet");
  TMConfiguration c;
  c.state = m.start();
  c.tape = tape.empty() ? std::string(1, m.blank()) : std::string(tape);
  c.head = 0;
  while (c.tape.size() > 1 && c.tape.back() == m.blank()) c.tape.pop_back();
  return c;
}

inline RunResult run_seeded(const TMDescription& m, std::string_view tape,
                            std::uint64_t budget = kDefaultBudget) {
  TMConfiguration c = seeded_configuration(m, tape);
  while (!m.is_halting(c.state) && c.steps_taken < budget) c = step(m, c);
  Outcome out = Outcome::BudgetExhausted;
  if (c.state == m.accept()) out = Outcome::Accepted;
  else if (c.state == m.reject()) out = Outcome::Rejected;
  return RunResult{out, c, c.steps_taken};
}

/// Tape content of cells [0, length), implicit blanks made explicit.
inline std::string tape_window(const TMConfiguration& c, std::size_t length, char blank) {
  std::string w = c.tape.substr(0, std::min(length, c.tape.size()));
  w.resize(length, blank);
  return w;
}

/// The sequence rho(T_0), rho(T_1), ... of a run. Every snapshot is read
/// through one fixed window, the widest max(rightmost non-blank, head)
/// seen anywhere in the trace, so all values live on a common base-b^L
/// grid and exact comparisons between steps are meaningful.
inline std::vector<Rational> rationalized_trace(const TMDescription& m, std::string_view input,
                                                std::uint64_t budget, const encoding::GodelMap& g) {
  if (!(g.alphabet() == m.tape_alphabet()))
    throw EncodingError("godel map alphabet must equal the machine's tape alphabet");
  auto trace = tape_trace(m, input, budget);
  std::size_t window = 1;
  for (const auto& c : trace) window = std::max(window, c.tape.size());
  std::vector<Rational> values;
  values.reserve(trace.size());
  for (const auto& c : trace)
    values.push_back(encoding::rationalize(tape_window(c, window, m.blank()), g).value);
  return values;
}

/// GodelMap in declaration order over the machine's tape alphabet.
inline encoding::GodelMap tape_godel_map(const TMDescription& m) {
  return encoding::GodelMap(m.tape_alphabet());
}

// ---------------------------------------------------------------------------
// Machine description text format (line-based, '#' comments):
//
//   states: q0 q1 qa qr
//   input: 0 1
//   tape: 0 1 _
//   blank: _
//   start: q0
//   accept: qa
//   reject: qr
//   delta: q0 , 0 -> q1 , 1 , R
//
// Symbols are single characters; moves are exactly L or R. Pairs without a
// rule halt in the reject state.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> tokenize_rule_line(const std::string& line) {
  std::string spaced;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == ',') {
      spaced += " , ";
    } else if (line[i] == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      spaced += " -> ";
      ++i;
    } else {
      spaced += line[i];
    }
  }
  std::istringstream in(spaced);
  std::vector<std::string> toks;
  for (std::string t; in >> t;) toks.push_back(t);
  return toks;
}

inline char single_symbol(const std::string& tok, std::size_t line_no) {
  if (tok.size() != 1)
    throw ParseError(line_no, "symbol '" + tok + "' must be a single character");
  if (tok[0] == ',' || tok[0] == '#')
    throw ParseError(line_no, std::string("'") + tok[0] + "' cannot be used as a symbol");
  return tok[0];
}

}  // namespace detail

inline TMDescription parse_machine(std::string_view text) {
  std::vector<std::string> state_names;
  std::unordered_map<std::string, std::size_t> state_ids;
  std::optional<std::string> input_syms, tape_syms;
  std::optional<char> blank;
  std::optional<std::string> start_name, accept_name, reject_name;
  struct RawRule {
    std::string from, to;
    char read, write;
    Move move;
    std::size_t line;
  };
  std::vector<RawRule> rules;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    auto toks = detail::tokenize_rule_line(raw);
    if (toks.empty()) continue;
    const std::string& head = toks.front();

    if (head == "states:") {
      if (!state_names.empty()) throw ParseError(line_no, "duplicate states declaration");
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (!state_ids.emplace(toks[i], state_names.size()).second)
          throw ParseError(line_no, "duplicate state '" + toks[i] + "'");
        state_names.push_back(toks[i]);
      }
      if (state_names.empty()) throw ParseError(line_no, "states declaration is empty");
    } else if (head == "input:") {
      if (input_syms) throw ParseError(line_no, "duplicate input declaration");
      std::string syms;
      for (std::size_t i = 1; i < toks.size(); ++i) syms += detail::single_symbol(toks[i], line_no);
      input_syms = syms;
    } else if (head == "tape:") {
      if (tape_syms) throw ParseError(line_no, "duplicate tape declaration");
      std::string syms;
      for (std::size_t i = 1; i < toks.size(); ++i) syms += detail::single_symbol(toks[i], line_no);
      if (syms.empty()) throw ParseError(line_no, "tape declaration is empty");
      tape_syms = syms;
    } else if (head == "blank:") {
      if (blank) throw ParseError(line_no, "duplicate blank declaration");
      if (toks.size() != 2) throw ParseError(line_no, "blank declaration needs one symbol");
      blank = detail::single_symbol(toks[1], line_no);
    } else if (head == "start:" || head == "accept:" || head == "reject:") {
      auto& slot = head == "start:" ? start_name : head == "accept:" ? accept_name : reject_name;
      if (slot) throw ParseError(line_no, "duplicate " + head.substr(0, head.size() - 1) + " declaration");
      if (toks.size() != 2) throw ParseError(line_no, head + " declaration needs one state");
      slot = toks[1];
    } else if (head == "delta:") {
      // delta: q , a -> q' , b , M
      if (toks.size() != 10 || toks[2] != "," || toks[4] != "->" || toks[6] != "," || toks[8] != ",")
        throw ParseError(line_no, "malformed rule; expected `delta: q , a -> q' , b , M`");
      RawRule r;
      r.from = toks[1];
      r.read = detail::single_symbol(toks[3], line_no);
      r.to = toks[5];
      r.write = detail::single_symbol(toks[7], line_no);
      const std::string& mv = toks[9];
      if (mv == "L") r.move = Move::Left;
      else if (mv == "R") r.move = Move::Right;
      else throw ParseError(line_no, "move must be L or R, got '" + mv + "'");
      r.line = line_no;
      rules.push_back(std::move(r));
    } else {
      throw ParseError(line_no, "unknown directive '" + head + "'");
    }
  }

  if (state_names.empty()) throw ParseError(line_no, "missing states declaration");
  if (!input_syms) throw ParseError(line_no, "missing input declaration");
  if (!tape_syms) throw ParseError(line_no, "missing tape declaration");
  if (!blank) throw ParseError(line_no, "missing blank declaration");
  if (!start_name) throw ParseError(line_no, "missing start declaration");
  if (!accept_name) throw ParseError(line_no, "missing accept declaration");
  if (!reject_name) throw ParseError(line_no, "missing reject declaration");

  auto resolve = [&](const std::string& name) -> std::size_t {
    auto it = state_ids.find(name);
    if (it == state_ids.end())
      throw ParseError(line_no, "state '" + name + "' was never declared");
    return it->second;
  };

  if (input_syms->empty()) throw ParseError(line_no, "input declaration is empty");
  encoding::Alphabet tape_alpha(*tape_syms, blank);
  if (input_syms->find(*blank) != std::string::npos)
    throw ParseError(line_no, "blank symbol must not appear in the input alphabet");
  encoding::Alphabet input_alpha(*input_syms);
  for (char c : *input_syms)
    if (!tape_alpha.contains(c))
      throw ParseError(line_no, std::string("input symbol '") + c + "' missing from tape alphabet");

  std::vector<std::unordered_map<char, Transition>> delta(state_names.size());
  std::size_t accept_id = resolve(*accept_name);
  std::size_t reject_id = resolve(*reject_name);
  for (const auto& r : rules) {
    auto from_it = state_ids.find(r.from);
    if (from_it == state_ids.end())
      throw ParseError(r.line, "rule references undeclared state '" + r.from + "'");
    auto to_it = state_ids.find(r.to);
    if (to_it == state_ids.end())
      throw ParseError(r.line, "rule references undeclared state '" + r.to + "'");
    if (from_it->second == accept_id || from_it->second == reject_id)
      throw ParseError(r.line, "rule starts in the halting state '" + r.from + "'");
    if (!tape_alpha.contains(r.read))
      throw ParseError(r.line, std::string("rule reads symbol '") + r.read + "' missing from tape alphabet");
    if (!tape_alpha.contains(r.write))
      throw ParseError(r.line, std::string("rule writes symbol '") + r.write + "' missing from tape alphabet");
    if (!delta[from_it->second].emplace(r.read, Transition{to_it->second, r.write, r.move}).second)
      throw ParseError(r.line, "duplicate rule for (" + r.from + ", " + std::string(1, r.read) + ")");
  }

  return TMDescription(std::move(state_names), std::move(input_alpha), std::move(tape_alpha),
                       resolve(*start_name), accept_id, reject_id, std::move(delta));
}

/// Rationalizes a machine description text itself over a fixed
/// printable-ASCII + newline alphabet. A convenience for treating whole
/// machines as points of [0,1]; the alphabet choice is a convention of
/// this library, not a canonical universal-machine encoding.
inline encoding::Encoding rationalize_description(std::string_view text) {
  static const encoding::GodelMap kTextMap = [] {
    std::string chars;
    for (char c = ' '; c <= '~'; ++c) chars += c;
    chars += '\n';
    return encoding::GodelMap(encoding::Alphabet(chars));
  }();
  return encoding::rationalize(text, kTextMap);
}

}  // namespace qdyn::tm
