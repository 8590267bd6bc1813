#pragma once

// Syntactically co-safe LTL: formulas, parsing, positive normal form, formula
// progression and compilation to a complete DFA over 2^AP.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"

namespace tsynth {

inline constexpr std::size_t kMaxPropositions = 12;

// A letter of the alphabet 2^AP, stored as a bitmask over proposition indices.
using Symbol = std::uint32_t;

// Ordered set of atomic propositions. Index i corresponds to bit i of a Symbol.
class PropositionSet {
 public:
  PropositionSet() = default;

  explicit PropositionSet(std::vector<std::string> names, std::size_t max_size = kMaxPropositions)
      : names_(std::move(names)) {
    if (names_.size() > max_size) {
      throw InputError("too many atomic propositions: " + std::to_string(names_.size()) +
                       " (limit " + std::to_string(max_size) + ")");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& n = names_[i];
      if (n.empty() || !std::all_of(n.begin(), n.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
          })) {
        throw InputError("invalid atomic proposition name '" + n + "'");
      }
      if (is_keyword(n)) throw InputError("atomic proposition '" + n + "' is a reserved word");
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[j] == n) throw InputError("duplicate atomic proposition '" + n + "'");
      }
    }
  }

  static bool is_keyword(std::string_view s) {
    return s == "X" || s == "F" || s == "U" || s == "true" || s == "false";
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::size_t alphabet_size() const { return std::size_t{1} << names_.size(); }
  bool contains(Symbol s) const { return (static_cast<std::size_t>(s) >> names_.size()) == 0; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw UnknownProposition(std::string(name));
  }

  Symbol symbol(const std::vector<std::string>& props) const {
    Symbol s = 0;
    for (const auto& p : props) s |= Symbol{1} << index(p);
    return s;
  }

  std::vector<std::string> members(Symbol s) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (s & (Symbol{1} << i)) out.push_back(names_[i]);
    }
    return out;
  }

  std::string format(Symbol s) const {
    std::string out = "{";
    bool first = true;
    for (const auto& m : members(s)) {
      if (!first) out += ",";
      out += m;
      first = false;
    }
    return out + "}";
  }

  friend bool operator==(const PropositionSet&, const PropositionSet&) = default;

 private:
  std::vector<std::string> names_;
};

enum class Op { True, False, Atom, NegAtom, Not, And, Or, Next, Until, Eventually };

// Immutable formula AST. Nodes are shared; identity and ordering use a
// canonical text key, so structurally equal formulas compare equal.
class Formula {
 public:
  static Formula truth() { return make(Op::True, "", 0, {}); }
  static Formula falsity() { return make(Op::False, "", 0, {}); }
  static Formula atom(std::string name, std::size_t prop) {
    return make(Op::Atom, std::move(name), prop, {});
  }
  static Formula neg_atom(std::string name, std::size_t prop) {
    return make(Op::NegAtom, std::move(name), prop, {});
  }
  static Formula negation(Formula f) { return make(Op::Not, "", 0, {std::move(f)}); }
  static Formula conj(Formula l, Formula r) { return make(Op::And, "", 0, {std::move(l), std::move(r)}); }
  static Formula disj(Formula l, Formula r) { return make(Op::Or, "", 0, {std::move(l), std::move(r)}); }
  static Formula conj(std::vector<Formula> args) { return make(Op::And, "", 0, std::move(args)); }
  static Formula disj(std::vector<Formula> args) { return make(Op::Or, "", 0, std::move(args)); }
  static Formula next(Formula f) { return make(Op::Next, "", 0, {std::move(f)}); }
  static Formula until(Formula l, Formula r) { return make(Op::Until, "", 0, {std::move(l), std::move(r)}); }
  static Formula eventually(Formula f) { return make(Op::Eventually, "", 0, {std::move(f)}); }

  Op op() const { return node_->op; }
  const std::string& name() const { return node_->name; }
  std::size_t prop() const { return node_->prop; }
  std::span<const Formula> args() const { return node_->args; }
  const Formula& arg(std::size_t i) const { return node_->args.at(i); }
  const std::string& key() const { return node_->key; }
  std::string to_string() const { return node_->key; }

  bool is_true() const { return op() == Op::True; }
  bool is_false() const { return op() == Op::False; }

  friend bool operator==(const Formula& a, const Formula& b) {
    return a.node_ == b.node_ || a.node_->key == b.node_->key;
  }
  friend std::strong_ordering operator<=>(const Formula& a, const Formula& b) {
    return a.node_->key <=> b.node_->key;
  }

 private:
  struct Node {
    Op op;
    std::string name;
    std::size_t prop;
    std::vector<Formula> args;
    std::string key;
  };

  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Formula make(Op op, std::string name, std::size_t prop, std::vector<Formula> args) {
    auto node = std::make_shared<Node>(Node{op, std::move(name), prop, std::move(args), {}});
    node->key = render(*node);
    return Formula(std::move(node));
  }

  static std::string render(const Node& n) {
    auto join = [&](std::string_view sep) {
      std::string out = "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += sep;
        out += n.args[i].key();
      }
      return out + ")";
    };
    switch (n.op) {
      case Op::True: return "true";
      case Op::False: return "false";
      case Op::Atom: return n.name;
      case Op::NegAtom: return "!" + n.name;
      case Op::Not: return "!(" + n.args[0].key() + ")";
      case Op::And: return join(" & ");
      case Op::Or: return join(" | ");
      case Op::Next: return "X " + n.args[0].key();
      case Op::Until: return "(" + n.args[0].key() + " U " + n.args[1].key() + ")";
      case Op::Eventually: return "F " + n.args[0].key();
    }
    return "?";
  }

  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Parsing. Precedence, tightest first: ! and X/F (prefix), &, |, U (right
// associative).

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const PropositionSet& props) : text_(text), props_(props) {
    advance();
  }

  Formula parse() {
    if (tok_.kind == Tok::End) throw SyntaxError(tok_.pos, "formula", "end of input");
    Formula f = until();
    if (tok_.kind != Tok::End) throw SyntaxError(tok_.pos, "end of input", describe());
    return f;
  }

 private:
  enum class Tok { End, Not, And, Or, LParen, RParen, Next, Eventually, Until, True, False, Ident };
  struct Token {
    Tok kind = Tok::End;
    std::size_t pos = 0;
    std::string text;
  };

  void advance() {
    while (at_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[at_]))) ++at_;
    tok_ = Token{Tok::End, at_, ""};
    if (at_ >= text_.size()) return;
    const char c = text_[at_];
    auto single = [&](Tok k) {
      tok_ = Token{k, at_, std::string(1, c)};
      ++at_;
    };
    switch (c) {
      case '!': return single(Tok::Not);
      case '&': return single(Tok::And);
      case '|': return single(Tok::Or);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      default: break;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = at_;
      while (at_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[at_])) || text_[at_] == '_')) {
        ++at_;
      }
      std::string word(text_.substr(start, at_ - start));
      Tok k = Tok::Ident;
      if (word == "X") k = Tok::Next;
      else if (word == "F") k = Tok::Eventually;
      else if (word == "U") k = Tok::Until;
      else if (word == "true") k = Tok::True;
      else if (word == "false") k = Tok::False;
      tok_ = Token{k, start, std::move(word)};
      return;
    }
    throw SyntaxError(at_, "token", "'" + std::string(1, c) + "'");
  }

  std::string describe() const {
    return tok_.kind == Tok::End ? "end of input" : "'" + tok_.text + "'";
  }

  Formula until() {
    Formula lhs = disjunction();
    if (tok_.kind == Tok::Until) {
      advance();
      Formula rhs = until();
      return Formula::until(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula disjunction() {
    Formula lhs = conjunction();
    while (tok_.kind == Tok::Or) {
      advance();
      lhs = Formula::disj(std::move(lhs), conjunction());
    }
    return lhs;
  }

  Formula conjunction() {
    Formula lhs = unary();
    while (tok_.kind == Tok::And) {
      advance();
      lhs = Formula::conj(std::move(lhs), unary());
    }
    return lhs;
  }

  Formula unary() {
    switch (tok_.kind) {
      case Tok::Not: advance(); return Formula::negation(unary());
      case Tok::Next: advance(); return Formula::next(unary());
      case Tok::Eventually: advance(); return Formula::eventually(unary());
      default: return primary();
    }
  }

  Formula primary() {
    switch (tok_.kind) {
      case Tok::True: advance(); return Formula::truth();
      case Tok::False: advance(); return Formula::falsity();
      case Tok::Ident: {
        auto idx = props_.find(tok_.text);
        if (!idx) throw UnknownProposition(tok_.text);
        Formula f = Formula::atom(tok_.text, *idx);
        advance();
        return f;
      }
      case Tok::LParen: {
        advance();
        Formula f = until();
        if (tok_.kind != Tok::RParen) throw SyntaxError(tok_.pos, "')'", describe());
        advance();
        return f;
      }
      default:
        throw SyntaxError(tok_.pos, "proposition, literal, unary operator or '('", describe());
    }
  }

  std::string_view text_;
  const PropositionSet& props_;
  std::size_t at_ = 0;
  Token tok_;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text, const PropositionSet& props) {
  return detail::Parser(text, props).parse();
}

// ---------------------------------------------------------------------------
// Positive normal form.

namespace detail {

inline Formula pnf(const Formula& f, bool negated) {
  switch (f.op()) {
    case Op::True: return negated ? Formula::falsity() : f;
    case Op::False: return negated ? Formula::truth() : f;
    case Op::Atom: return negated ? Formula::neg_atom(f.name(), f.prop()) : f;
    case Op::NegAtom: return negated ? Formula::atom(f.name(), f.prop()) : f;
    case Op::Not: return pnf(f.arg(0), !negated);
    case Op::And:
    case Op::Or: {
      std::vector<Formula> args;
      for (const auto& a : f.args()) args.push_back(pnf(a, negated));
      const bool conj = (f.op() == Op::And) != negated;
      return conj ? Formula::conj(std::move(args)) : Formula::disj(std::move(args));
    }
    case Op::Next: return Formula::next(pnf(f.arg(0), negated));
    case Op::Until:
    case Op::Eventually:
      if (negated) {
        throw NotCoSafe("negation of '" + f.to_string() +
                        "' needs a release/always operator and is not syntactically co-safe");
      }
      if (f.op() == Op::Eventually) return Formula::eventually(pnf(f.arg(0), false));
      return Formula::until(pnf(f.arg(0), false), pnf(f.arg(1), false));
  }
  return f;
}

}  // namespace detail

inline Formula to_pnf(const Formula& f) { return detail::pnf(f, false); }

inline bool is_pnf(const Formula& f) {
  if (f.op() == Op::Not) return false;
  return std::all_of(f.args().begin(), f.args().end(), [](const Formula& a) { return is_pnf(a); });
}

// ---------------------------------------------------------------------------
// Canonical simplification: constant propagation, flattening, sorted operands,
// idempotence and absorption. Every rule is sound under the three-valued
// reading of a finite prefix, which keeps progression exact for good-prefix
// detection.

namespace detail {

// Operand set of `f` viewed as a `kind` node ({f} when f is something else).
inline std::vector<Formula> operands(const Formula& f, Op kind) {
  if (f.op() == kind) return {f.args().begin(), f.args().end()};
  return {f};
}

inline Formula simplify_nary(Op kind, std::vector<Formula> args) {
  const Op absorbing = kind == Op::And ? Op::False : Op::True;
  const Op unit = kind == Op::And ? Op::True : Op::False;
  const Op dual = kind == Op::And ? Op::Or : Op::And;

  std::vector<Formula> flat;
  for (auto& a : args) {
    if (a.op() == absorbing) return a;
    if (a.op() == unit) continue;
    if (a.op() == kind) {
      flat.insert(flat.end(), a.args().begin(), a.args().end());
    } else {
      flat.push_back(std::move(a));
    }
  }
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());

  // Absorption: x ∧ (x ∨ y) = x, generalised to operand-set inclusion.
  std::vector<std::vector<Formula>> sets;
  sets.reserve(flat.size());
  for (const auto& a : flat) sets.push_back(operands(a, dual));
  std::vector<bool> drop(flat.size(), false);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    for (std::size_t j = 0; j < flat.size() && !drop[i]; ++j) {
      if (i == j || drop[j]) continue;
      if (sets[j].size() < sets[i].size() &&
          std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end())) {
        drop[i] = true;
      }
    }
  }
  std::vector<Formula> kept;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!drop[i]) kept.push_back(flat[i]);
  }
  if (kept.empty()) return kind == Op::And ? Formula::truth() : Formula::falsity();
  if (kept.size() == 1) return kept.front();
  return kind == Op::And ? Formula::conj(std::move(kept)) : Formula::disj(std::move(kept));
}

}  // namespace detail

inline Formula simplify(const Formula& f) {
  switch (f.op()) {
    case Op::True:
    case Op::False:
    case Op::Atom:
    case Op::NegAtom:
      return f;
    case Op::Not: {
      Formula a = simplify(f.arg(0));
      if (a.is_true()) return Formula::falsity();
      if (a.is_false()) return Formula::truth();
      return Formula::negation(a);
    }
    case Op::And:
    case Op::Or: {
      std::vector<Formula> args;
      for (const auto& a : f.args()) args.push_back(simplify(a));
      return detail::simplify_nary(f.op(), std::move(args));
    }
    case Op::Next: {
      Formula a = simplify(f.arg(0));
      if (a.is_true() || a.is_false()) return a;
      return Formula::next(a);
    }
    case Op::Eventually: {
      Formula a = simplify(f.arg(0));
      if (a.is_true() || a.is_false()) return a;
      return Formula::eventually(a);
    }
    case Op::Until: {
      Formula l = simplify(f.arg(0));
      Formula r = simplify(f.arg(1));
      if (r.is_true() || r.is_false()) return r;
      if (l.is_false()) return r;
      if (l.is_true()) return Formula::eventually(r);
      return Formula::until(l, r);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Progression: the residual obligation after reading one letter.

namespace detail {

inline Formula progress_raw(const Formula& f, Symbol sigma) {
  switch (f.op()) {
    case Op::True:
    case Op::False:
      return f;
    case Op::Atom:
      return (sigma >> f.prop()) & 1u ? Formula::truth() : Formula::falsity();
    case Op::NegAtom:
      return (sigma >> f.prop()) & 1u ? Formula::falsity() : Formula::truth();
    case Op::And:
    case Op::Or: {
      std::vector<Formula> args;
      for (const auto& a : f.args()) args.push_back(progress_raw(a, sigma));
      return f.op() == Op::And ? Formula::conj(std::move(args)) : Formula::disj(std::move(args));
    }
    case Op::Next:
      return f.arg(0);
    case Op::Until:
      return Formula::disj(progress_raw(f.arg(1), sigma),
                           Formula::conj(progress_raw(f.arg(0), sigma), f));
    case Op::Eventually:
      return Formula::disj(progress_raw(f.arg(0), sigma), f);
    case Op::Not:
      break;
  }
  throw InputError("progression requires a formula in positive normal form: " + f.to_string());
}

}  // namespace detail

inline Formula progress(const Formula& f, Symbol sigma) {
  return simplify(detail::progress_raw(f, sigma));
}

// ---------------------------------------------------------------------------
// DFA

// Which letters can actually occur. `Exclusive` restricts structural analysis
// to letters with at most one proposition (disjoint labelled regions).
enum class LabelMode { Any, Exclusive };

inline std::string to_string(LabelMode m) { return m == LabelMode::Any ? "any" : "exclusive"; }

inline LabelMode label_mode_from_string(std::string_view s) {
  if (s == "any") return LabelMode::Any;
  if (s == "exclusive") return LabelMode::Exclusive;
  throw InputError("unknown label mode '" + std::string(s) + "'");
}

// Complete deterministic automaton over 2^AP. Transitions are stored per
// symbol: delta[q * |2^AP| + sigma].
class Dfa {
 public:
  Dfa(PropositionSet props, std::size_t num_states, std::vector<std::size_t> delta,
      std::size_t initial, std::vector<bool> accepting, std::optional<std::size_t> sink,
      LabelMode label_mode = LabelMode::Any, std::vector<std::string> state_formulas = {})
      : props_(std::move(props)),
        num_states_(num_states),
        delta_(std::move(delta)),
        initial_(initial),
        accepting_(std::move(accepting)),
        sink_(sink),
        label_mode_(label_mode),
        formulas_(std::move(state_formulas)) {
    const std::size_t k = props_.alphabet_size();
    if (num_states_ == 0) throw InputError("DFA must have at least one state");
    if (delta_.size() != num_states_ * k) {
      throw InputError("DFA transition table is incomplete: expected " +
                       std::to_string(num_states_ * k) + " entries, got " +
                       std::to_string(delta_.size()));
    }
    for (auto t : delta_) {
      if (t >= num_states_) throw InputError("DFA transition targets unknown state");
    }
    if (initial_ >= num_states_) throw InputError("DFA initial state out of range");
    if (accepting_.size() != num_states_) throw InputError("DFA accepting mask has wrong size");
    if (sink_) {
      if (*sink_ >= num_states_) throw InputError("DFA sink out of range");
      if (accepting_[*sink_]) throw InputError("DFA sink cannot be accepting");
      for (Symbol s = 0; s < k; ++s) {
        if (next(*sink_, s) != *sink_) throw InputError("DFA sink is not absorbing");
      }
    }
    if (!formulas_.empty() && formulas_.size() != num_states_) {
      throw InputError("DFA state formula list has wrong size");
    }
  }

  const PropositionSet& propositions() const { return props_; }
  std::size_t num_states() const { return num_states_; }
  std::size_t alphabet_size() const { return props_.alphabet_size(); }
  std::size_t next(std::size_t q, Symbol sigma) const {
    return delta_[q * props_.alphabet_size() + sigma];
  }
  std::size_t initial() const { return initial_; }
  bool is_accepting(std::size_t q) const { return accepting_.at(q); }
  std::optional<std::size_t> sink() const { return sink_; }
  bool is_sink(std::size_t q) const { return sink_ && *sink_ == q; }
  LabelMode label_mode() const { return label_mode_; }
  const std::vector<std::size_t>& transitions() const { return delta_; }

  std::vector<std::size_t> accepting_states() const {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < num_states_; ++q) {
      if (accepting_[q]) out.push_back(q);
    }
    return out;
  }

  // Canonical residual formula of state q (empty if unknown).
  std::string state_formula(std::size_t q) const {
    return formulas_.empty() ? std::string() : formulas_.at(q);
  }

  static std::string name(std::size_t q) { return "q" + std::to_string(q); }

  // Letters that can occur under the label mode.
  std::vector<Symbol> admissible_symbols() const {
    std::vector<Symbol> out;
    for (Symbol s = 0; s < props_.alphabet_size(); ++s) {
      if (label_mode_ == LabelMode::Any || (s & (s - 1)) == 0) out.push_back(s);
    }
    return out;
  }

 private:
  PropositionSet props_;
  std::size_t num_states_;
  std::vector<std::size_t> delta_;
  std::size_t initial_;
  std::vector<bool> accepting_;
  std::optional<std::size_t> sink_;
  LabelMode label_mode_;
  std::vector<std::string> formulas_;
};

struct CompileOptions {
  std::size_t state_budget = 10'000;
  LabelMode label_mode = LabelMode::Any;
};

// States are the canonical residuals reachable from f. Numbering: the initial
// state is q0, then the remaining non-accepting non-sink states in
// breadth-first discovery order (letters in increasing bitmask order), then the
// accepting state, then the sink.
inline Dfa compile_dfa(const Formula& f, const PropositionSet& props, CompileOptions opts = {}) {
  const Formula start = simplify(to_pnf(f));
  const std::size_t k = props.alphabet_size();

  std::vector<Formula> states{start};
  std::unordered_map<std::string, std::size_t> ids{{start.key(), 0}};
  std::vector<std::size_t> raw_delta;
  std::deque<std::size_t> frontier{0};
  while (!frontier.empty()) {
    const std::size_t q = frontier.front();
    frontier.pop_front();
    raw_delta.resize(states.size() * k);
    for (Symbol s = 0; s < k; ++s) {
      Formula nxt = progress(states[q], s);
      auto [it, inserted] = ids.try_emplace(nxt.key(), states.size());
      if (inserted) {
        if (states.size() >= opts.state_budget) throw StateBudgetExceeded(opts.state_budget);
        states.push_back(nxt);
        frontier.push_back(it->second);
        raw_delta.resize(states.size() * k);
      }
      raw_delta[q * k + s] = it->second;
    }
  }

  const std::size_t n = states.size();
  std::vector<std::size_t> order{0};
  std::vector<std::size_t> accepting_ids, sink_ids;
  for (std::size_t q = 1; q < n; ++q) {
    if (states[q].is_true()) accepting_ids.push_back(q);
    else if (states[q].is_false()) sink_ids.push_back(q);
    else order.push_back(q);
  }
  order.insert(order.end(), accepting_ids.begin(), accepting_ids.end());
  order.insert(order.end(), sink_ids.begin(), sink_ids.end());
  std::vector<std::size_t> renumber(n);
  for (std::size_t i = 0; i < n; ++i) renumber[order[i]] = i;

  std::vector<std::size_t> delta(n * k);
  std::vector<bool> accepting(n, false);
  std::vector<std::string> formulas(n);
  std::optional<std::size_t> sink;
  for (std::size_t old = 0; old < n; ++old) {
    const std::size_t q = renumber[old];
    for (Symbol s = 0; s < k; ++s) delta[q * k + s] = renumber[raw_delta[old * k + s]];
    accepting[q] = states[old].is_true();
    if (states[old].is_false()) sink = q;
    formulas[q] = states[old].key();
  }
  return Dfa(props, n, std::move(delta), renumber[0], std::move(accepting), sink, opts.label_mode,
             std::move(formulas));
}

// Good-prefix acceptance: true as soon as the run enters F.
inline bool accepts(const Dfa& d, std::span<const Symbol> word) {
  std::size_t q = d.initial();
  if (d.is_accepting(q)) return true;
  for (Symbol s : word) {
    if (!d.propositions().contains(s)) throw InputError("letter outside the DFA alphabet");
    q = d.next(q, s);
    if (d.is_accepting(q)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const Dfa& d) {
  using nlohmann::json;
  json j;
  json states = json::array();
  json formulas = json::array();
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    states.push_back(Dfa::name(q));
    formulas.push_back(d.state_formula(q));
  }
  j["states"] = states;
  j["formulas"] = formulas;
  j["initial"] = Dfa::name(d.initial());
  json acc = json::array();
  for (auto q : d.accepting_states()) acc.push_back(Dfa::name(q));
  j["accepting"] = acc;
  j["sink"] = d.sink() ? json(Dfa::name(*d.sink())) : json(nullptr);
  j["ap"] = d.propositions().names();
  j["label_mode"] = to_string(d.label_mode());
  json tr = json::array();
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    for (Symbol s = 0; s < d.alphabet_size(); ++s) {
      tr.push_back({{"from", Dfa::name(q)},
                    {"symbol", d.propositions().members(s)},
                    {"to", Dfa::name(d.next(q, s))}});
    }
  }
  j["transitions"] = tr;
  return j;
}

inline Dfa dfa_from_json(const nlohmann::json& j) {
  try {
    PropositionSet props(j.at("ap").get<std::vector<std::string>>());
    const auto names = j.at("states").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::size_t> id;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!id.emplace(names[i], i).second) throw InputError("duplicate DFA state " + names[i]);
    }
    auto lookup = [&](const std::string& n) {
      auto it = id.find(n);
      if (it == id.end()) throw InputError("unknown DFA state '" + n + "'");
      return it->second;
    };
    const std::size_t k = props.alphabet_size();
    std::vector<std::size_t> delta(names.size() * k, names.size());
    for (const auto& t : j.at("transitions")) {
      const Symbol s = props.symbol(t.at("symbol").get<std::vector<std::string>>());
      delta[lookup(t.at("from").get<std::string>()) * k + s] = lookup(t.at("to").get<std::string>());
    }
    if (std::find(delta.begin(), delta.end(), names.size()) != delta.end()) {
      throw InputError("DFA transition table is incomplete");
    }
    std::vector<bool> accepting(names.size(), false);
    for (const auto& a : j.at("accepting")) accepting[lookup(a.get<std::string>())] = true;
    std::optional<std::size_t> sink;
    if (j.contains("sink") && !j.at("sink").is_null()) sink = lookup(j.at("sink").get<std::string>());
    LabelMode mode = LabelMode::Any;
    if (j.contains("label_mode")) mode = label_mode_from_string(j.at("label_mode").get<std::string>());
    std::vector<std::string> formulas;
    if (j.contains("formulas")) formulas = j.at("formulas").get<std::vector<std::string>>();
    return Dfa(props, names.size(), std::move(delta), lookup(j.at("initial").get<std::string>()),
               std::move(accepting), sink, mode, std::move(formulas));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed DFA document: ") + e.what());
  }
}

// Graphviz rendering; parallel letters between the same states share an edge.
inline std::string to_dot(const Dfa& d) {
  std::string out = "digraph dfa {\n  rankdir=LR;\n  __start [shape=point];\n";
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    out += "  " + Dfa::name(q) + " [shape=" + (d.is_accepting(q) ? "doublecircle" : "circle");
    if (d.is_sink(q)) out += ", style=dashed";
    out += "];\n";
  }
  out += "  __start -> " + Dfa::name(d.initial()) + ";\n";
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    std::vector<std::vector<std::string>> labels(d.num_states());
    for (Symbol s = 0; s < d.alphabet_size(); ++s) {
      labels[d.next(q, s)].push_back(d.propositions().format(s));
    }
    for (std::size_t t = 0; t < d.num_states(); ++t) {
      if (labels[t].empty()) continue;
      std::string lab;
      for (std::size_t i = 0; i < labels[t].size(); ++i) lab += (i ? " " : "") + labels[t][i];
      out += "  " + Dfa::name(q) + " -> " + Dfa::name(t) + " [label=\"" + lab + "\"];\n";
    }
  }
  return out + "}\n";
}

}  // namespace tsynth
