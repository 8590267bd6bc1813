#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tsynth/mdp.hpp"
#include "tsynth/product.hpp"
#include "tsynth/scltl.hpp"

#ifndef TSYNTH_DATA_DIR
#define TSYNTH_DATA_DIR "data"
#endif

namespace tsynth::testing {

inline std::string data_path(const std::string& name) { return std::string(TSYNTH_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LabeledMdp two_state_mdp() {
  PropositionSet ap({"s2"});
  std::vector<Distribution> p{{{0, 0.5}, {1, 0.5}}, {{1, 0.6}, {2, 0.4}}, {{2, 1.0}}};
  return LabeledMdp(ap, {"s0", "s1", "s2"}, {"a1"}, p, 0, {0, 0, 1});
}

inline Dfa two_state_dfa() {
  PropositionSet ap({"s2"});
  return compile_dfa(parse_formula("F s2", ap), ap);
}

inline const char* kSequentialVisiting = "!O U ((A & ((!D & !O) U C)) | (D & ((!A & !O) U B)))";

inline PropositionSet visiting_props() { return PropositionSet({"O", "D", "A", "B", "C"}); }

inline Dfa visiting_dfa() {
  auto ap = visiting_props();
  return compile_dfa(parse_formula(kSequentialVisiting, ap), ap, {10'000, LabelMode::Exclusive});
}

// ---------------------------------------------------------------------------
// Three-valued evaluation of a formula on a finite word. Positions past the
// end of the word have unknown atoms. A word is a good prefix exactly when
// this evaluates to Yes at position 0.

enum class K { No = 0, Unknown = 1, Yes = 2 };

inline K k_and(K a, K b) { return static_cast<K>(std::min(static_cast<int>(a), static_cast<int>(b))); }
inline K k_or(K a, K b) { return static_cast<K>(std::max(static_cast<int>(a), static_cast<int>(b))); }
inline K k_not(K a) { return static_cast<K>(2 - static_cast<int>(a)); }

inline K kleene(const Formula& f, const std::vector<Symbol>& w, std::size_t i) {
  const std::size_t n = w.size();
  switch (f.op()) {
    case Op::True: return K::Yes;
    case Op::False: return K::No;
    case Op::Atom:
      if (i >= n) return K::Unknown;
      return (w[i] >> f.prop()) & 1u ? K::Yes : K::No;
    case Op::NegAtom:
      if (i >= n) return K::Unknown;
      return (w[i] >> f.prop()) & 1u ? K::No : K::Yes;
    case Op::Not: return k_not(kleene(f.arg(0), w, i));
    case Op::And: {
      K r = K::Yes;
      for (const auto& a : f.args()) r = k_and(r, kleene(a, w, i));
      return r;
    }
    case Op::Or: {
      K r = K::No;
      for (const auto& a : f.args()) r = k_or(r, kleene(a, w, i));
      return r;
    }
    case Op::Next: return kleene(f.arg(0), w, i + 1);
    case Op::Eventually:
    case Op::Until: {
      const bool ev = f.op() == Op::Eventually;
      const Formula& r = ev ? f.arg(0) : f.arg(1);
      if (i >= n) return kleene(r, w, i);
      K result = K::No;
      K prefix = K::Yes;  // l held at every position in [i, j)
      for (std::size_t j = i; j <= n; ++j) {
        result = k_or(result, k_and(prefix, kleene(r, w, j)));
        if (!ev) prefix = k_and(prefix, kleene(f.arg(0), w, j));
      }
      return result;
    }
  }
  return K::Unknown;
}

inline bool good_prefix(const Formula& f, const std::vector<Symbol>& w) {
  return kleene(f, w, 0) == K::Yes;
}

// Formulas over {a, b, c} for the oracle comparison.
inline std::vector<std::string> formula_corpus() {
  return {"true",
          "false",
          "a",
          "!a",
          "F a",
          "a U b",
          "X a",
          "X X b",
          "F (a & X b)",
          "!a U b",
          "(a | b) U c",
          "F a & F b",
          "F (a & F b)",
          "F a | F b",
          "a U (b U c)",
          "(a U b) U c",
          "X (a U b)",
          "!a U (b & X c)",
          "F (a & !b)",
          "a & X !b",
          "(a U b) | (b U c)",
          "F (a & X (b U c))",
          "!c U (a & (!c U b))",
          "!a & F b",
          "X F a & !b",
          "F !a",
          "(F a) U b",
          "!(a | X !b)",
          "!(!a & !F c)",
          "(a & b) U (c | X a)"};
}

// ---------------------------------------------------------------------------
// Random tabular instances.

inline LabeledMdp random_mdp(std::mt19937_64& rng, const PropositionSet& ap, std::size_t ns,
                             std::size_t na) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, ns - 1);
  std::vector<Distribution> p;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t k = 1 + pick(rng) % 3;
      Distribution d;
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double w = 0.05 + u(rng);
        d.push_back({pick(rng), w});
        sum += w;
      }
      for (auto& o : d) o.prob /= sum;
      p.push_back(d);
    }
  }
  std::vector<Symbol> labels(ns);
  std::uniform_int_distribution<Symbol> lab(0, static_cast<Symbol>(ap.alphabet_size() - 1));
  for (auto& l : labels) l = lab(rng);
  std::vector<std::string> names, actions;
  for (std::size_t s = 0; s < ns; ++s) names.push_back("s" + std::to_string(s));
  for (std::size_t a = 0; a < na; ++a) actions.push_back("a" + std::to_string(a));
  return LabeledMdp(ap, names, actions, p, 0, labels);
}

// Random complete DFA with nq states: the last state is accepting and
// absorbing, the one before it a sink when nq >= 3.
inline Dfa random_dfa(std::mt19937_64& rng, const PropositionSet& ap, std::size_t nq) {
  const std::size_t k = ap.alphabet_size();
  std::uniform_int_distribution<std::size_t> pick(0, nq - 1);
  std::vector<std::size_t> delta(nq * k);
  const std::size_t acc = nq - 1;
  std::optional<std::size_t> sink;
  if (nq >= 3) sink = nq - 2;
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t s = 0; s < k; ++s) {
      delta[q * k + s] = (q == acc || (sink && q == *sink)) ? q : pick(rng);
    }
  }
  std::vector<bool> accepting(nq, false);
  accepting[acc] = true;
  return Dfa(ap, nq, delta, 0, accepting, sink);
}

}  // namespace tsynth::testing
