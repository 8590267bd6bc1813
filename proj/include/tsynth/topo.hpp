#pragma once

// Causal dependence between automaton states, meta-modes (SCCs), level sets
// and the level-by-level solve driver.

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/mdp.hpp"
#include "tsynth/product.hpp"
#include "tsynth/scltl.hpp"

namespace tsynth {

struct CausalGraph {
  std::vector<std::set<std::size_t>> succ;  // q -> {q' != q}
  std::vector<bool> self_loop;

  std::size_t size() const { return succ.size(); }
  bool has_edge(std::size_t q, std::size_t q2) const { return succ[q].count(q2) > 0; }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& s : succ) n += s.size();
    return n;
  }
};

// Accepting states are absorbing in the product, so they have no out-edges.
inline CausalGraph causal_graph(const Dfa& d) {
  CausalGraph g{std::vector<std::set<std::size_t>>(d.num_states()),
                std::vector<bool>(d.num_states(), false)};
  const auto letters = d.admissible_symbols();
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    if (d.is_accepting(q)) {
      g.self_loop[q] = true;
      continue;
    }
    for (Symbol s : letters) {
      const std::size_t q2 = d.next(q, s);
      if (q2 == q) g.self_loop[q] = true;
      else g.succ[q].insert(q2);
    }
  }
  return g;
}

// Edge (q, q') iff guard(q, q') is nonempty.
inline CausalGraph causal_graph(const Dfa& d, const LabeledMdp& m) {
  if (!(m.ap() == d.propositions())) {
    throw AlphabetMismatch("MDP and DFA use different atomic propositions");
  }
  CausalGraph g{std::vector<std::set<std::size_t>>(d.num_states()),
                std::vector<bool>(d.num_states(), false)};
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    if (d.is_accepting(q)) {
      g.self_loop[q] = true;
      continue;
    }
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      for (std::size_t a = 0; a < m.num_actions(); ++a) {
        for (const auto& o : m.dist(s, a)) {
          if (o.prob <= 0.0) continue;
          const std::size_t q2 = d.next(q, m.label(o.next));
          if (q2 == q) g.self_loop[q] = true;
          else g.succ[q].insert(q2);
        }
      }
    }
  }
  return g;
}

using MetaMode = std::vector<std::size_t>;  // sorted members

// Kosaraju-Sharir. Modes are returned ordered by their smallest member.
inline std::vector<MetaMode> meta_modes(const CausalGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t q = 0; q < n; ++q) {
    for (auto q2 : g.succ[q]) pred[q2].push_back(q);
  }

  // First pass: finishing order, iterative DFS.
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> finish;
  for (std::size_t root = 0; root < n; ++root) {
    if (seen[root]) continue;
    std::vector<std::pair<std::size_t, std::set<std::size_t>::const_iterator>> stack;
    seen[root] = true;
    stack.emplace_back(root, g.succ[root].begin());
    while (!stack.empty()) {
      auto& [v, it] = stack.back();
      if (it == g.succ[v].end()) {
        finish.push_back(v);
        stack.pop_back();
        continue;
      }
      const std::size_t w = *it++;
      if (!seen[w]) {
        seen[w] = true;
        stack.emplace_back(w, g.succ[w].begin());
      }
    }
  }

  // Second pass on the transpose in reverse finishing order.
  std::vector<int> comp(n, -1);
  std::vector<MetaMode> modes;
  for (auto it = finish.rbegin(); it != finish.rend(); ++it) {
    if (comp[*it] >= 0) continue;
    MetaMode mode;
    std::vector<std::size_t> stack{*it};
    comp[*it] = static_cast<int>(modes.size());
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      mode.push_back(v);
      for (auto w : pred[v]) {
        if (comp[w] < 0) {
          comp[w] = static_cast<int>(modes.size());
          stack.push_back(w);
        }
      }
    }
    std::sort(mode.begin(), mode.end());
    modes.push_back(std::move(mode));
  }
  std::sort(modes.begin(), modes.end(), [](const MetaMode& a, const MetaMode& b) { return a[0] < b[0]; });
  return modes;
}

struct LevelPartition {
  std::vector<MetaMode> modes;
  std::vector<std::vector<std::size_t>> levels;  // mode indices per level, level 0 first
  std::vector<bool> repaired;  // per mode: placed in L0 only because it has no out-edges

  std::size_t num_levels() const { return levels.size(); }

  // Automaton states of level i, ascending.
  std::vector<std::size_t> states(std::size_t level) const {
    std::vector<std::size_t> out;
    for (auto m : levels.at(level)) out.insert(out.end(), modes[m].begin(), modes[m].end());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::optional<std::size_t> level_of(std::size_t q) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      for (auto m : levels[i]) {
        if (std::binary_search(modes[m].begin(), modes[m].end(), q)) return i;
      }
    }
    return std::nullopt;
  }
};

inline LevelPartition level_sets(const std::vector<MetaMode>& modes, const CausalGraph& g,
                                 const Dfa& d) {
  const std::size_t n = modes.size();
  std::vector<std::size_t> mode_of(g.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto q : modes[i]) mode_of.at(q) = i;
  }
  if (std::find(mode_of.begin(), mode_of.end(), n) != mode_of.end()) {
    throw InputError("meta-modes do not cover every automaton state");
  }
  std::vector<std::set<std::size_t>> out(n);
  for (std::size_t q = 0; q < g.size(); ++q) {
    for (auto q2 : g.succ[q]) {
      if (mode_of[q] != mode_of[q2]) out[mode_of[q]].insert(mode_of[q2]);
    }
  }

  LevelPartition p;
  p.modes = modes;
  p.repaired.assign(n, false);
  std::vector<int> level(n, -1);
  std::vector<std::size_t> l0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool final_or_sink = std::any_of(modes[i].begin(), modes[i].end(), [&](std::size_t q) {
      return d.is_accepting(q) || d.is_sink(q);
    });
    if (final_or_sink || out[i].empty()) {
      l0.push_back(i);
      level[i] = 0;
      p.repaired[i] = !final_or_sink;
    }
  }
  p.levels.push_back(l0);

  std::size_t assigned = l0.size();
  while (assigned < n) {
    const int prev = static_cast<int>(p.levels.size()) - 1;
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < n; ++i) {
      if (level[i] >= 0) continue;
      bool ready = true, touches_prev = false;
      for (auto j : out[i]) {
        if (level[j] < 0) ready = false;
        else if (level[j] == prev) touches_prev = true;
      }
      if (ready && touches_prev) next.push_back(i);
    }
    if (next.empty()) {
      std::string left;
      for (std::size_t i = 0; i < n; ++i) {
        if (level[i] < 0) {
          left += " {";
          for (std::size_t k = 0; k < modes[i].size(); ++k) left += (k ? "," : "") + Dfa::name(modes[i][k]);
          left += "}";
        }
      }
      throw Unlevelable("meta-modes cannot be assigned a level:" + left);
    }
    for (auto i : next) level[i] = prev + 1;
    assigned += next.size();
    p.levels.push_back(std::move(next));
  }
  return p;
}

inline LevelPartition decompose(const Dfa& d) {
  const auto g = causal_graph(d);
  return level_sets(meta_modes(g), g, d);
}

inline LevelPartition decompose(const Dfa& d, const LabeledMdp& m) {
  const auto g = causal_graph(d, m);
  return level_sets(meta_modes(g), g, d);
}

// Everything in one level above L0; the baseline without topological order.
inline LevelPartition flat_partition(const LevelPartition& p) {
  LevelPartition out = p;
  if (p.levels.size() <= 1) return out;
  out.levels.resize(2);
  out.levels[1].clear();
  for (std::size_t i = 1; i < p.levels.size(); ++i) {
    out.levels[1].insert(out.levels[1].end(), p.levels[i].begin(), p.levels[i].end());
  }
  std::sort(out.levels[1].begin(), out.levels[1].end());
  return out;
}

// Runs solve_level(i, states_of_level_i) for i = 1..n in order, tagging any
// failure with its level.
template <class LevelSolver>
void solve_by_levels(const LevelPartition& p, LevelSolver&& solve_level) {
  for (std::size_t i = 1; i < p.num_levels(); ++i) {
    try {
      solve_level(i, p.states(i));
    } catch (const LevelError&) {
      throw;
    } catch (const NumericalError& e) {
      throw LevelError(i, e.what(), true);
    } catch (const Error& e) {
      throw LevelError(i, e.what(), false);
    }
  }
}

inline nlohmann::json to_json(const LevelPartition& p) {
  using nlohmann::json;
  json out = json::array();
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    json modes = json::array();
    json repaired = json::array();
    for (auto m : p.levels[i]) {
      json names = json::array();
      for (auto q : p.modes[m]) names.push_back(Dfa::name(q));
      modes.push_back(names);
      if (p.repaired[m]) repaired.push_back(names);
    }
    json level = {{"level", i}, {"modes", modes}};
    if (!repaired.empty()) {
      level["repaired"] = true;
      level["repaired_modes"] = repaired;
    }
    out.push_back(level);
  }
  return out;
}

// Quotient DAG, one cluster per level.
inline std::string to_dot(const LevelPartition& p, const CausalGraph& g) {
  std::vector<std::size_t> mode_of(g.size(), 0);
  for (std::size_t i = 0; i < p.modes.size(); ++i) {
    for (auto q : p.modes[i]) mode_of[q] = i;
  }
  auto mode_name = [&](std::size_t i) {
    std::string s = "X" + std::to_string(i);
    return s;
  };
  std::string out = "digraph levels {\n  rankdir=RL;\n";
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    out += "  subgraph cluster_L" + std::to_string(l) + " {\n    label=\"L" + std::to_string(l) + "\";\n";
    for (auto m : p.levels[l]) {
      std::string members;
      for (std::size_t k = 0; k < p.modes[m].size(); ++k) members += (k ? "," : "") + Dfa::name(p.modes[m][k]);
      out += "    " + mode_name(m) + " [label=\"{" + members + "}\"" +
             (p.repaired[m] ? ", style=dashed" : "") + "];\n";
    }
    out += "  }\n";
  }
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t q = 0; q < g.size(); ++q) {
    for (auto q2 : g.succ[q]) {
      if (mode_of[q] != mode_of[q2]) edges.emplace(mode_of[q], mode_of[q2]);
    }
  }
  for (auto [a, b] : edges) out += "  " + mode_name(a) + " -> " + mode_name(b) + ";\n";
  return out + "}\n";
}

}  // namespace tsynth
