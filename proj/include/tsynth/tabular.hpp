#pragma once

// Mellowmax value iteration on explicit product MDPs and softmax policy
// extraction.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/product.hpp"
#include "tsynth/topo.hpp"

namespace tsynth {

using ValueTable = std::vector<double>;  // indexed by product state z
using PolicyTable = std::vector<std::vector<double>>;

struct SolverConfig {
  double tau = 1e-6;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100'000;
};

inline void validate(const SolverConfig& c) {
  if (!(c.tau > 0.0)) throw InputError("temperature must be positive");
  if (!(c.tolerance > 0.0)) throw InputError("tolerance must be positive");
  if (c.max_iterations == 0) throw InputError("max_iterations must be positive");
}

// tau * log sum_a exp(q_a / tau), shifted by the max for stability.
inline double mellowmax(std::span<const double> q, double tau) {
  const double m = *std::max_element(q.begin(), q.end());
  double sum = 0.0;
  for (double x : q) sum += std::exp((x - m) / tau);
  return m + tau * std::log(sum);
}

inline std::vector<double> softmax(std::span<const double> q, double tau) {
  const double m = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sum += p[i] = std::exp((q[i] - m) / tau);
  for (auto& x : p) x /= sum;
  return p;
}

inline double q_value(const ProductMdp& p, const ValueTable& v, std::size_t z, std::size_t a) {
  double e = 0.0;
  for (const auto& o : p.dist(z, a)) e += o.prob * v[o.next];
  return p.reward(z, a) + p.gamma() * e;
}

inline std::vector<double> q_values(const ProductMdp& p, const ValueTable& v, std::size_t z) {
  std::vector<double> q(p.num_actions());
  for (std::size_t a = 0; a < q.size(); ++a) q[a] = q_value(p, v, z, a);
  return q;
}

// Product states whose value is 0 regardless of policy: F̄, the sink, and
// every state with no path into F̄.
inline std::vector<bool> zero_set(const ProductMdp& p) {
  const std::size_t n = p.num_states();
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t z = 0; z < n; ++z) {
    if (p.is_final(z)) continue;
    for (std::size_t a = 0; a < p.num_actions(); ++a) {
      for (const auto& o : p.dist(z, a)) {
        if (o.prob > 0.0) pred[o.next].push_back(z);
      }
    }
  }
  std::vector<bool> reaches(n, false);
  std::deque<std::size_t> queue;
  for (std::size_t z = 0; z < n; ++z) {
    if (p.is_final(z)) {
      reaches[z] = true;
      queue.push_back(z);
    }
  }
  while (!queue.empty()) {
    const std::size_t z = queue.front();
    queue.pop_front();
    for (auto y : pred[z]) {
      if (!reaches[y]) {
        reaches[y] = true;
        queue.push_back(y);
      }
    }
  }
  std::vector<bool> zero(n);
  for (std::size_t z = 0; z < n; ++z) zero[z] = p.is_final(z) || p.is_sink(z) || !reaches[z];
  return zero;
}

// One synchronous sweep over the active states; all others are copied.
inline ValueTable mellowmax_backup(const ValueTable& v, const ProductMdp& p, const SolverConfig& cfg,
                                   const std::vector<bool>& active) {
  ValueTable out = v;
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    if (active[z]) out[z] = mellowmax(q_values(p, v, z), cfg.tau);
  }
  return out;
}

inline ValueTable mellowmax_backup(const ValueTable& v, const ProductMdp& p, const SolverConfig& cfg) {
  const auto zero = zero_set(p);
  std::vector<bool> active(zero.size());
  for (std::size_t z = 0; z < zero.size(); ++z) active[z] = !zero[z];
  return mellowmax_backup(v, p, cfg, active);
}

inline double sup_distance(const ValueTable& a, const ValueTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Iterates the backup on `active` until the sup-norm change drops below the
// tolerance. Inactive entries of `start` are treated as frozen.
inline ValueTable value_iteration(const ProductMdp& p, ValueTable start, const std::vector<bool>& active,
                                  const SolverConfig& cfg) {
  validate(cfg);
  if (start.size() != p.num_states() || active.size() != p.num_states()) {
    throw ShapeMismatch("value table size does not match the product");
  }
  if (std::none_of(active.begin(), active.end(), [](bool b) { return b; })) return start;
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    ValueTable next = mellowmax_backup(start, p, cfg, active);
    delta = sup_distance(next, start);
    start = std::move(next);
    if (!std::isfinite(delta)) break;
    if (delta < cfg.tolerance) return start;
  }
  throw NoConvergence(cfg.max_iterations, delta);
}

// Whole-product solve.
inline ValueTable value_iteration(const ProductMdp& p, const SolverConfig& cfg) {
  const auto zero = zero_set(p);
  std::vector<bool> active(zero.size());
  for (std::size_t z = 0; z < zero.size(); ++z) active[z] = !zero[z];
  return value_iteration(p, ValueTable(p.num_states(), 0.0), active, cfg);
}

// Level-by-level solve; each level sees the converged values of lower levels.
inline ValueTable solve_topological(const ProductMdp& p, const LevelPartition& part,
                                    const SolverConfig& cfg) {
  const auto zero = zero_set(p);
  ValueTable v(p.num_states(), 0.0);
  solve_by_levels(part, [&](std::size_t, const std::vector<std::size_t>& qs) {
    std::vector<bool> active(p.num_states(), false);
    for (std::size_t s = 0; s < p.num_mdp_states(); ++s) {
      for (auto q : qs) {
        const auto z = p.index(s, q);
        active[z] = !zero[z];
      }
    }
    v = value_iteration(p, std::move(v), active, cfg);
  });
  return v;
}

// pi(a|z) = exp((Q(z,a) - V(z)) / tau) with V(z) = mm_a Q(z,a), which is the
// fixed-point identity and keeps every row normalized.
inline PolicyTable extract_policy(const ValueTable& v, const ProductMdp& p, const SolverConfig& cfg) {
  PolicyTable pi(p.num_states());
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    const auto q = q_values(p, v, z);
    const double mm = mellowmax(q, cfg.tau);
    auto& row = pi[z];
    row.resize(q.size());
    double sum = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) sum += row[a] = std::exp((q[a] - mm) / cfg.tau);
    for (auto& x : row) x /= sum;
  }
  return pi;
}

inline std::string values_csv(const ValueTable& v, const ProductMdp& p) {
  std::ostringstream os;
  os.precision(12);
  os << "s,q,value\n";
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    os << p.mdp_state_names()[p.s_of(z)] << "," << Dfa::name(p.q_of(z)) << "," << std::fixed << v[z]
       << "\n";
  }
  return os.str();
}

inline nlohmann::json values_json(const ValueTable& v, const ProductMdp& p) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    j.push_back({{"s", p.mdp_state_names()[p.s_of(z)]}, {"q", Dfa::name(p.q_of(z))}, {"value", v[z]}});
  }
  return j;
}

inline nlohmann::json policy_json(const PolicyTable& pi, const ProductMdp& p) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    nlohmann::json probs = nlohmann::json::object();
    for (std::size_t a = 0; a < p.num_actions(); ++a) probs[p.action_names()[a]] = pi[z][a];
    j.push_back({{"s", p.mdp_state_names()[p.s_of(z)]}, {"q", Dfa::name(p.q_of(z))}, {"pi", probs}});
  }
  return j;
}

}  // namespace tsynth
