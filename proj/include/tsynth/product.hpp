#pragma once

// Product of a labeled MDP (or a sample-only environment) with a DFA.

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/mdp.hpp"
#include "tsynth/scltl.hpp"

namespace tsynth {

// Explicit product over Z = S x Q, indexed z = s*|Q| + q. Final states are
// absorbing and the reward of (z, a) is the probability of entering F̄.
class ProductMdp {
 public:
  ProductMdp(const LabeledMdp& m, const Dfa& d, double gamma)
      : ns_(m.num_states()), nq_(d.num_states()), na_(m.num_actions()), gamma_(gamma) {
    if (!(m.ap() == d.propositions())) {
      throw AlphabetMismatch("MDP and DFA use different atomic propositions");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("discount must lie in [0, 1)");
    const std::size_t nz = ns_ * nq_;
    final_.assign(nz, false);
    sink_.assign(nz, false);
    for (std::size_t s = 0; s < ns_; ++s) {
      for (std::size_t q = 0; q < nq_; ++q) {
        final_[index(s, q)] = d.is_accepting(q);
        sink_[index(s, q)] = d.is_sink(q);
      }
    }
    delta_.resize(nz * na_);
    reward_.assign(nz * na_, 0.0);
    for (std::size_t s = 0; s < ns_; ++s) {
      for (std::size_t q = 0; q < nq_; ++q) {
        const std::size_t z = index(s, q);
        for (std::size_t a = 0; a < na_; ++a) {
          auto& row = delta_[z * na_ + a];
          if (final_[z]) {
            row.push_back({z, 1.0});
            continue;
          }
          double r = 0.0;
          for (const auto& o : m.dist(s, a)) {
            if (o.prob == 0.0) continue;
            const std::size_t z2 = index(o.next, d.next(q, m.label(o.next)));
            row.push_back({z2, o.prob});
            if (final_[z2]) r += o.prob;
          }
          reward_[z * na_ + a] = r;
        }
      }
    }
    initial_ = index(m.initial(), d.next(d.initial(), m.label(m.initial())));
    for (const auto& n : m.state_names()) state_names_.push_back(n);
    action_names_ = m.action_names();
  }

  std::size_t num_mdp_states() const { return ns_; }
  std::size_t num_dfa_states() const { return nq_; }
  std::size_t num_states() const { return ns_ * nq_; }
  std::size_t num_actions() const { return na_; }
  double gamma() const { return gamma_; }
  std::size_t index(std::size_t s, std::size_t q) const { return s * nq_ + q; }
  std::size_t s_of(std::size_t z) const { return z / nq_; }
  std::size_t q_of(std::size_t z) const { return z % nq_; }
  std::size_t initial() const { return initial_; }
  bool is_final(std::size_t z) const { return final_[z]; }
  bool is_sink(std::size_t z) const { return sink_[z]; }
  const Distribution& dist(std::size_t z, std::size_t a) const { return delta_[z * na_ + a]; }
  double reward(std::size_t z, std::size_t a) const { return reward_[z * na_ + a]; }
  double prob(std::size_t z, std::size_t a, std::size_t z2) const {
    double p = 0.0;
    for (const auto& o : dist(z, a)) {
      if (o.next == z2) p += o.prob;
    }
    return p;
  }

  std::string state_name(std::size_t z) const {
    return "(" + state_names_[s_of(z)] + "," + Dfa::name(q_of(z)) + ")";
  }
  const std::vector<std::string>& action_names() const { return action_names_; }
  const std::vector<std::string>& mdp_state_names() const { return state_names_; }

 private:
  std::size_t ns_, nq_, na_;
  double gamma_;
  std::vector<Distribution> delta_;
  std::vector<double> reward_;
  std::vector<bool> final_;
  std::vector<bool> sink_;
  std::size_t initial_ = 0;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
};

inline ProductMdp build_product(const LabeledMdp& m, const Dfa& d, double gamma) {
  return ProductMdp(m, d, gamma);
}

// Which MDP states the set operations range over: every s, or only those s
// for which (s, q) is reachable from the product's initial state.
enum class Scope { All, Reachable };

// reachable[s * |Q| + q] for the product started at (s0, δ(ι, L(s0))).
inline std::vector<bool> reachable_pairs(const LabeledMdp& m, const Dfa& d) {
  const std::size_t nq = d.num_states();
  std::vector<bool> seen(m.num_states() * nq, false);
  const std::size_t z0 = m.initial() * nq + d.next(d.initial(), m.label(m.initial()));
  std::vector<std::size_t> stack{z0};
  seen[z0] = true;
  while (!stack.empty()) {
    const std::size_t z = stack.back();
    stack.pop_back();
    const std::size_t s = z / nq, q = z % nq;
    if (d.is_accepting(q)) continue;
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      for (const auto& o : m.dist(s, a)) {
        if (o.prob <= 0.0) continue;
        const std::size_t z2 = o.next * nq + d.next(q, m.label(o.next));
        if (!seen[z2]) {
          seen[z2] = true;
          stack.push_back(z2);
        }
      }
    }
  }
  return seen;
}

// States from which q can never be left.
inline std::set<std::size_t> invariant_set(const Dfa& d, std::size_t q, const LabeledMdp& m,
                                           Scope scope = Scope::All) {
  std::vector<bool> reach;
  if (scope == Scope::Reachable) reach = reachable_pairs(m, d);
  std::set<std::size_t> out;
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    if (scope == Scope::Reachable && !reach[s * d.num_states() + q]) continue;
    bool stays = true;
    for (std::size_t a = 0; a < m.num_actions() && stays; ++a) {
      for (const auto& o : m.dist(s, a)) {
        if (o.prob > 0.0 && d.next(q, m.label(o.next)) != q) {
          stays = false;
          break;
        }
      }
    }
    if (stays) out.insert(s);
  }
  return out;
}

// States from which some action reaches a state whose label moves q to q2.
inline std::set<std::size_t> guard_set(const Dfa& d, std::size_t q, std::size_t q2,
                                       const LabeledMdp& m, Scope scope = Scope::All) {
  std::vector<bool> reach;
  if (scope == Scope::Reachable) reach = reachable_pairs(m, d);
  std::set<std::size_t> out;
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    if (scope == Scope::Reachable && !reach[s * d.num_states() + q]) continue;
    bool hit = false;
    for (std::size_t a = 0; a < m.num_actions() && !hit; ++a) {
      for (const auto& o : m.dist(s, a)) {
        if (o.prob > 0.0 && d.next(q, m.label(o.next)) == q2) {
          hit = true;
          break;
        }
      }
    }
    if (hit) out.insert(s);
  }
  return out;
}

inline nlohmann::json to_json(const ProductMdp& p) {
  using nlohmann::json;
  json j;
  json states = json::array();
  json annot = json::array();
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    states.push_back(p.state_name(z));
    annot.push_back({{"state", p.state_name(z)},
                     {"s", p.mdp_state_names()[p.s_of(z)]},
                     {"q", Dfa::name(p.q_of(z))},
                     {"final", p.is_final(z)}});
  }
  j["states"] = states;
  j["actions"] = p.action_names();
  j["s0"] = p.state_name(p.initial());
  j["gamma"] = p.gamma();
  json rows = json::array();
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    for (std::size_t a = 0; a < p.num_actions(); ++a) {
      json dist = json::object();
      for (const auto& o : p.dist(z, a)) dist[p.state_name(o.next)] = o.prob;
      rows.push_back({{"s", p.state_name(z)},
                      {"a", p.action_names()[a]},
                      {"dist", dist},
                      {"reward", p.reward(z, a)}});
    }
  }
  j["p"] = rows;
  j["product"] = annot;
  return j;
}

// ---------------------------------------------------------------------------
// On-the-fly product over a sample-only environment. The state vector is the
// environment state with the automaton state appended as the last component.

struct ProductTransition {
  const StateVec& state;  // environment part of the source state
  std::size_t q;
  const StepResult& base;  // raw environment step
  std::size_t q_next;
  bool accepted;  // q ∉ F and q_next ∈ F
};

// Replaces the indicator reward. Receives the raw environment step.
using RewardShaper = std::function<double(const ProductTransition&)>;

class ProductEnvironment : public Environment {
 public:
  ProductEnvironment(std::shared_ptr<Environment> env, Dfa dfa, RewardShaper shaper = {})
      : env_(std::move(env)), dfa_(std::move(dfa)), shaper_(std::move(shaper)) {
    if (!(env_->propositions() == dfa_.propositions())) {
      throw AlphabetMismatch("environment and DFA use different atomic propositions");
    }
  }

  const Dfa& dfa() const { return dfa_; }
  Environment& base() { return *env_; }
  const Environment& base() const { return *env_; }

  static std::size_t q_of(const StateVec& z) { return static_cast<std::size_t>(z.back()); }
  static StateVec s_of(const StateVec& z) { return StateVec(z.begin(), z.end() - 1); }
  static StateVec join(StateVec s, std::size_t q) {
    s.push_back(static_cast<double>(q));
    return s;
  }

  // q ∈ F or the sink: the episode is over.
  bool finished(std::size_t q) const { return dfa_.is_accepting(q) || dfa_.is_sink(q); }

  StateVec reset(Rng& rng) override {
    StateVec s = env_->reset(rng);
    const std::size_t q = dfa_.next(dfa_.initial(), env_->label(s));
    return join(std::move(s), q);
  }

  StepResult step(const StateVec& z, std::size_t action, Rng& rng) override {
    const std::size_t q = q_of(z);
    if (q >= dfa_.num_states()) throw UnknownAutomatonState(q);
    if (finished(q)) throw SteppedAfterDone();
    const StateVec s = s_of(z);
    StepResult base = env_->step(s, action, rng);
    const std::size_t q2 = dfa_.next(q, base.label);
    const bool accepted = dfa_.is_accepting(q2);
    StepResult r;
    r.label = base.label;
    r.reward = shaper_ ? shaper_(ProductTransition{s, q, base, q2, accepted}) : (accepted ? 1.0 : 0.0);
    r.terminal = base.terminal || finished(q2);
    r.truncated = base.truncated;
    r.state = join(std::move(base.state), q2);
    return r;
  }

  Symbol label(const StateVec& z) const override { return env_->label(s_of(z)); }
  std::size_t action_count() const override { return env_->action_count(); }
  std::size_t state_dimension() const override { return env_->state_dimension() + 1; }
  const PropositionSet& propositions() const override { return dfa_.propositions(); }
  std::size_t max_episode_steps() const override { return env_->max_episode_steps(); }
  bool generative() const override { return env_->generative(); }
  StateVec sample_state(Rng& rng) override {
    StateVec s = env_->sample_state(rng);
    const std::size_t q = dfa_.next(dfa_.initial(), env_->label(s));
    return join(std::move(s), q);
  }

  // Environment state s paired with an explicit automaton state.
  StateVec sample_state_in(std::size_t q, Rng& rng) { return join(env_->sample_state(rng), q); }

 private:
  std::shared_ptr<Environment> env_;
  Dfa dfa_;
  RewardShaper shaper_;
};

// One non-accepting state looping on every letter: lets plain episodic tasks
// run through the product machinery with q fixed at 0.
inline Dfa single_mode_dfa(const PropositionSet& props) {
  return Dfa(props, 1, std::vector<std::size_t>(props.alphabet_size(), 0), 0, {false},
             std::nullopt);
}

// Passes the environment's own reward through unchanged.
inline double environment_reward(const ProductTransition& t) { return t.base.reward; }

}  // namespace tsynth
