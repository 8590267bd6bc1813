#pragma once

// Labeled MDPs (explicit, tabular), the sample-only Environment interface,
// policies and trajectory sampling.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/scltl.hpp"

namespace tsynth {

using Rng = std::mt19937_64;
using StateVec = std::vector<double>;

// Sparse probability row.
struct Outcome {
  std::size_t next;
  double prob;
};
using Distribution = std::vector<Outcome>;

class LabeledMdp {
 public:
  LabeledMdp(PropositionSet ap, std::vector<std::string> states, std::vector<std::string> actions,
             std::vector<Distribution> transitions, std::size_t initial, std::vector<Symbol> labels)
      : ap_(std::move(ap)),
        states_(std::move(states)),
        actions_(std::move(actions)),
        p_(std::move(transitions)),
        s0_(initial),
        labels_(std::move(labels)) {
    if (states_.empty()) throw InputError("MDP needs at least one state");
    if (actions_.empty()) throw InputError("MDP needs at least one action");
    if (p_.size() != states_.size() * actions_.size()) {
      throw InputError("MDP transition table must have |S|*|A| rows");
    }
    if (labels_.size() != states_.size()) throw InputError("MDP needs one label per state");
    if (s0_ >= states_.size()) throw InputError("MDP initial state out of range");
    for (const auto& row : p_) {
      for (const auto& o : row) {
        if (o.next >= states_.size()) throw InputError("MDP transition targets unknown state");
      }
    }
  }

  const PropositionSet& ap() const { return ap_; }
  std::size_t num_states() const { return states_.size(); }
  std::size_t num_actions() const { return actions_.size(); }
  const std::vector<std::string>& state_names() const { return states_; }
  const std::vector<std::string>& action_names() const { return actions_; }
  const Distribution& dist(std::size_t s, std::size_t a) const { return p_[s * actions_.size() + a]; }
  double prob(std::size_t s, std::size_t a, std::size_t s2) const {
    double p = 0.0;
    for (const auto& o : dist(s, a)) {
      if (o.next == s2) p += o.prob;
    }
    return p;
  }
  std::size_t initial() const { return s0_; }
  Symbol label(std::size_t s) const { return labels_[s]; }
  const std::vector<Symbol>& labels() const { return labels_; }

  std::size_t state_index(const std::string& name) const {
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i] == name) return i;
    }
    throw InputError("unknown MDP state '" + name + "'");
  }

 private:
  PropositionSet ap_;
  std::vector<std::string> states_;
  std::vector<std::string> actions_;
  std::vector<Distribution> p_;
  std::size_t s0_;
  std::vector<Symbol> labels_;
};

struct RowSum {
  std::size_t s, a;
  double sum;
};
struct BadProbability {
  std::size_t s, a;
  double value;
};
struct BadLabel {
  std::size_t s;
};
using Violation = std::variant<RowSum, BadProbability, BadLabel>;

inline std::string describe(const Violation& v) {
  struct {
    std::string operator()(const RowSum& r) const {
      return "row (s" + std::to_string(r.s) + ", a" + std::to_string(r.a) + ") sums to " +
             std::to_string(r.sum);
    }
    std::string operator()(const BadProbability& b) const {
      return "row (s" + std::to_string(b.s) + ", a" + std::to_string(b.a) +
             ") has probability " + std::to_string(b.value) + " outside [0,1]";
    }
    std::string operator()(const BadLabel& b) const {
      return "label of s" + std::to_string(b.s) + " is not a subset of AP";
    }
  } visitor;
  return std::visit(visitor, v);
}

inline std::vector<Violation> validate_mdp(const LabeledMdp& m) {
  std::vector<Violation> out;
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      double sum = 0.0;
      for (const auto& o : m.dist(s, a)) {
        if (!(o.prob >= 0.0 && o.prob <= 1.0)) out.push_back(BadProbability{s, a, o.prob});
        sum += o.prob;
      }
      if (!(std::abs(sum - 1.0) <= 1e-9)) out.push_back(RowSum{s, a, sum});
    }
    if (!m.ap().contains(m.label(s))) out.push_back(BadLabel{s});
  }
  return out;
}

inline std::size_t sample_index(const Distribution& d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (const auto& o : d) {
    x -= o.prob;
    if (x < 0.0) return o.next;
  }
  return d.back().next;
}

// ---------------------------------------------------------------------------
// Sample-only environments.

struct StepResult {
  StateVec state;
  Symbol label = 0;
  double reward = 0.0;
  bool terminal = false;  // absorbing: no bootstrapping past this step
  bool truncated = false;  // time limit: the state is not absorbing
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual StateVec reset(Rng& rng) = 0;
  virtual StepResult step(const StateVec& state, std::size_t action, Rng& rng) = 0;
  virtual Symbol label(const StateVec& state) const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t state_dimension() const = 0;
  virtual const PropositionSet& propositions() const = 0;
  virtual std::size_t max_episode_steps() const = 0;

  // True when step() may be called from any state, not just visited ones.
  virtual bool generative() const { return false; }

  // A random state from the region of interest, used to start episodes in
  // automaton states that the initial distribution never visits directly.
  virtual StateVec sample_state(Rng& rng) { return reset(rng); }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<double> probs(const StateVec& state) const = 0;

  double prob(std::size_t a, const StateVec& state) const { return probs(state).at(a); }

  std::size_t sample(const StateVec& state, Rng& rng) const {
    const auto p = probs(state);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    for (std::size_t a = 0; a < p.size(); ++a) {
      x -= p[a];
      if (x < 0.0) return a;
    }
    return p.size() - 1;
  }
};

class UniformPolicy : public Policy {
 public:
  explicit UniformPolicy(std::size_t actions) : n_(actions) {}
  std::vector<double> probs(const StateVec&) const override {
    return std::vector<double>(n_, 1.0 / static_cast<double>(n_));
  }

 private:
  std::size_t n_;
};

// Policy given as a table over integer-coded states (state[0] is the index).
class TablePolicy : public Policy {
 public:
  explicit TablePolicy(std::vector<std::vector<double>> table) : table_(std::move(table)) {}
  std::vector<double> probs(const StateVec& s) const override {
    return table_.at(static_cast<std::size_t>(s.at(0)));
  }

 private:
  std::vector<std::vector<double>> table_;
};

struct Path {
  std::vector<StateVec> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<Symbol> labels;  // one per state
  bool terminated = false;

  std::size_t steps() const { return actions.size(); }
};

inline Path sample_path(Environment& env, const Policy& pi, std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw InputError("path horizon must be positive");
  Path p;
  StateVec s = env.reset(rng);
  p.states.push_back(s);
  p.labels.push_back(env.label(s));
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = pi.sample(s, rng);
    StepResult r = env.step(s, a, rng);
    p.actions.push_back(a);
    p.rewards.push_back(r.reward);
    p.states.push_back(r.state);
    p.labels.push_back(r.label);
    s = std::move(r.state);
    if (r.terminal || r.truncated) {
      p.terminated = r.terminal;
      break;
    }
  }
  return p;
}

inline std::vector<Symbol> label_word(const Path& p) { return p.labels; }

// Environment view of a LabeledMdp; the state vector holds the state index.
class TabularEnvironment : public Environment {
 public:
  explicit TabularEnvironment(LabeledMdp m, std::size_t max_steps = 1000)
      : m_(std::move(m)), max_steps_(max_steps) {}

  const LabeledMdp& mdp() const { return m_; }

  StateVec reset(Rng&) override { return {static_cast<double>(m_.initial())}; }
  StepResult step(const StateVec& state, std::size_t action, Rng& rng) override {
    const auto s = index(state);
    if (action >= m_.num_actions()) throw InputError("action out of range");
    const std::size_t s2 = sample_index(m_.dist(s, action), rng);
    StepResult r;
    r.state = {static_cast<double>(s2)};
    r.label = m_.label(s2);
    return r;
  }
  Symbol label(const StateVec& state) const override { return m_.label(index(state)); }
  std::size_t action_count() const override { return m_.num_actions(); }
  std::size_t state_dimension() const override { return 1; }
  const PropositionSet& propositions() const override { return m_.ap(); }
  std::size_t max_episode_steps() const override { return max_steps_; }
  bool generative() const override { return true; }
  StateVec sample_state(Rng& rng) override {
    std::uniform_int_distribution<std::size_t> u(0, m_.num_states() - 1);
    return {static_cast<double>(u(rng))};
  }

 private:
  std::size_t index(const StateVec& state) const {
    const auto s = static_cast<std::size_t>(state.at(0));
    if (s >= m_.num_states()) throw InputError("tabular state out of range");
    return s;
  }

  LabeledMdp m_;
  std::size_t max_steps_;
};

// ---------------------------------------------------------------------------
// JSON: {states, actions, p:[{s,a,dist:{s':p}}], s0, labels:{s:[props]}, ap}

inline nlohmann::json to_json(const LabeledMdp& m) {
  using nlohmann::json;
  json j;
  j["states"] = m.state_names();
  j["actions"] = m.action_names();
  j["ap"] = m.ap().names();
  j["s0"] = m.state_names()[m.initial()];
  json p = json::array();
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      json dist = json::object();
      for (const auto& o : m.dist(s, a)) dist[m.state_names()[o.next]] = o.prob;
      p.push_back({{"s", m.state_names()[s]}, {"a", m.action_names()[a]}, {"dist", dist}});
    }
  }
  j["p"] = p;
  json labels = json::object();
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    labels[m.state_names()[s]] = m.ap().members(m.label(s));
  }
  j["labels"] = labels;
  return j;
}

inline LabeledMdp mdp_from_json(const nlohmann::json& j) {
  try {
    PropositionSet ap(j.at("ap").get<std::vector<std::string>>());
    auto states = j.at("states").get<std::vector<std::string>>();
    auto actions = j.at("actions").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::size_t> sid, aid;
    for (std::size_t i = 0; i < states.size(); ++i) sid[states[i]] = i;
    for (std::size_t i = 0; i < actions.size(); ++i) aid[actions[i]] = i;
    auto find = [](const auto& map, const std::string& key, const char* what) {
      auto it = map.find(key);
      if (it == map.end()) throw InputError(std::string("unknown ") + what + " '" + key + "'");
      return it->second;
    };
    std::vector<Distribution> p(states.size() * actions.size());
    std::vector<bool> seen(p.size(), false);
    for (const auto& row : j.at("p")) {
      const auto s = find(sid, row.at("s").get<std::string>(), "state");
      const auto a = find(aid, row.at("a").get<std::string>(), "action");
      const auto idx = s * actions.size() + a;
      if (seen[idx]) throw InputError("duplicate transition row for (" + states[s] + ", " + actions[a] + ")");
      seen[idx] = true;
      for (const auto& [name, prob] : row.at("dist").items()) {
        p[idx].push_back({find(sid, name, "state"), prob.get<double>()});
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) {
        throw InputError("missing transition row for (" + states[i / actions.size()] + ", " +
                         actions[i % actions.size()] + ")");
      }
    }
    std::vector<Symbol> labels(states.size(), 0);
    if (j.contains("labels")) {
      for (const auto& [name, props] : j.at("labels").items()) {
        labels[find(sid, name, "state")] = ap.symbol(props.get<std::vector<std::string>>());
      }
    }
    const auto s0 = find(sid, j.at("s0").get<std::string>(), "state");
    return LabeledMdp(std::move(ap), std::move(states), std::move(actions), std::move(p), s0,
                      std::move(labels));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed MDP document: ") + e.what());
  }
}

}  // namespace tsynth
