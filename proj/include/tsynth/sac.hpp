#pragma once

// Sequential actor-critic: augmented-Lagrangian critic, path-consistency
// actor, replay of contiguous windows, dual updates and the level driver.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/approx.hpp"
#include "tsynth/errors.hpp"
#include "tsynth/product.hpp"
#include "tsynth/tabular.hpp"
#include "tsynth/topo.hpp"

namespace tsynth {

inline double h(double x) { return x > 0.0 ? x * x : 0.0; }
inline double h_prime(double x) { return x > 0.0 ? 2.0 * x : 0.0; }

enum class Estimator { SingleSample, Generative };
enum class ActorGradient { Exact, Printed };

struct TrainerConfig {
  double eta = 3e-4;
  double gamma = 0.99;
  double tau = 1.0;
  double lambda0 = 1e4;
  double nu0 = 1e5;
  double beta = 2.0;
  std::size_t M = 4;
  std::size_t N = 2500;
  double epsilon = 0.9;
  std::size_t T = 10;
  std::size_t K = 10;
  double eta_decay = 1.0;
  std::size_t decay_steps = 0;  // 0: never decay
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 10'000;
  Estimator estimator = Estimator::SingleSample;
  ActorGradient actor_gradient = ActorGradient::Exact;
  std::size_t max_episode_steps = 0;  // 0: the environment's own limit
  std::size_t max_env_steps = 0;      // 0: unlimited
  ApproxConfig approx;
};

inline void validate(const TrainerConfig& c) {
  auto bad = [](const std::string& m) { throw InputError("trainer config: " + m); };
  if (!(c.eta > 0.0)) bad("eta must be positive");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) bad("gamma must lie in [0, 1)");
  if (!(c.tau > 0.0)) bad("tau must be positive");
  if (c.lambda0 < 0.0) bad("lambda must be nonnegative");
  if (!(c.nu0 > 0.0)) bad("nu must be positive");
  if (!(c.beta > 1.0)) bad("beta must exceed 1");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) bad("epsilon must lie in (0, 1)");
  if (c.T < 2) bad("T must be at least 2");
  if (c.K < 1) bad("K must be at least 1");
  if (!(c.eta_decay > 0.0 && c.eta_decay <= 1.0)) bad("eta_decay must lie in (0, 1]");
  if (c.buffer_capacity < c.T) bad("buffer capacity must hold at least one window");
}

inline TrainerConfig cartpole_defaults() {
  TrainerConfig c;
  c.tau = 1.0;
  c.lambda0 = 1e4;
  c.nu0 = 1e5;
  c.M = 4;
  c.N = 2500;
  c.K = 10;
  c.eta_decay = 1.0;
  c.estimator = Estimator::Generative;
  c.approx.optimizer.kind = OptimizerKind::Adam;
  c.approx.encoding.low = {-2.4, -3.0, -0.27, -3.5};
  c.approx.encoding.high = {2.4, 3.0, 0.27, 3.5};
  return c;
}

inline TrainerConfig sequential_visiting_defaults() {
  TrainerConfig c;
  c.tau = 0.5;
  c.lambda0 = 1e3;
  c.nu0 = 1e5;
  c.M = 3;
  c.N = 1500;
  c.K = 5;
  c.eta_decay = 0.5;
  c.decay_steps = 1000;
  c.approx.optimizer.kind = OptimizerKind::Adam;
  c.approx.encoding.low = {0.0, 0.0, -M_PI};
  c.approx.encoding.high = {5.0, 5.0, M_PI};
  return c;
}

inline nlohmann::json to_json(const TrainerConfig& c) {
  const auto& a = c.approx;
  nlohmann::json enc = {{"kind", a.encoding.kind == InputEncoding::Kind::Raw ? "raw" : "one_hot"}};
  if (a.encoding.kind == InputEncoding::Kind::OneHot) enc["size"] = a.encoding.one_hot_size;
  if (!a.encoding.low.empty()) {
    enc["low"] = a.encoding.low;
    enc["high"] = a.encoding.high;
  }
  return {{"eta", c.eta},
          {"gamma", c.gamma},
          {"tau", c.tau},
          {"lambda", c.lambda0},
          {"nu", c.nu0},
          {"beta", c.beta},
          {"M", c.M},
          {"N", c.N},
          {"epsilon", c.epsilon},
          {"T", c.T},
          {"K", c.K},
          {"eta_decay", c.eta_decay},
          {"decay_steps", c.decay_steps},
          {"seed", c.seed},
          {"buffer_capacity", c.buffer_capacity},
          {"estimator", c.estimator == Estimator::SingleSample ? "single" : "generative"},
          {"actor_gradient", c.actor_gradient == ActorGradient::Exact ? "exact" : "printed"},
          {"max_episode_steps", c.max_episode_steps},
          {"max_env_steps", c.max_env_steps},
          {"approx",
           {{"hidden", a.hidden},
            {"single_network", a.single_network},
            {"optimizer", to_string(a.optimizer.kind)},
            {"policy_optimizer", to_string(a.policy_optimizer.value_or(a.optimizer.kind))},
            {"max_grad_norm", a.optimizer.max_grad_norm},
            {"encoding", enc}}}};
}

// Overlays the keys present in j onto base.
inline TrainerConfig trainer_config_from_json(const nlohmann::json& j, TrainerConfig c) {
  try {
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("eta", c.eta);
    get("gamma", c.gamma);
    get("tau", c.tau);
    get("lambda", c.lambda0);
    get("nu", c.nu0);
    get("beta", c.beta);
    get("M", c.M);
    get("N", c.N);
    get("epsilon", c.epsilon);
    get("T", c.T);
    get("K", c.K);
    get("eta_decay", c.eta_decay);
    get("decay_steps", c.decay_steps);
    get("seed", c.seed);
    get("buffer_capacity", c.buffer_capacity);
    get("max_episode_steps", c.max_episode_steps);
    get("max_env_steps", c.max_env_steps);
    if (j.contains("estimator")) {
      const auto s = j.at("estimator").get<std::string>();
      if (s == "single") c.estimator = Estimator::SingleSample;
      else if (s == "generative") c.estimator = Estimator::Generative;
      else throw InputError("trainer config: unknown estimator '" + s + "'");
    }
    if (j.contains("actor_gradient")) {
      const auto s = j.at("actor_gradient").get<std::string>();
      if (s == "exact") c.actor_gradient = ActorGradient::Exact;
      else if (s == "printed") c.actor_gradient = ActorGradient::Printed;
      else throw InputError("trainer config: unknown actor_gradient '" + s + "'");
    }
    if (j.contains("approx")) {
      const auto& a = j.at("approx");
      if (a.contains("hidden")) c.approx.hidden = a.at("hidden").get<std::vector<std::size_t>>();
      if (a.contains("single_network")) c.approx.single_network = a.at("single_network").get<bool>();
      if (a.contains("optimizer")) c.approx.optimizer.kind = optimizer_from_string(a.at("optimizer"));
      if (a.contains("policy_optimizer")) c.approx.policy_optimizer = optimizer_from_string(a.at("policy_optimizer"));
      if (a.contains("max_grad_norm")) c.approx.optimizer.max_grad_norm = a.at("max_grad_norm").get<double>();
      if (a.contains("encoding")) {
        const auto& e = a.at("encoding");
        const auto kind = e.value("kind", std::string("raw"));
        if (kind == "raw") {
          c.approx.encoding.kind = InputEncoding::Kind::Raw;
        } else if (kind == "one_hot") {
          c.approx.encoding.kind = InputEncoding::Kind::OneHot;
          c.approx.encoding.one_hot_size = e.value("size", std::size_t{0});
        } else {
          throw InputError("trainer config: unknown encoding '" + kind + "'");
        }
        if (e.contains("low")) c.approx.encoding.low = e.at("low").get<std::vector<double>>();
        if (e.contains("high")) c.approx.encoding.high = e.at("high").get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("trainer config: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Duals

struct DualState {
  double lambda = 0.0;
  double nu = 1.0;
};

// One outer step: lambda grows by nu times the new violation; nu grows by
// beta when the violation did not shrink below epsilon times the previous.
inline DualState dual_update(DualState d, double previous, double next, double beta, double epsilon) {
  DualState out = d;
  out.lambda = d.lambda + d.nu * next;
  if (next > epsilon * previous) out.nu = beta * d.nu;
  return out;
}

// ---------------------------------------------------------------------------
// Replay

struct Transition {
  StateVec z;
  std::size_t action = 0;
  double reward = 0.0;
  StateVec z_next;
  bool terminal = false;  // no bootstrap from z_next
  std::size_t episode = 0;
};

using Window = std::vector<Transition>;

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10'000) : capacity_(capacity) {
    if (capacity_ == 0) throw InputError("replay buffer capacity must be positive");
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  std::size_t pushed() const { return pushed_; }
  const Transition& operator[](std::size_t i) const { return data_.at(i); }
  void clear() { data_.clear(); }

  void push(Transition t) {
    if (data_.size() == capacity_) data_.pop_front();
    data_.push_back(std::move(t));
    ++pushed_;
  }

  // k windows with distinct uniformly drawn start offsets; each extends up
  // to len transitions without leaving its episode.
  std::vector<Window> sample(std::size_t k, std::size_t len, Rng& rng) const {
    if (data_.empty()) throw EmptyBatch();
    if (len == 0) throw InputError("window length must be positive");
    const std::size_t n = std::min(k, data_.size());
    std::vector<std::size_t> starts;
    if (n * 4 < data_.size()) {
      std::set<std::size_t> chosen;
      std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
      while (chosen.size() < n) {
        const std::size_t s = pick(rng);
        if (chosen.insert(s).second) starts.push_back(s);
      }
    } else {
      starts.resize(data_.size());
      std::iota(starts.begin(), starts.end(), 0);
      std::shuffle(starts.begin(), starts.end(), rng);
      starts.resize(n);
    }
    std::vector<Window> out;
    out.reserve(n);
    for (auto s : starts) {
      Window w;
      const std::size_t ep = data_[s].episode;
      for (std::size_t i = s; i < data_.size() && w.size() < len && data_[i].episode == ep; ++i) {
        w.push_back(data_[i]);
        if (data_[i].terminal) break;
      }
      out.push_back(std::move(w));
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
  std::size_t pushed_ = 0;
};

// ---------------------------------------------------------------------------
// Residuals and losses

// g = c + sum_j w_j V(q_j) - V(q_self), indices into a value-query batch.
struct Residual {
  std::size_t self = 0;
  std::vector<std::pair<std::size_t, double>> next;
  double c = 0.0;
};

inline double residual_value(const Residual& r, std::span<const double> v) {
  double g = r.c - v[r.self];
  for (auto [j, w] : r.next) g += w * v[j];
  return g;
}

// Single-sample estimate from one logged transition.
inline double g_tilde(double reward, double v, double v_next, double log_pi, double gamma, double tau,
                      bool terminal) {
  return reward + (terminal ? 0.0 : gamma * v_next) - tau * log_pi - v;
}

struct PenaltyTerms {
  double loss = 0.0;       // weight * sum [V + lambda h + nu/2 h^2]
  double violation = 0.0;  // weight * sum h
  std::vector<double> coef;  // dloss/dV per query
};

inline PenaltyTerms penalty_terms(std::span<const Residual> rs, std::span<const double> v, const DualState& d,
                                  double weight) {
  PenaltyTerms p;
  p.coef.assign(v.size(), 0.0);
  for (const auto& r : rs) {
    const double g = residual_value(r, v);
    const double hg = h(g);
    p.loss += weight * (v[r.self] + d.lambda * hg + 0.5 * d.nu * hg * hg);
    p.violation += weight * hg;
    const double dg = (d.lambda + d.nu * hg) * h_prime(g);
    p.coef[r.self] += weight * (1.0 - dg);
    for (auto [j, w] : r.next) p.coef[j] += weight * dg * w;
  }
  return p;
}

// Soft consistency error of one path: v_end is the value after the last
// step (ignored when the path ended in a terminal transition).
inline double consistency_error(double v_start, double v_end, bool terminal, std::span<const double> rewards,
                                std::span<const double> log_pi, double gamma, double tau) {
  double c = -v_start;
  double disc = 1.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    c += disc * (rewards[t] - tau * log_pi[t]);
    disc *= gamma;
  }
  if (!terminal) c += disc * v_end;
  return c;
}

// ---------------------------------------------------------------------------
// One critic/actor update on a batch of windows

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double violation = 0.0;
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
};

namespace detail {

struct WindowEval {
  std::vector<StateVec> vq;
  ModularApproximator::Batch vb;
  ModularApproximator::Batch pb;
  std::vector<Residual> res;      // one per transition, flattened
  std::vector<std::size_t> tail;  // per window: value query of the state after its last step
};

inline WindowEval evaluate_windows(const ModularApproximator& m, ProductEnvironment& env,
                                   const std::vector<Window>& ws, const TrainerConfig& cfg, Rng& rng) {
  if (ws.empty()) throw EmptyBatch();
  WindowEval e;
  std::vector<StateVec> states;
  for (const auto& w : ws) {
    if (w.empty()) throw EmptyBatch();
    for (const auto& t : w) states.push_back(t.z);
  }
  e.pb = m.forward_policy(states);
  const std::size_t na = m.action_count();
  if (cfg.estimator == Estimator::Generative && !env.generative()) {
    throw GenerativeUnsupported("environment cannot be stepped from arbitrary states");
  }
  std::size_t flat = 0;
  for (const auto& w : ws) {
    for (const auto& t : w) {
      Residual r;
      r.self = e.vq.size();
      e.vq.push_back(t.z);
      const double* pi = &e.pb.out[flat * na];
      if (cfg.estimator == Estimator::SingleSample) {
        r.c = t.reward - cfg.tau * std::log(pi[t.action]);
        if (!t.terminal) {
          r.next.emplace_back(e.vq.size(), cfg.gamma);
          e.vq.push_back(t.z_next);
        }
      } else {
        for (std::size_t a = 0; a < na; ++a) {
          StepResult s = env.step(t.z, a, rng);
          r.c += pi[a] * (s.reward - cfg.tau * std::log(pi[a]));
          if (!s.terminal) {
            r.next.emplace_back(e.vq.size(), pi[a] * cfg.gamma);
            e.vq.push_back(std::move(s.state));
          }
        }
      }
      e.res.push_back(std::move(r));
      ++flat;
    }
    e.tail.push_back(e.vq.size());
    e.vq.push_back(w.back().z_next);
  }
  e.vb = m.forward_values(e.vq);
  return e;
}

}  // namespace detail

// Mean over windows of sum_t h(g~).
inline double measure_violation(const ModularApproximator& m, ProductEnvironment& env, const std::vector<Window>& ws,
                                const TrainerConfig& cfg, Rng& rng) {
  auto e = detail::evaluate_windows(m, env, ws, cfg, rng);
  double v = 0.0;
  for (const auto& r : e.res) v += h(residual_value(r, e.vb.out));
  return v / static_cast<double>(ws.size());
}

// Critic step on the augmented Lagrangian, then actor step on half the
// squared consistency error, both from the same parameters.
inline UpdateStats sac_update(ModularApproximator& m, ProductEnvironment& env, const std::vector<Window>& ws,
                              const DualState& dual, const TrainerConfig& cfg, double eta, Rng& rng) {
  auto e = detail::evaluate_windows(m, env, ws, cfg, rng);
  const double inv_k = 1.0 / static_cast<double>(ws.size());
  const std::vector<double>& v = e.vb.out;
  PenaltyTerms pt = penalty_terms(e.res, v, dual, inv_k);

  const std::size_t na = m.action_count();
  std::vector<double> dlogits(e.pb.out.size(), 0.0);
  double actor_loss = 0.0;
  std::size_t flat = 0;
  for (std::size_t k = 0; k < ws.size(); ++k) {
    const auto& w = ws[k];
    std::vector<double> rewards, logp;
    for (std::size_t t = 0; t < w.size(); ++t) {
      rewards.push_back(w[t].reward);
      logp.push_back(std::log(e.pb.out[(flat + t) * na + w[t].action]));
    }
    const double c = consistency_error(v[e.res[flat].self], v[e.tail[k]], w.back().terminal, rewards, logp,
                                       cfg.gamma, cfg.tau);
    actor_loss += 0.5 * c * c * inv_k;
    const double sign = cfg.actor_gradient == ActorGradient::Exact ? -cfg.tau : 1.0;
    double disc = 1.0;
    for (std::size_t t = 0; t < w.size(); ++t, disc *= cfg.gamma) {
      const double scale = inv_k * c * sign * disc;
      const double* pi = &e.pb.out[(flat + t) * na];
      double* d = &dlogits[(flat + t) * na];
      for (std::size_t a = 0; a < na; ++a) d[a] += scale * ((a == w[t].action ? 1.0 : 0.0) - pi[a]);
    }
    flat += w.size();
  }

  m.accumulate_value_grad(e.vb, pt.coef);
  m.accumulate_policy_grad(e.pb, dlogits);
  UpdateStats s;
  s.critic_loss = pt.loss;
  s.actor_loss = actor_loss;
  s.violation = pt.violation;
  s.critic_grad_norm = std::sqrt(m.step_value(eta));
  s.actor_grad_norm = std::sqrt(m.step_policy(eta));
  return s;
}

// ---------------------------------------------------------------------------
// Exact critic on a tabular product with a one-hot approximator: every
// non-zero product state is one residual with the model's expectation.

struct ExactCriticReport {
  std::vector<double> violations;
  DualState dual;
  double max_residual = 0.0;
  double gradient_norm = 0.0;  // of the augmented Lagrangian w.r.t. the table at the end
};

inline ExactCriticReport fit_critic_exact(ModularApproximator& m, const ProductMdp& p, const PolicyTable& pi,
                                          const TrainerConfig& cfg, std::size_t steps_per_outer) {
  const auto zero = zero_set(p);
  std::vector<StateVec> zs(p.num_states());
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    zs[z] = {static_cast<double>(p.s_of(z)), static_cast<double>(p.q_of(z))};
  }
  std::vector<Residual> rs;
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    if (zero[z]) continue;
    Residual r;
    r.self = z;
    std::map<std::size_t, double> w;
    for (std::size_t a = 0; a < p.num_actions(); ++a) {
      const double pa = pi.at(z).at(a);
      r.c += pa * (p.reward(z, a) - cfg.tau * std::log(pa));
      for (const auto& o : p.dist(z, a)) {
        if (!zero[o.next]) w[o.next] += pa * p.gamma() * o.prob;
      }
    }
    r.next.assign(w.begin(), w.end());
    rs.push_back(std::move(r));
  }
  ExactCriticReport rep;
  DualState d{cfg.lambda0, cfg.nu0};
  auto violation = [&] {
    auto b = m.forward_values(zs);
    double s = 0.0;
    for (const auto& r : rs) s += h(residual_value(r, b.out));
    return s;
  };
  double prev = violation();
  rep.violations.push_back(prev);
  std::size_t step = 0;
  for (std::size_t outer = 0; outer < cfg.M; ++outer) {
    for (std::size_t n = 0; n < steps_per_outer; ++n, ++step) {
      auto b = m.forward_values(zs);
      PenaltyTerms pt = penalty_terms(rs, b.out, d, 1.0);
      m.accumulate_value_grad(b, pt.coef);
      const double eta = cfg.decay_steps ? cfg.eta * std::pow(cfg.eta_decay, static_cast<double>(step / cfg.decay_steps))
                                         : cfg.eta;
      m.step_value(eta);
    }
    const double next = violation();
    d = dual_update(d, prev, next, cfg.beta, cfg.epsilon);
    rep.violations.push_back(next);
    prev = next;
  }
  auto b = m.forward_values(zs);
  for (const auto& r : rs) rep.max_residual = std::max(rep.max_residual, std::abs(residual_value(r, b.out)));
  const PenaltyTerms pt = penalty_terms(rs, b.out, d, 1.0);
  for (double c : pt.coef) rep.gradient_norm += c * c;
  rep.gradient_norm = std::sqrt(rep.gradient_norm);
  rep.dual = d;
  return rep;
}

// ---------------------------------------------------------------------------
// Training driver

struct MetricsRow {
  std::size_t step = 0;
  std::size_t level = 0;
  std::size_t outer_m = 0;
  double v_z0 = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double violation = 0.0;
  std::size_t episode_length = 0;
  double eta = 0.0;
};

inline std::string metrics_header() {
  return "step,level,outer_m,V_z0,critic_loss,actor_loss,violation,episode_length,eta";
}

inline std::string to_csv(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.10g,%.10g,%.10g,%.10g,%zu,%.10g", r.step, r.level, r.outer_m, r.v_z0,
                r.critic_loss, r.actor_loss, r.violation, r.episode_length, r.eta);
  return buf;
}

struct TrainHooks {
  std::function<void(const MetricsRow&)> on_metrics;
  std::size_t eval_interval = 0;  // environment steps between on_eval calls
  std::function<void(std::size_t env_steps, const ModularApproximator&)> on_eval;
  std::function<void(std::size_t level, const std::vector<std::size_t>& qs, const ModularApproximator&)> on_level;
};

struct LevelReport {
  std::size_t level = 0;
  std::vector<std::size_t> states;
  std::vector<double> violations;  // before the first and after every outer iteration
  std::vector<double> nus, lambdas;
  std::size_t env_steps = 0;
};

struct TrainResult {
  ModularApproximator model;
  std::vector<LevelReport> levels;
  std::size_t env_steps = 0;
  std::size_t iterations = 0;
  bool budget_exhausted = false;
};

// Single level holding every non-accepting, non-sink state; used when the
// automaton carries no structure (plain benchmarks).
inline LevelPartition single_level_partition(const Dfa& d) {
  LevelPartition p;
  MetaMode rest, done;
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    (d.is_accepting(q) || d.is_sink(q) ? done : rest).push_back(q);
  }
  p.levels.emplace_back();
  if (!done.empty()) {
    p.modes.push_back(done);
    p.repaired.push_back(false);
    p.levels[0].push_back(0);
  }
  p.modes.push_back(rest);
  p.repaired.push_back(false);
  p.levels.push_back({p.modes.size() - 1});
  return p;
}

inline std::set<std::size_t> zero_states(const LevelPartition& part, const Dfa& d) {
  std::set<std::size_t> z;
  if (part.num_levels() > 0) {
    for (auto q : part.states(0)) z.insert(q);
  }
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    if (d.is_accepting(q) || d.is_sink(q)) z.insert(q);
  }
  return z;
}

inline ModularApproximator make_approximator(const ProductEnvironment& env, const LevelPartition& part,
                                             const TrainerConfig& cfg) {
  return ModularApproximator(env.state_dimension() - 1, env.action_count(), env.dfa().num_states(),
                             zero_states(part, env.dfa()), cfg.approx, cfg.seed ^ 0x5DEECE66DULL);
}

namespace detail {

class LevelRunner {
 public:
  LevelRunner(ProductEnvironment& env, ModularApproximator& m, const TrainerConfig& cfg, Rng& rng,
              std::set<std::size_t> qs, std::size_t max_len)
      : env_(env), m_(m), cfg_(cfg), rng_(rng), qs_(std::move(qs)), max_len_(max_len) {
    Rng probe(cfg.seed);
    const StateVec z0 = env_.reset(probe);
    from_reset_ = qs_.count(ProductEnvironment::q_of(z0)) > 0;
  }

  // Advances the running episode by up to steps transitions.
  std::size_t advance(std::size_t steps, ReplayBuffer& buf, std::size_t budget_left) {
    std::size_t done = 0;
    while (done < steps && done < budget_left) {
      if (!running_) start();
      const auto pi = m_.policy(z_);
      std::discrete_distribution<std::size_t> pick(pi.begin(), pi.end());
      const std::size_t a = pick(rng_);
      StepResult r = env_.step(z_, a, rng_);
      ++len_;
      ++done;
      const std::size_t q2 = ProductEnvironment::q_of(r.state);
      const bool leaves = !r.terminal && !qs_.count(q2);
      buf.push({z_, a, r.reward, r.state, r.terminal, episode_});
      if (r.terminal || leaves || len_ >= max_len_) {
        last_len_ = len_;
        running_ = false;
      } else {
        z_ = std::move(r.state);
      }
    }
    return done;
  }

  std::size_t last_episode_length() const { return last_len_ ? last_len_ : len_; }

 private:
  void start() {
    if (from_reset_) {
      z_ = env_.reset(rng_);
    } else {
      std::vector<std::size_t> qs(qs_.begin(), qs_.end());
      std::uniform_int_distribution<std::size_t> pick(0, qs.size() - 1);
      z_ = env_.sample_state_in(qs[pick(rng_)], rng_);
    }
    ++episode_;
    len_ = 0;
    running_ = true;
    // A start state can already lie outside the level (reset onto a label).
    if (!qs_.count(ProductEnvironment::q_of(z_))) {
      for (int tries = 0; tries < 1000 && !qs_.count(ProductEnvironment::q_of(z_)); ++tries) {
        z_ = from_reset_ ? env_.reset(rng_) : env_.sample_state_in(ProductEnvironment::q_of(z_), rng_);
      }
      if (!qs_.count(ProductEnvironment::q_of(z_))) throw InputError("cannot draw a start state inside the level");
    }
  }

  ProductEnvironment& env_;
  ModularApproximator& m_;
  const TrainerConfig& cfg_;
  Rng& rng_;
  std::set<std::size_t> qs_;
  std::size_t max_len_;
  bool from_reset_ = false;
  bool running_ = false;
  StateVec z_;
  std::size_t len_ = 0, last_len_ = 0, episode_ = 0;
};

}  // namespace detail

inline TrainResult train(ProductEnvironment& env, const LevelPartition& part, const TrainerConfig& cfg,
                         const TrainHooks& hooks = {}) {
  validate(cfg);
  TrainResult res{make_approximator(env, part, cfg), {}, 0, 0, false};
  ModularApproximator& m = res.model;
  Rng rng(cfg.seed);
  const std::size_t max_len = cfg.max_episode_steps ? cfg.max_episode_steps : env.max_episode_steps();
  const std::size_t budget = cfg.max_env_steps ? cfg.max_env_steps : std::numeric_limits<std::size_t>::max();
  std::size_t next_eval = hooks.eval_interval;
  std::size_t step = 0;

  Rng probe(cfg.seed);
  const StateVec z_init = env.reset(probe);

  solve_by_levels(part, [&](std::size_t level, const std::vector<std::size_t>& qs) {
    if (res.budget_exhausted) return;
    m.activate(qs);
    std::set<std::size_t> active;
    for (auto q : qs) {
      if (m.role(q) == Role::Active) active.insert(q);
    }
    if (active.empty()) return;
    LevelReport rep;
    rep.level = level;
    rep.states = qs;
    ReplayBuffer buf(cfg.buffer_capacity);
    detail::LevelRunner runner(env, m, cfg, rng, active, max_len);
    StateVec z_ref = z_init;
    if (!active.count(ProductEnvironment::q_of(z_ref))) z_ref.back() = static_cast<double>(*active.begin());

    auto collect = [&](std::size_t steps) {
      const std::size_t got = runner.advance(steps, buf, budget - res.env_steps);
      res.env_steps += got;
      rep.env_steps += got;
      if (hooks.on_eval && hooks.eval_interval) {
        while (res.env_steps >= next_eval) {
          hooks.on_eval(res.env_steps, m);
          next_eval += hooks.eval_interval;
        }
      }
      return got;
    };

    for (std::size_t k = 0; k < cfg.K; ++k) collect(cfg.T);
    if (buf.empty()) {
      res.budget_exhausted = true;
      return;
    }
    DualState dual{cfg.lambda0, cfg.nu0};
    double prev = measure_violation(m, env, buf.sample(cfg.K, cfg.T, rng), cfg, rng);
    rep.violations.push_back(prev);
    rep.lambdas.push_back(dual.lambda);
    rep.nus.push_back(dual.nu);
    std::size_t level_step = 0;
    for (std::size_t outer = 1; outer <= cfg.M && !res.budget_exhausted; ++outer) {
      for (std::size_t n = 0; n < cfg.N; ++n, ++level_step, ++step) {
        if (collect(cfg.T) == 0) {
          res.budget_exhausted = true;
          break;
        }
        const double eta = cfg.decay_steps
                               ? cfg.eta * std::pow(cfg.eta_decay, static_cast<double>(level_step / cfg.decay_steps))
                               : cfg.eta;
        UpdateStats s = sac_update(m, env, buf.sample(cfg.K, cfg.T, rng), dual, cfg, eta, rng);
        if (!std::isfinite(s.critic_loss) || !std::isfinite(s.actor_loss)) {
          throw NumericalError("training diverged at step " + std::to_string(step));
        }
        if (hooks.on_metrics) {
          hooks.on_metrics({step, level, outer, m.value(z_ref), s.critic_loss, s.actor_loss, s.violation,
                            runner.last_episode_length(), eta});
        }
        ++res.iterations;
      }
      const double next = measure_violation(m, env, buf.sample(cfg.K, cfg.T, rng), cfg, rng);
      dual = dual_update(dual, prev, next, cfg.beta, cfg.epsilon);
      rep.violations.push_back(next);
      rep.lambdas.push_back(dual.lambda);
      rep.nus.push_back(dual.nu);
      prev = next;
    }
    m.freeze_all();
    if (hooks.on_level) hooks.on_level(level, qs, m);
    res.levels.push_back(std::move(rep));
  });
  m.freeze_all();
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double rate = 0.0;
  double mean_length = 0.0;
  double mean_return = 0.0;
};

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"episodes", r.episodes}, {"successes", r.successes}, {"rate", r.rate}, {"mean_length", r.mean_length},
          {"mean_return", r.mean_return}};
}

struct EpisodeStep {
  StateVec z;
  std::size_t action;
  double reward;
};

struct Episode {
  std::vector<EpisodeStep> steps;
  StateVec last;
  bool accepted = false;
  double ret = 0.0;
};

// Policy for rollouts: the model's distribution, or its argmax when greedy.
inline Episode run_episode(const ModularApproximator& m, ProductEnvironment& env, std::size_t max_len, Rng& rng,
                           bool greedy = false) {
  Episode ep;
  StateVec z = env.reset(rng);
  for (std::size_t t = 0; t < max_len; ++t) {
    if (env.finished(ProductEnvironment::q_of(z))) break;
    const auto pi = m.policy(z);
    std::size_t a;
    if (greedy) {
      a = static_cast<std::size_t>(std::max_element(pi.begin(), pi.end()) - pi.begin());
    } else {
      std::discrete_distribution<std::size_t> pick(pi.begin(), pi.end());
      a = pick(rng);
    }
    StepResult r = env.step(z, a, rng);
    ep.steps.push_back({z, a, r.reward});
    ep.ret += r.reward;
    z = std::move(r.state);
    if (r.terminal) break;
  }
  ep.accepted = env.dfa().is_accepting(ProductEnvironment::q_of(z));
  ep.last = std::move(z);
  return ep;
}

inline Rng episode_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(i)};
  return Rng(ss);
}

// Episode i uses its own generator seeded from (seed, i), so results do not
// depend on the worker count. The environment must be stateless.
inline EvalReport evaluate(const ModularApproximator& m, ProductEnvironment& env, std::size_t episodes,
                           std::uint64_t seed, std::size_t workers = 1, std::size_t max_len = 0, bool greedy = false) {
  if (episodes == 0) throw InputError("evaluation needs at least one episode");
  if (workers == 0) workers = 1;
  if (max_len == 0) max_len = env.max_episode_steps();
  std::vector<Episode> eps(episodes);
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < episodes; i += workers) {
      Rng rng = episode_rng(seed, i);
      eps[i] = run_episode(m, env, max_len, rng, greedy);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  EvalReport r;
  r.episodes = episodes;
  for (const auto& e : eps) {
    r.successes += e.accepted ? 1 : 0;
    r.mean_length += static_cast<double>(e.steps.size());
    r.mean_return += e.ret;
  }
  r.rate = static_cast<double>(r.successes) / static_cast<double>(episodes);
  r.mean_length /= static_cast<double>(episodes);
  r.mean_return /= static_cast<double>(episodes);
  return r;
}

}  // namespace tsynth
