#pragma once

// Feed-forward networks with exact reverse-mode gradients, optimizers, and
// the modular approximator: one value net and one policy net per automaton
// state.

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/mdp.hpp"

namespace tsynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Head { Linear, Softmax };

inline std::string to_string(Head h) { return h == Head::Linear ? "linear" : "softmax"; }
inline Head head_from_string(const std::string& s) {
  if (s == "linear") return Head::Linear;
  if (s == "softmax") return Head::Softmax;
  throw InputError("unknown network head '" + s + "'");
}

// Column-wise softmax.
inline Matrix softmax_columns(const Matrix& z) {
  Matrix p = z;
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    p.col(c) = (z.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

// Gradient of a scalar loss with respect to every parameter of one Mlp.
struct GradientTape {
  std::vector<Matrix> dw;
  std::vector<Vector> db;

  GradientTape& operator+=(const GradientTape& o) {
    if (o.dw.size() != dw.size()) throw ShapeMismatch("gradient tapes have different depth");
    for (std::size_t i = 0; i < dw.size(); ++i) {
      if (o.dw[i].rows() != dw[i].rows() || o.dw[i].cols() != dw[i].cols()) {
        throw ShapeMismatch("gradient tapes have different layer shapes");
      }
      dw[i] += o.dw[i];
      db[i] += o.db[i];
    }
    return *this;
  }

  void scale(double c) {
    for (auto& w : dw) w *= c;
    for (auto& b : db) b *= c;
  }

  void set_zero() {
    for (auto& w : dw) w.setZero();
    for (auto& b : db) b.setZero();
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : dw) s += w.squaredNorm();
    for (const auto& b : db) s += b.squaredNorm();
    return s;
  }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < dw.size(); ++i) {
      out.insert(out.end(), dw[i].data(), dw[i].data() + dw[i].size());
      out.insert(out.end(), db[i].data(), db[i].data() + db[i].size());
    }
    return out;
  }
};

class Mlp {
 public:
  // widths = {input, hidden..., output}. Hidden layers get fan-in scaled
  // uniform weights; the output layer starts at zero.
  Mlp(std::vector<std::size_t> widths, Head head, Rng& rng) : widths_(std::move(widths)), head_(head) {
    if (widths_.size() < 2) throw ShapeMismatch("an Mlp needs input and output widths");
    for (auto w : widths_) {
      if (w == 0) throw ShapeMismatch("layer widths must be positive");
    }
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      Matrix w = Matrix::Zero(widths_[i + 1], widths_[i]);
      Vector b = Vector::Zero(widths_[i + 1]);
      if (i + 2 < widths_.size()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[i]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
        for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = u(rng);
      }
      w_.push_back(std::move(w));
      b_.push_back(std::move(b));
    }
  }

  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer
    Matrix logits;
    Matrix out;
  };

  const std::vector<std::size_t>& widths() const { return widths_; }
  Head head() const { return head_; }
  std::size_t input_size() const { return widths_.front(); }
  std::size_t output_size() const { return widths_.back(); }
  std::size_t layers() const { return w_.size(); }
  Matrix& weight(std::size_t i) { return w_.at(i); }
  Vector& bias(std::size_t i) { return b_.at(i); }
  const Matrix& weight(std::size_t i) const { return w_.at(i); }
  const Vector& bias(std::size_t i) const { return b_.at(i); }

  Cache forward_cache(const Matrix& x) const {
    if (static_cast<std::size_t>(x.rows()) != input_size()) {
      throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, network expects " +
                          std::to_string(input_size()));
    }
    Cache c;
    Matrix a = x;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      c.inputs.push_back(a);
      Matrix z = (w_[i] * a).colwise() + b_[i];
      if (i + 1 < w_.size()) a = z.cwiseMax(0.0);
      else c.logits = std::move(z);
    }
    c.out = head_ == Head::Softmax ? softmax_columns(c.logits) : c.logits;
    return c;
  }

  Matrix forward(const Matrix& x) const { return forward_cache(x).out; }

  // Gradient given dL/d(head output).
  GradientTape backprop(const Cache& c, const Matrix& dout) const {
    check_grad_shape(c, dout);
    if (head_ == Head::Linear) return backprop_raw(c, dout);
    Matrix dz = dout;
    for (Eigen::Index k = 0; k < dout.cols(); ++k) {
      const double dot = c.out.col(k).dot(dout.col(k));
      dz.col(k) = c.out.col(k).cwiseProduct((dout.col(k).array() - dot).matrix());
    }
    return backprop_raw(c, dz);
  }

  // Gradient given dL/d(logits).
  GradientTape backprop_raw(const Cache& c, const Matrix& dlogits) const {
    check_grad_shape(c, dlogits);
    GradientTape t;
    t.dw.resize(w_.size());
    t.db.resize(w_.size());
    Matrix g = dlogits;
    for (std::size_t i = w_.size(); i-- > 0;) {
      t.dw[i] = g * c.inputs[i].transpose();
      t.db[i] = g.rowwise().sum();
      if (i > 0) {
        g = (w_[i].transpose() * g).cwiseProduct((c.inputs[i].array() > 0.0).cast<double>().matrix());
      }
    }
    return t;
  }

  GradientTape zero_tape() const {
    GradientTape t;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      t.dw.push_back(Matrix::Zero(w_[i].rows(), w_[i].cols()));
      t.db.push_back(Vector::Zero(b_[i].size()));
    }
    return t;
  }

  // theta <- theta - eta * tape
  void sgd_step(const GradientTape& t, double eta) {
    check_tape(t);
    for (std::size_t i = 0; i < w_.size(); ++i) {
      w_[i] -= eta * t.dw[i];
      b_[i] -= eta * t.db[i];
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < w_.size(); ++i) n += w_[i].size() + b_[i].size();
    return n;
  }

  // Layer by layer: weights (column-major) then biases.
  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t i = 0; i < w_.size(); ++i) {
      out.insert(out.end(), w_[i].data(), w_[i].data() + w_[i].size());
      out.insert(out.end(), b_[i].data(), b_[i].data() + b_[i].size());
    }
    return out;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ShapeMismatch("parameter vector has the wrong length");
    std::size_t k = 0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      std::memcpy(w_[i].data(), p.data() + k, sizeof(double) * w_[i].size());
      k += w_[i].size();
      std::memcpy(b_[i].data(), p.data() + k, sizeof(double) * b_[i].size());
      k += b_[i].size();
    }
  }

  void check_tape(const GradientTape& t) const {
    if (t.dw.size() != w_.size()) throw ShapeMismatch("tape depth does not match the network");
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (t.dw[i].rows() != w_[i].rows() || t.dw[i].cols() != w_[i].cols() || t.db[i].size() != b_[i].size()) {
        throw ShapeMismatch("tape layer shape does not match the network");
      }
    }
  }

 private:
  void check_grad_shape(const Cache& c, const Matrix& g) const {
    if (g.rows() != c.logits.rows() || g.cols() != c.logits.cols()) {
      throw ShapeMismatch("output gradient shape does not match the forward pass");
    }
  }

  std::vector<std::size_t> widths_;
  Head head_;
  std::vector<Matrix> w_;
  std::vector<Vector> b_;
};

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { Sgd, Adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw InputError("unknown optimizer '" + s + "'");
}
inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

class Optimizer {
 public:
  Optimizer(const Mlp& net, OptimizerConfig cfg) : cfg_(cfg), m_(net.zero_tape()), v_(net.zero_tape()) {}

  void step(Mlp& net, GradientTape g, double eta) {
    if (cfg_.max_grad_norm > 0.0) {
      const double n = std::sqrt(g.squared_norm());
      if (n > cfg_.max_grad_norm) g.scale(cfg_.max_grad_norm / n);
    }
    if (cfg_.kind == OptimizerKind::Sgd) {
      net.sgd_step(g, eta);
      return;
    }
    net.check_tape(g);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      param.array() -= eta * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
    };
    for (std::size_t i = 0; i < net.layers(); ++i) {
      update(net.weight(i), m_.dw[i], v_.dw[i], g.dw[i]);
      update(net.bias(i), m_.db[i], v_.db[i], g.db[i]);
    }
  }

 private:
  OptimizerConfig cfg_;
  GradientTape m_, v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Modular approximator

// How the environment part of a product state becomes network input.
struct InputEncoding {
  enum class Kind { Raw, OneHot } kind = Kind::Raw;
  std::size_t one_hot_size = 0;  // OneHot: state[0] is an index below this
  std::vector<double> low, high;  // Raw: optional min-max scaling to [-1, 1]
};

struct ApproxConfig {
  std::vector<std::size_t> hidden{256, 256};
  bool single_network = false;  // one shared pair of nets, q appended to the input
  InputEncoding encoding;
  OptimizerConfig optimizer;
  std::optional<OptimizerKind> policy_optimizer;  // overrides optimizer.kind for policy nets
};

enum class Role { Zero, Frozen, Active };

class ModularApproximator {
 public:
  // zero_states: automaton states whose value is identically 0 (F, sink and
  // the rest of L0).
  ModularApproximator(std::size_t state_dim, std::size_t actions, std::size_t num_q,
                      std::set<std::size_t> zero_states, ApproxConfig cfg, std::uint64_t seed)
      : state_dim_(state_dim), actions_(actions), num_q_(num_q), cfg_(std::move(cfg)), rng_(seed) {
    if (actions_ == 0) throw InputError("approximator needs at least one action");
    roles_.assign(num_q_, Role::Frozen);
    for (auto q : zero_states) {
      if (q >= num_q_) throw UnknownAutomatonState(q);
      roles_[q] = Role::Zero;
    }
    const auto& e = cfg_.encoding;
    if (e.kind == InputEncoding::Kind::Raw && !e.low.empty() &&
        (e.low.size() != state_dim_ || e.high.size() != state_dim_)) {
      throw ShapeMismatch("input scaling bounds do not match the state dimension");
    }
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_count() const { return actions_; }
  std::size_t num_q() const { return num_q_; }
  const ApproxConfig& config() const { return cfg_; }
  Role role(std::size_t q) const { return roles_.at(q); }
  std::size_t input_size() const {
    const std::size_t base =
        cfg_.encoding.kind == InputEncoding::Kind::OneHot ? cfg_.encoding.one_hot_size : state_dim_;
    return base + (cfg_.single_network ? 1 : 0);
  }

  // Makes qs trainable (creating nets on first use); everything else that
  // has nets becomes frozen.
  void activate(const std::vector<std::size_t>& qs) {
    for (std::size_t q = 0; q < num_q_; ++q) {
      if (roles_[q] == Role::Active) roles_[q] = Role::Frozen;
    }
    for (auto q : qs) {
      if (q >= num_q_) throw UnknownAutomatonState(q);
      if (roles_[q] == Role::Zero) continue;
      roles_[q] = Role::Active;
      ensure_nets(key(q));
    }
  }

  void freeze_all() {
    for (auto& r : roles_) {
      if (r == Role::Active) r = Role::Frozen;
    }
  }

  bool has_nets(std::size_t q) const { return nets_.count(key(q)) > 0; }

  // Inputs for product states z = [s..., q].
  Matrix encode(std::span<const StateVec> zs) const {
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(input_size()), static_cast<Eigen::Index>(zs.size()));
    for (std::size_t c = 0; c < zs.size(); ++c) {
      const auto& z = zs[c];
      if (z.size() != state_dim_ + 1) throw ShapeMismatch("product state has the wrong dimension");
      const auto col = static_cast<Eigen::Index>(c);
      if (cfg_.encoding.kind == InputEncoding::Kind::OneHot) {
        const auto idx = static_cast<std::size_t>(z[0]);
        if (idx >= cfg_.encoding.one_hot_size) throw ShapeMismatch("one-hot index out of range");
        x(static_cast<Eigen::Index>(idx), col) = 1.0;
      } else {
        for (std::size_t i = 0; i < state_dim_; ++i) {
          double v = z[i];
          if (!cfg_.encoding.low.empty()) {
            const double lo = cfg_.encoding.low[i], hi = cfg_.encoding.high[i];
            v = 2.0 * (v - lo) / (hi - lo) - 1.0;
          }
          x(static_cast<Eigen::Index>(i), col) = v;
        }
      }
      if (cfg_.single_network) x(x.rows() - 1, col) = z.back();
    }
    return x;
  }

  double value(const StateVec& z) const {
    const std::size_t q = q_of(z);
    if (q >= num_q_) throw UnknownAutomatonState(q);
    if (roles_[q] == Role::Zero) return 0.0;
    const auto& n = nets_for(q);
    std::vector<StateVec> one{z};
    return n.value.forward(encode(one))(0, 0);
  }

  std::vector<double> policy(const StateVec& z) const {
    const std::size_t q = q_of(z);
    if (q >= num_q_) throw UnknownAutomatonState(q);
    if (roles_[q] == Role::Zero && !has_nets(q)) {
      return std::vector<double>(actions_, 1.0 / static_cast<double>(actions_));
    }
    const auto& n = nets_for(q);
    std::vector<StateVec> one{z};
    Matrix p = n.policy.forward(encode(one));
    return std::vector<double>(p.data(), p.data() + p.size());
  }

  // ---- batched evaluation for training -----------------------------------

  struct Batch {
    std::vector<double> out;  // value per query, or policy row-major (query, action)
    struct Group {
      std::size_t net;
      std::vector<std::size_t> rows;  // query indices in this group
      Mlp::Cache cache;
      bool trainable;
    };
    std::vector<Group> groups;
  };

  Batch forward_values(const std::vector<StateVec>& zs) const { return forward(zs, false); }
  Batch forward_policy(const std::vector<StateVec>& zs) const { return forward(zs, true); }

  // Adds sum_i coef[i] * dV(z_i)/dtheta into the value tapes (trainable
  // nets only).
  void accumulate_value_grad(const Batch& b, const std::vector<double>& coef) {
    for (const auto& g : b.groups) {
      if (!g.trainable) continue;
      Matrix d(1, static_cast<Eigen::Index>(g.rows.size()));
      for (std::size_t k = 0; k < g.rows.size(); ++k) d(0, static_cast<Eigen::Index>(k)) = coef.at(g.rows[k]);
      auto& n = nets_.at(g.net);
      n.value_tape += n.value.backprop(g.cache, d);
    }
  }

  // dlogits is row-major (query, action).
  void accumulate_policy_grad(const Batch& b, const std::vector<double>& dlogits) {
    for (const auto& g : b.groups) {
      if (!g.trainable) continue;
      Matrix d(static_cast<Eigen::Index>(actions_), static_cast<Eigen::Index>(g.rows.size()));
      for (std::size_t k = 0; k < g.rows.size(); ++k) {
        for (std::size_t a = 0; a < actions_; ++a) {
          d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = dlogits.at(g.rows[k] * actions_ + a);
        }
      }
      auto& n = nets_.at(g.net);
      n.policy_tape += n.policy.backprop_raw(g.cache, d);
    }
  }

  // Applies and clears the accumulated tapes; returns the squared norm of
  // the applied gradient.
  double step_value(double eta) { return step(eta, false); }
  double step_policy(double eta) { return step(eta, true); }

  // ---- direct access ------------------------------------------------------

  Mlp& value_net(std::size_t q) { return nets_for(q).value; }
  Mlp& policy_net(std::size_t q) { return nets_for(q).policy; }
  const Mlp& value_net(std::size_t q) const { return nets_for(q).value; }
  const Mlp& policy_net(std::size_t q) const { return nets_for(q).policy; }

  // Net keys (q, or 0 for the shared net) currently holding parameters.
  std::vector<std::size_t> net_keys() const {
    std::vector<std::size_t> out;
    for (const auto& [k, n] : nets_) out.push_back(k);
    return out;
  }

  std::size_t key(std::size_t q) const { return cfg_.single_network ? 0 : q; }

  // Installs parameters for net key k (used when loading checkpoints).
  void load_nets(std::size_t k, std::span<const double> value_params, std::span<const double> policy_params) {
    ensure_nets(k);
    auto& n = nets_.at(k);
    n.value.set_parameters(value_params);
    n.policy.set_parameters(policy_params);
  }

  void set_role(std::size_t q, Role r) { roles_.at(q) = r; }

 private:
  struct Nets {
    Mlp value, policy;
    GradientTape value_tape, policy_tape;
    Optimizer value_opt, policy_opt;
  };

  static std::size_t q_of(const StateVec& z) { return static_cast<std::size_t>(z.back()); }

  std::vector<std::size_t> widths(std::size_t out) const {
    std::vector<std::size_t> w{input_size()};
    w.insert(w.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    w.push_back(out);
    return w;
  }

  void ensure_nets(std::size_t k) {
    if (nets_.count(k)) return;
    Mlp v(widths(1), Head::Linear, rng_);
    Mlp p(widths(actions_), Head::Softmax, rng_);
    GradientTape vt = v.zero_tape(), pt = p.zero_tape();
    OptimizerConfig pc = cfg_.optimizer;
    if (cfg_.policy_optimizer) pc.kind = *cfg_.policy_optimizer;
    Optimizer vo(v, cfg_.optimizer), po(p, pc);
    nets_.emplace(k, Nets{std::move(v), std::move(p), std::move(vt), std::move(pt), std::move(vo), std::move(po)});
  }

  Nets& nets_for(std::size_t q) {
    if (q >= num_q_) throw UnknownAutomatonState(q);
    auto it = nets_.find(key(q));
    if (it == nets_.end()) throw UnknownAutomatonState(q);
    return it->second;
  }
  const Nets& nets_for(std::size_t q) const { return const_cast<ModularApproximator*>(this)->nets_for(q); }

  bool trainable(std::size_t q) const {
    if (cfg_.single_network) return roles_[q] == Role::Active;
    return roles_[q] == Role::Active;
  }

  Batch forward(const std::vector<StateVec>& zs, bool policy) const {
    Batch b;
    const std::size_t width = policy ? actions_ : 1;
    b.out.assign(zs.size() * width, 0.0);
    // Group queries by (net, trainable).
    std::map<std::pair<std::size_t, bool>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const std::size_t q = q_of(zs[i]);
      if (q >= num_q_) throw UnknownAutomatonState(q);
      if (roles_[q] == Role::Zero) {
        if (policy) {
          for (std::size_t a = 0; a < actions_; ++a) b.out[i * width + a] = 1.0 / static_cast<double>(actions_);
        }
        continue;
      }
      if (!nets_.count(key(q))) throw UnknownAutomatonState(q);
      groups[{key(q), trainable(q)}].push_back(i);
    }
    for (auto& [k, rows] : groups) {
      std::vector<StateVec> sub;
      sub.reserve(rows.size());
      for (auto i : rows) sub.push_back(zs[i]);
      const auto& n = nets_.at(k.first);
      Mlp::Cache c = (policy ? n.policy : n.value).forward_cache(encode(sub));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t a = 0; a < width; ++a) {
          b.out[rows[r] * width + a] = c.out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r));
        }
      }
      b.groups.push_back({k.first, std::move(rows), std::move(c), k.second});
    }
    return b;
  }

  double step(double eta, bool policy) {
    double sq = 0.0;
    for (auto& [k, n] : nets_) {
      auto& tape = policy ? n.policy_tape : n.value_tape;
      const double s = tape.squared_norm();
      if (s == 0.0) continue;
      sq += s;
      (policy ? n.policy_opt : n.value_opt).step(policy ? n.policy : n.value, tape, eta);
      tape.set_zero();
    }
    return sq;
  }

  std::size_t state_dim_, actions_, num_q_;
  ApproxConfig cfg_;
  Rng rng_;
  std::vector<Role> roles_;
  std::map<std::size_t, Nets> nets_;
};

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then the little-endian float64 blob of
// every listed net in order.

inline void write_checkpoint(const std::string& path, const ModularApproximator& m, std::size_t level,
                             const std::vector<std::size_t>& qs, const nlohmann::json& extra = {}) {
  using nlohmann::json;
  json nets = json::array();
  std::vector<double> blob;
  std::set<std::size_t> keys;
  for (auto q : qs) {
    if (m.role(q) == Role::Zero || !m.has_nets(q)) continue;
    keys.insert(m.key(q));
  }
  for (auto k : keys) {
    for (bool pol : {false, true}) {
      const Mlp& n = pol ? m.policy_net(k) : m.value_net(k);
      auto p = n.parameters();
      nets.push_back({{"key", k}, {"kind", pol ? "policy" : "value"}, {"widths", n.widths()},
                      {"head", to_string(n.head())}, {"offset", blob.size()}, {"count", p.size()}});
      blob.insert(blob.end(), p.begin(), p.end());
    }
  }
  json header = {{"format", "tsynth-checkpoint-1"},
                 {"level", level},
                 {"q", qs},
                 {"state_dim", m.state_dim()},
                 {"actions", m.action_count()},
                 {"num_q", m.num_q()},
                 {"single_network", m.config().single_network},
                 {"nets", nets},
                 {"extra", extra}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out << header.dump() << "\n";
  static_assert(sizeof(double) == 8);
  for (double x : blob) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

struct CheckpointData {
  nlohmann::json header;
  std::vector<double> blob;
};

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  CheckpointData d;
  try {
    d.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointMismatch(path + ": unreadable checkpoint header");
  }
  if (d.header.value("format", "") != "tsynth-checkpoint-1") {
    throw CheckpointMismatch(path + ": not a checkpoint file");
  }
  unsigned char bytes[8];
  while (in.read(reinterpret_cast<char*>(bytes), 8)) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    double x;
    std::memcpy(&x, &bits, 8);
    d.blob.push_back(x);
  }
  return d;
}

// Loads the nets of a checkpoint into m and marks their states frozen.
inline void load_checkpoint(const CheckpointData& d, ModularApproximator& m) {
  const auto& h = d.header;
  try {
    if (h.at("state_dim").get<std::size_t>() != m.state_dim() ||
        h.at("actions").get<std::size_t>() != m.action_count() ||
        h.at("num_q").get<std::size_t>() != m.num_q() ||
        h.at("single_network").get<bool>() != m.config().single_network) {
      throw CheckpointMismatch("checkpoint does not match the environment or approximator layout");
    }
    std::map<std::size_t, std::pair<std::span<const double>, std::span<const double>>> params;
    for (const auto& n : h.at("nets")) {
      const auto off = n.at("offset").get<std::size_t>(), cnt = n.at("count").get<std::size_t>();
      if (off + cnt > d.blob.size()) throw CheckpointMismatch("checkpoint blob is truncated");
      std::span<const double> s(d.blob.data() + off, cnt);
      auto& slot = params[n.at("key").get<std::size_t>()];
      (n.at("kind").get<std::string>() == "policy" ? slot.second : slot.first) = s;
    }
    for (auto& [k, p] : params) {
      try {
        m.load_nets(k, p.first, p.second);
      } catch (const ShapeMismatch& e) {
        throw CheckpointMismatch(std::string("checkpoint network shape differs: ") + e.what());
      }
    }
    for (auto q : h.at("q").get<std::vector<std::size_t>>()) {
      if (q < m.num_q() && m.role(q) != Role::Zero) m.set_role(q, Role::Frozen);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace tsynth
