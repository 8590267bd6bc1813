#pragma once

// Benchmark environments: cart-pole balancing, the Dubins car in a labeled
// workspace, and small grid worlds.

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsynth/errors.hpp"
#include "tsynth/mdp.hpp"
#include "tsynth/product.hpp"
#include "tsynth/sac.hpp"

namespace tsynth {

// ---------------------------------------------------------------------------
// Cart-pole

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double dt = 0.02;
  double angle_limit = 15.0 * M_PI / 180.0;
  double position_limit = 2.4;
  std::size_t max_steps = 500;
};

// State (x, x_dot, theta, theta_dot); action 0 pushes left, 1 pushes right.
class CartPoleEnv : public Environment {
 public:
  explicit CartPoleEnv(CartPoleParams p = {}) : p_(p) {}

  const CartPoleParams& params() const { return p_; }

  bool failed(const StateVec& s) const {
    return std::abs(s.at(0)) > p_.position_limit || std::abs(s.at(2)) > p_.angle_limit;
  }

  StateVec reset(Rng& rng) override {
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    StateVec s(4);
    for (auto& x : s) x = u(rng);
    return s;
  }

  StepResult step(const StateVec& s, std::size_t action, Rng&) override {
    if (s.size() != 4) throw ShapeMismatch("cart-pole state has four components");
    if (action > 1) throw InputError("cart-pole has two actions");
    if (failed(s)) throw SteppedAfterDone();
    const double f = action == 1 ? p_.force : -p_.force;
    const double x = s[0], xd = s[1], th = s[2], thd = s[3];
    const double c = std::cos(th), sn = std::sin(th);
    const double total = p_.cart_mass + p_.pole_mass;
    const double pml = p_.pole_mass * p_.half_length;
    const double tmp = (f + pml * thd * thd * sn) / total;
    const double thacc =
        (p_.gravity * sn - c * tmp) / (p_.half_length * (4.0 / 3.0 - p_.pole_mass * c * c / total));
    const double xacc = tmp - pml * thacc * c / total;
    StepResult r;
    r.state = {x + p_.dt * xd, xd + p_.dt * xacc, th + p_.dt * thd, thd + p_.dt * thacc};
    r.terminal = failed(r.state);
    r.reward = r.terminal ? 0.0 : 1.0;
    return r;
  }

  Symbol label(const StateVec&) const override { return 0; }
  std::size_t action_count() const override { return 2; }
  std::size_t state_dimension() const override { return 4; }
  const PropositionSet& propositions() const override { return props_; }
  std::size_t max_episode_steps() const override { return p_.max_steps; }
  bool generative() const override { return true; }

 private:
  CartPoleParams p_;
  PropositionSet props_;
};

inline std::shared_ptr<ProductEnvironment> cartpole_product(CartPoleParams p = {}) {
  auto env = std::make_shared<CartPoleEnv>(p);
  Dfa d = single_mode_dfa(env->propositions());
  return std::make_shared<ProductEnvironment>(env, std::move(d), environment_reward);
}

// ---------------------------------------------------------------------------
// Workspace and Dubins car

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct WorkspaceConfig {
  Rect bounds{0, 0, 5, 5};
  std::map<std::string, Rect> regions;
  std::vector<Rect> obstacles;
  std::string obstacle_prop = "O";
  std::map<std::size_t, std::array<double, 2>> subgoals;  // automaton state -> point
  std::array<double, 3> initial{3.0, 0.0, M_PI / 2};
  double speed = 0.3;
  double dt = 1.0;
  double turn_rate = 2.0 * M_PI / 15.0;
  double noise_std = 0.01;
  std::size_t max_steps = 80;
  double goal_reward = 10.0;
  double crash_penalty = -1.0;
  double shaping_scale = 5.0;
};

namespace detail {

inline Rect rect_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 4 || !(v[0] < v[2]) || !(v[1] < v[3])) {
    throw InputError("a rectangle is [x0, y0, x1, y1] with x0 < x1 and y0 < y1");
  }
  return {v[0], v[1], v[2], v[3]};
}

inline nlohmann::json rect_to_json(const Rect& r) { return {r.x0, r.y0, r.x1, r.y1}; }

}  // namespace detail

inline WorkspaceConfig workspace_from_json(const nlohmann::json& j) {
  WorkspaceConfig w;
  try {
    if (j.contains("bounds")) w.bounds = detail::rect_from_json(j.at("bounds"));
    for (const auto& [k, v] : j.at("regions").items()) w.regions[k] = detail::rect_from_json(v);
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) w.obstacles.push_back(detail::rect_from_json(o));
    }
    w.obstacle_prop = j.value("obstacle_prop", w.obstacle_prop);
    if (j.contains("subgoals")) {
      for (const auto& [k, v] : j.at("subgoals").items()) {
        if (k.size() < 2 || k[0] != 'q') throw InputError("subgoal keys are automaton state names like q0");
        auto p = v.get<std::vector<double>>();
        if (p.size() != 2) throw InputError("a subgoal is [x, y]");
        w.subgoals[std::stoul(k.substr(1))] = {p[0], p[1]};
      }
    }
    if (j.contains("initial")) {
      auto p = j.at("initial").get<std::vector<double>>();
      if (p.size() != 3) throw InputError("initial state is [x, y, theta]");
      w.initial = {p[0], p[1], p[2]};
    }
    w.speed = j.value("speed", w.speed);
    w.dt = j.value("dt", w.dt);
    w.turn_rate = j.value("turn_rate", w.turn_rate);
    w.noise_std = j.value("noise_std", w.noise_std);
    w.max_steps = j.value("max_steps", w.max_steps);
    w.goal_reward = j.value("goal_reward", w.goal_reward);
    w.crash_penalty = j.value("crash_penalty", w.crash_penalty);
    w.shaping_scale = j.value("shaping_scale", w.shaping_scale);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("workspace config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw InputError("workspace config: bad subgoal key");
  }
  if (w.noise_std < 0.0 || w.speed <= 0.0 || w.dt <= 0.0 || w.max_steps == 0) {
    throw InputError("workspace config: speed, dt and max_steps must be positive, noise nonnegative");
  }
  return w;
}

inline nlohmann::json to_json(const WorkspaceConfig& w) {
  nlohmann::json regions = nlohmann::json::object(), obstacles = nlohmann::json::array(),
                 subgoals = nlohmann::json::object();
  for (const auto& [k, r] : w.regions) regions[k] = detail::rect_to_json(r);
  for (const auto& o : w.obstacles) obstacles.push_back(detail::rect_to_json(o));
  for (const auto& [q, p] : w.subgoals) subgoals[Dfa::name(q)] = {p[0], p[1]};
  return {{"bounds", detail::rect_to_json(w.bounds)},
          {"regions", regions},
          {"obstacles", obstacles},
          {"obstacle_prop", w.obstacle_prop},
          {"subgoals", subgoals},
          {"initial", {w.initial[0], w.initial[1], w.initial[2]}},
          {"speed", w.speed},
          {"dt", w.dt},
          {"turn_rate", w.turn_rate},
          {"noise_std", w.noise_std},
          {"max_steps", w.max_steps},
          {"goal_reward", w.goal_reward},
          {"crash_penalty", w.crash_penalty},
          {"shaping_scale", w.shaping_scale}};
}

// 5 x 5 m square, 0.5 m regions, two obstacles.
inline WorkspaceConfig default_workspace() {
  WorkspaceConfig w;
  auto square = [](double cx, double cy) { return Rect{cx - 0.25, cy - 0.25, cx + 0.25, cy + 0.25}; };
  w.regions = {{"A", square(1.25, 1.25)}, {"B", square(4.25, 4.25)}, {"C", square(4.25, 1.25)},
               {"D", square(1.25, 4.25)}};
  w.obstacles = {{0.5, 2.5, 1.75, 3.0}, {3.25, 2.5, 4.5, 3.0}};
  w.subgoals = {{0, {1.25, 1.25}}, {1, {4.25, 4.25}}, {2, {4.25, 1.25}}};
  return w;
}

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

// State (x, y, theta). Actions 0, 1, 2 turn at -rate, 0, +rate.
class DubinsEnv : public Environment {
 public:
  DubinsEnv(WorkspaceConfig w, PropositionSet props) : w_(std::move(w)), props_(std::move(props)) {
    for (const auto& [name, r] : w_.regions) props_.index(name);
    if (!w_.obstacles.empty()) props_.index(w_.obstacle_prop);
  }

  const WorkspaceConfig& workspace() const { return w_; }

  double control(std::size_t a) const {
    if (a > 2) throw InputError("Dubins car has three actions");
    return (static_cast<double>(a) - 1.0) * w_.turn_rate;
  }

  bool in_bounds(const StateVec& s) const { return w_.bounds.contains(s.at(0), s.at(1)); }

  bool in_obstacle(double x, double y) const {
    for (const auto& o : w_.obstacles) {
      if (o.contains(x, y)) return true;
    }
    return false;
  }

  Symbol label_at(double x, double y) const {
    Symbol l = 0;
    for (const auto& [name, r] : w_.regions) {
      if (r.contains(x, y)) l |= Symbol{1} << props_.index(name);
    }
    if (in_obstacle(x, y)) l |= Symbol{1} << props_.index(w_.obstacle_prop);
    return l;
  }

  StateVec reset(Rng&) override { return {w_.initial[0], w_.initial[1], w_.initial[2]}; }

  StepResult step(const StateVec& s, std::size_t action, Rng& rng) override {
    if (s.size() != 3) throw ShapeMismatch("Dubins state is (x, y, theta)");
    const double u = control(action);
    std::normal_distribution<double> noise(0.0, w_.noise_std);
    auto n = [&] { return w_.noise_std > 0.0 ? noise(rng) : 0.0; };
    const double nx = n(), ny = n(), nt = n();
    StepResult r;
    r.state = {s[0] + nx + w_.speed * std::cos(s[2]) * w_.dt, s[1] + ny + w_.speed * std::sin(s[2]) * w_.dt,
               wrap_angle(s[2] + nt + u * w_.dt)};
    r.label = label(r.state);
    r.terminal = !in_bounds(r.state);
    return r;
  }

  Symbol label(const StateVec& s) const override { return label_at(s.at(0), s.at(1)); }
  std::size_t action_count() const override { return 3; }
  std::size_t state_dimension() const override { return 3; }
  const PropositionSet& propositions() const override { return props_; }
  std::size_t max_episode_steps() const override { return w_.max_steps; }
  bool generative() const override { return true; }

  // Uniform over the free workspace with a uniform heading.
  StateVec sample_state(Rng& rng) override {
    std::uniform_real_distribution<double> ux(w_.bounds.x0, w_.bounds.x1), uy(w_.bounds.y0, w_.bounds.y1),
        ut(-M_PI, M_PI);
    for (;;) {
      const double x = ux(rng), y = uy(rng);
      if (!in_obstacle(x, y)) return {x, y, ut(rng)};
    }
  }

 private:
  WorkspaceConfig w_;
  PropositionSet props_;
};

// Planar velocity projected on the direction to the subgoal of q, scaled.
inline double shaping_term(const WorkspaceConfig& w, const StateVec& s, std::size_t q) {
  auto it = w.subgoals.find(q);
  if (it == w.subgoals.end()) throw NoSubgoal(q);
  const double dx = it->second[0] - s.at(0), dy = it->second[1] - s.at(1);
  const double d = std::hypot(dx, dy);
  if (d == 0.0) return 0.0;
  const double vx = w.speed * std::cos(s.at(2)), vy = w.speed * std::sin(s.at(2));
  return w.shaping_scale * (vx * dx + vy * dy) / d;
}

inline RewardShaper dubins_reward(WorkspaceConfig w, PropositionSet props) {
  const Symbol obstacle = props.find(w.obstacle_prop) ? Symbol{1} << props.index(w.obstacle_prop) : 0;
  return [w = std::move(w), obstacle](const ProductTransition& t) {
    if (t.accepted) return w.goal_reward;
    double r = shaping_term(w, t.state, t.q);
    if (t.base.terminal || (t.base.label & obstacle)) r += w.crash_penalty;
    return r;
  };
}

inline PropositionSet sequential_visiting_props() { return PropositionSet({"O", "D", "A", "B", "C"}); }

inline std::shared_ptr<ProductEnvironment> dubins_product(const WorkspaceConfig& w, const Dfa& d) {
  auto env = std::make_shared<DubinsEnv>(w, d.propositions());
  return std::make_shared<ProductEnvironment>(env, d, dubins_reward(w, d.propositions()));
}

// Rows t,x,y,theta,q,u,r for one Dubins episode.
inline std::string trajectory_csv(const Episode& ep, const WorkspaceConfig& w) {
  std::ostringstream out;
  out.precision(10);
  out << "t,x,y,theta,q,u,r\n";
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const auto& s = ep.steps[t];
    out << t << ',' << s.z[0] << ',' << s.z[1] << ',' << s.z[2] << ',' << s.z[3] << ','
        << (static_cast<double>(s.action) - 1.0) * w.turn_rate << ',' << s.reward << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Grid worlds

struct GridSpec {
  std::size_t width = 4, height = 4;
  double slip = 0.1;  // probability of moving in a uniformly random other direction
  std::vector<std::string> props;
  std::map<std::string, std::vector<std::array<std::size_t, 2>>> cells;  // prop -> cells
  std::array<std::size_t, 2> start{0, 0};
};

inline GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  try {
    g.width = j.value("width", g.width);
    g.height = j.value("height", g.height);
    g.slip = j.value("slip", g.slip);
    g.props = j.at("ap").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("cells").items()) {
      for (const auto& c : v) {
        auto xy = c.get<std::vector<std::size_t>>();
        if (xy.size() != 2) throw InputError("grid cells are [x, y]");
        g.cells[k].push_back({xy[0], xy[1]});
      }
    }
    if (j.contains("start")) {
      auto xy = j.at("start").get<std::vector<std::size_t>>();
      if (xy.size() != 2) throw InputError("grid start is [x, y]");
      g.start = {xy[0], xy[1]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid config: ") + e.what());
  }
  return g;
}

// Actions N, E, S, W; walls keep the agent in place.
inline LabeledMdp grid_world(const GridSpec& g) {
  if (g.width == 0 || g.height == 0) throw InputError("grid must be non-empty");
  if (!(g.slip >= 0.0 && g.slip <= 1.0)) throw InputError("slip must lie in [0, 1]");
  PropositionSet ap(g.props);
  const std::size_t n = g.width * g.height;
  auto id = [&](std::size_t x, std::size_t y) { return y * g.width + x; };
  std::vector<std::string> names;
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) names.push_back("c" + std::to_string(x) + "_" + std::to_string(y));
  }
  std::vector<Symbol> labels(n, 0);
  for (const auto& [p, cs] : g.cells) {
    const std::size_t bit = ap.index(p);
    for (auto [x, y] : cs) {
      if (x >= g.width || y >= g.height) throw InputError("grid cell outside the grid");
      labels[id(x, y)] |= Symbol{1} << bit;
    }
  }
  const int dx[4] = {0, 1, 0, -1}, dy[4] = {1, 0, -1, 0};
  auto move = [&](std::size_t x, std::size_t y, int d) {
    const long nx = static_cast<long>(x) + dx[d], ny = static_cast<long>(y) + dy[d];
    if (nx < 0 || ny < 0 || nx >= static_cast<long>(g.width) || ny >= static_cast<long>(g.height)) return id(x, y);
    return id(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
  };
  std::vector<Distribution> p;
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      for (int a = 0; a < 4; ++a) {
        std::map<std::size_t, double> acc;
        acc[move(x, y, a)] += 1.0 - g.slip;
        for (int o = 0; o < 4; ++o) {
          if (o != a) acc[move(x, y, o)] += g.slip / 3.0;
        }
        Distribution d;
        for (auto [s, pr] : acc) {
          if (pr > 0.0) d.push_back({s, pr});
        }
        p.push_back(std::move(d));
      }
    }
  }
  if (g.start[0] >= g.width || g.start[1] >= g.height) throw InputError("grid start outside the grid");
  return LabeledMdp(ap, names, {"N", "E", "S", "W"}, std::move(p), id(g.start[0], g.start[1]), labels);
}

}  // namespace tsynth
