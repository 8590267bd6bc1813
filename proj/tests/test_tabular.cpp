#include <gtest/gtest.h>

#include "support.hpp"
#include "tsynth/tabular.hpp"

using namespace tsynth;
using namespace tsynth::testing;

TEST(Mellowmax, Examples) {
  std::vector<double> one{0.37};
  EXPECT_DOUBLE_EQ(mellowmax(one, 0.5), 0.37);
  std::vector<double> q{1.0, 0.0};
  EXPECT_NEAR(mellowmax(q, 1.0), 1.0 + std::log(1.0 + std::exp(-1.0)), 1e-14);
  EXPECT_NEAR(mellowmax(q, 1.0), 1.3133, 1e-4);
  const double small = mellowmax(q, 1e-6);
  EXPECT_GE(small, 1.0);
  EXPECT_LE(small, 1.0 + 1e-5);
  std::vector<double> big{1000.0, 999.0};
  EXPECT_TRUE(std::isfinite(mellowmax(big, 1e-3)));
}

TEST(Softmax, Examples) {
  std::vector<double> q{1.0, 0.0};
  auto p = softmax(q, 1.0);
  EXPECT_NEAR(p[0], 0.7311, 1e-4);
  EXPECT_NEAR(p[1], 0.2689, 1e-4);
  std::vector<double> sym{2.0, 2.0, 2.0};
  for (double x : softmax(sym, 0.1)) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(ValueIteration, TwoState) {
  ProductMdp p = build_product(two_state_mdp(), two_state_dfa(), 0.9);
  ValueTable v = value_iteration(p, {1e-6, 1e-10, 100'000});
  EXPECT_NEAR(v[p.index(1, 0)], 0.8696, 1e-3);
  EXPECT_NEAR(v[p.index(0, 0)], 0.7115, 1e-3);
  EXPECT_EQ(v[p.index(2, 1)], 0.0);
}

TEST(ValueIteration, GammaZeroIsOneSweep) {
  std::mt19937_64 gen(1);
  PropositionSet ap({"x", "y"});
  LabeledMdp m = random_mdp(gen, ap, 6, 3);
  Dfa d = random_dfa(gen, ap, 4);
  ProductMdp p = build_product(m, d, 0.0);
  SolverConfig cfg{0.3, 1e-12, 1000};
  ValueTable v = value_iteration(p, cfg);
  auto zero = zero_set(p);
  for (std::size_t z = 0; z < p.num_states(); ++z) {
    if (zero[z]) {
      EXPECT_EQ(v[z], 0.0);
      continue;
    }
    std::vector<double> r(p.num_actions());
    for (std::size_t a = 0; a < r.size(); ++a) r[a] = p.reward(z, a);
    EXPECT_NEAR(v[z], mellowmax(r, cfg.tau), 1e-12);
  }
}

TEST(ValueIteration, ZeroRewardsGiveZero) {
  PropositionSet ap({"g"});
  LabeledMdp m(ap, {"s0", "s1"}, {"a", "b"}, {{{1, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {{1, 1.0}}}, 0, {0, 0});
  ProductMdp p = build_product(m, compile_dfa(parse_formula("F g", ap), ap), 0.9);
  ValueTable v = value_iteration(p, {0.5, 1e-10, 1000});
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(ValueIteration, NoConvergence) {
  ProductMdp p = build_product(two_state_mdp(), two_state_dfa(), 0.99);
  try {
    value_iteration(p, {1e-6, 1e-14, 3});
    FAIL();
  } catch (const NoConvergence& e) {
    EXPECT_EQ(e.iterations(), 3u);
    EXPECT_GT(e.last_delta(), 0.0);
  }
  EXPECT_THROW(value_iteration(p, {0.0, 1e-10, 3}), InputError);
}

TEST(ValueIteration, Contraction) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PropositionSet ap({"x", "y"});
  for (int t = 0; t < 50; ++t) {
    LabeledMdp m = random_mdp(gen, ap, 2 + t % 7, 1 + t % 3);
    Dfa d = random_dfa(gen, ap, 2 + t % 4);
    const double gamma = 0.5 + 0.49 * (t % 10) / 10.0;
    ProductMdp p = build_product(m, d, gamma);
    ValueTable a(p.num_states()), b(p.num_states());
    for (auto& x : a) x = u(gen);
    for (auto& x : b) x = u(gen);
    std::vector<bool> all(p.num_states(), true);
    SolverConfig cfg{0.2, 1e-10, 10};
    auto ta = mellowmax_backup(a, p, cfg, all), tb = mellowmax_backup(b, p, cfg, all);
    EXPECT_LE(sup_distance(ta, tb), gamma * sup_distance(a, b) + 1e-12);
  }
}

TEST(ValueIteration, MonotoneInRewards) {
  // Raising the probability of reaching the goal cannot lower any value.
  PropositionSet ap({"g"});
  auto make = [&](double pg) {
    LabeledMdp m(ap, {"s0", "s1"}, {"a", "b"},
                 {{{0, 1 - pg}, {1, pg}}, {{0, 0.8}, {1, 0.2}}, {{1, 1.0}}, {{1, 1.0}}}, 0, {0, 1});
    return build_product(m, compile_dfa(parse_formula("F g", ap), ap), 0.9);
  };
  SolverConfig cfg{0.1, 1e-12, 100'000};
  ValueTable lo = value_iteration(make(0.3), cfg), hi = value_iteration(make(0.6), cfg);
  for (std::size_t z = 0; z < lo.size(); ++z) EXPECT_GE(hi[z], lo[z] - 1e-12);
}

TEST(ExtractPolicy, Normalized) {
  std::mt19937_64 gen(4);
  PropositionSet ap({"x", "y"});
  LabeledMdp m = random_mdp(gen, ap, 7, 3);
  Dfa d = random_dfa(gen, ap, 4);
  ProductMdp p = build_product(m, d, 0.9);
  SolverConfig cfg{0.05, 1e-11, 100'000};
  PolicyTable pi = extract_policy(value_iteration(p, cfg), p, cfg);
  for (const auto& row : pi) {
    double s = 0.0;
    for (double x : row) {
      EXPECT_GT(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(ExtractPolicy, SingleActionAndSymmetry) {
  ProductMdp p = build_product(two_state_mdp(), two_state_dfa(), 0.9);
  SolverConfig cfg{0.1, 1e-12, 100'000};
  for (const auto& row : extract_policy(value_iteration(p, cfg), p, cfg)) EXPECT_DOUBLE_EQ(row[0], 1.0);

  PropositionSet ap({"g"});
  LabeledMdp m(ap, {"s0", "s1"}, {"a", "b"}, {{{1, 0.5}, {0, 0.5}}, {{1, 0.5}, {0, 0.5}}, {{1, 1.0}}, {{1, 1.0}}},
               0, {0, 1});
  ProductMdp sym = build_product(m, compile_dfa(parse_formula("F g", ap), ap), 0.9);
  auto pi = extract_policy(value_iteration(sym, cfg), sym, cfg);
  EXPECT_NEAR(pi[sym.initial()][0], 0.5, 1e-12);
}

TEST(ZeroSet, HopelessStatesAreZero) {
  PropositionSet ap({"g"});
  // s1 is a trap that never sees g.
  LabeledMdp m(ap, {"s0", "s1", "s2"}, {"a", "b"},
               {{{1, 1.0}}, {{2, 1.0}}, {{1, 1.0}}, {{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}}, 0, {0, 0, 1});
  ProductMdp p = build_product(m, compile_dfa(parse_formula("F g", ap), ap), 0.9);
  auto zero = zero_set(p);
  EXPECT_TRUE(zero[p.index(1, 0)]);
  EXPECT_FALSE(zero[p.index(0, 0)]);
  ValueTable v = value_iteration(p, {0.5, 1e-12, 100'000});
  EXPECT_EQ(v[p.index(1, 0)], 0.0);
  EXPECT_GT(v[p.index(0, 0)], 0.9);
}

TEST(Topological, MatchesFlatOnRandomProducts) {
  std::mt19937_64 gen(99);
  PropositionSet ap({"x", "y"});
  SolverConfig cfg{0.05, 1e-11, 200'000};
  for (int t = 0; t < 30; ++t) {
    LabeledMdp m = random_mdp(gen, ap, 2 + t % 7, 1 + t % 3);
    Dfa d = random_dfa(gen, ap, 2 + t % 4);
    ProductMdp p = build_product(m, d, 0.9);
    ValueTable flat = value_iteration(p, cfg);
    ValueTable topo = solve_topological(p, decompose(d), cfg);
    EXPECT_LT(sup_distance(flat, topo), 1e-8) << "trial " << t;
  }
}

TEST(Export, CsvAndJson) {
  ProductMdp p = build_product(two_state_mdp(), two_state_dfa(), 0.9);
  SolverConfig cfg;
  ValueTable v = value_iteration(p, cfg);
  const std::string csv = values_csv(v, p);
  EXPECT_EQ(csv.substr(0, 10), "s,q,value\n");
  EXPECT_NE(csv.find("s1,q0,0.869565"), std::string::npos);
  EXPECT_EQ(values_json(v, p).size(), 6u);
  EXPECT_EQ(policy_json(extract_policy(v, p, cfg), p).size(), 6u);
}
