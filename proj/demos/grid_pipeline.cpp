// Tabular pipeline on a slippery grid: formula -> DFA -> product -> levels ->
// topological value iteration, then a greedy rollout of the soft policy.

#include <iostream>

#include "tsynth/envs.hpp"
#include "tsynth/tabular.hpp"
#include "tsynth/topo.hpp"

int main() {
  using namespace tsynth;
  GridSpec g;
  g.width = 4;
  g.height = 4;
  g.slip = 0.1;
  g.props = {"a", "b", "h"};
  g.cells = {{"a", {{3, 0}}}, {"b", {{3, 3}}}, {"h", {{1, 1}, {2, 2}}}};
  const LabeledMdp m = grid_world(g);

  const Formula f = to_pnf(parse_formula("!h U (a & (!h U b))", m.ap()));
  const Dfa d = compile_dfa(f, m.ap());
  const LevelPartition part = decompose(d, m);
  const ProductMdp p = build_product(m, d, 0.95);

  const SolverConfig cfg{0.01, 1e-10, 100'000};
  const ValueTable v = solve_topological(p, part, cfg);
  std::cout << "DFA states " << d.num_states() << ", levels " << part.num_levels() << "\n";
  std::cout << "V(initial) = " << v[p.initial()] << "\n";

  // Best action per grid cell while still looking for a.
  const PolicyTable pi = extract_policy(v, p, cfg);
  const std::size_t q = p.q_of(p.initial());
  for (std::size_t y = g.height; y-- > 0;) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const auto& row = pi[p.index(y * g.width + x, q)];
      const auto a = std::max_element(row.begin(), row.end()) - row.begin();
      std::cout << p.action_names()[a][0] << ' ';
    }
    std::cout << "\n";
  }
}
