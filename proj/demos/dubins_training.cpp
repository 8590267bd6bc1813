// Short level-by-level training run on the sequential-visiting task in the
// Dubins workspace, printing per-level violations and a success estimate.

#include <iostream>

#include "tsynth/envs.hpp"
#include "tsynth/sac.hpp"
#include "tsynth/topo.hpp"

int main(int argc, char** argv) {
  using namespace tsynth;
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 300;

  const PropositionSet ap = sequential_visiting_props();
  const Formula f = to_pnf(parse_formula("!O U ((A & ((!D & !O) U C)) | (D & ((!A & !O) U B)))", ap));
  const Dfa d = compile_dfa(f, ap, {10'000, LabelMode::Exclusive});
  const LevelPartition part = decompose(d);
  auto env = dubins_product(default_workspace(), d);

  TrainerConfig cfg = sequential_visiting_defaults();
  cfg.lambda0 = 1.0;
  cfg.nu0 = 1.0;
  cfg.decay_steps = 0;
  cfg.estimator = Estimator::Generative;
  cfg.N = n;
  cfg.seed = 1;

  TrainHooks hooks;
  hooks.on_level = [](std::size_t level, const std::vector<std::size_t>& qs, const ModularApproximator&) {
    std::cout << "level " << level << " done (" << qs.size() << " automaton states)\n";
  };
  const TrainResult res = train(*env, part, cfg, hooks);
  for (const auto& l : res.levels) {
    std::cout << "L" << l.level << ": violation " << l.violations.front() << " -> " << l.violations.back() << "\n";
  }
  const EvalReport r = evaluate(res.model, *env, 50, 1000);
  std::cout << "success " << r.successes << "/" << r.episodes << ", mean length " << r.mean_length << "\n";
}
