#pragma once

// Command-line front end: compile, decompose, solve, train, evaluate.
// Every command writes its artifacts plus manifest.json into one --out
// directory. Exit codes: 0 ok, 2 input error, 3 numerical error.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "tsynth/envs.hpp"
#include "tsynth/sac.hpp"
#include "tsynth/tabular.hpp"
#include "tsynth/topo.hpp"

namespace tsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kNumericalError = 3;

inline constexpr const char* kSequentialVisiting = "!O U ((A & ((!D & !O) U C)) | (D & ((!A & !O) U B)))";

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

// The digest git gives a blob with this content.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string data = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) throw Error("SHA-1 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --seed wins, then TEMPORAL_SYNTH_SEED, then 0.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* e = std::getenv("TEMPORAL_SYNTH_SEED"); e && *e) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(e, &used);
      if (used != std::string(e).size()) throw std::invalid_argument(e);
      return v;
    } catch (const std::exception&) {
      throw InputError(std::string("TEMPORAL_SYNTH_SEED is not an unsigned integer: ") + e);
    }
  }
  return 0;
}

class RunManifest {
 public:
  RunManifest(std::string command, fs::path out, std::uint64_t seed)
      : command_(std::move(command)), out_(std::move(out)), seed_(seed), started_(utc_now()) {}

  // Returns the content so callers read each input once.
  std::string input(const std::string& path) {
    std::string content = read_text(path);
    inputs_[path] = git_blob_sha1(content);
    return content;
  }
  void config(json c) { config_ = std::move(c); }

  void write() const {
    json j = {{"command", command_},      {"seed", seed_},          {"inputs", inputs_},
              {"config", config_},        {"out", out_.string()},   {"started", started_},
              {"finished", utc_now()}};
    write_text(out_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_;
  std::uint64_t seed_;
  std::string started_;
  json inputs_ = json::object();
  json config_ = json::object();
};

// Identifiers in order of first appearance, keywords skipped.
inline std::vector<std::string> infer_propositions(const std::string& text) {
  static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), ident); it != std::sregex_iterator(); ++it) {
    const std::string s = it->str();
    if (PropositionSet::is_keyword(s)) continue;
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

inline std::string levels_string(const LevelPartition& p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.num_levels(); ++i) {
    s += i ? ",[" : "[";
    const auto qs = p.states(i);
    for (std::size_t k = 0; k < qs.size(); ++k) s += (k ? "," : "") + Dfa::name(qs[k]);
    s += "]";
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Environments for train / evaluate

struct Setup {
  std::string env_name;
  std::shared_ptr<ProductEnvironment> env;
  LevelPartition part;
  TrainerConfig trainer;
  std::optional<WorkspaceConfig> workspace;
  std::string formula;
};

inline TrainerConfig grid_defaults(std::size_t cells) {
  TrainerConfig c;
  c.tau = 0.02;
  c.lambda0 = 100.0;
  c.nu0 = 1000.0;
  c.M = 3;
  c.N = 1000;
  c.K = 5;
  c.estimator = Estimator::Generative;
  c.approx.hidden = {64};
  c.approx.optimizer.kind = OptimizerKind::Adam;
  c.approx.encoding.kind = InputEncoding::Kind::OneHot;
  c.approx.encoding.one_hot_size = cells;
  return c;
}

// cfg sections: trainer, workspace (dubins), grid (grid), formula, label_mode.
// mode selects the decomposition: structural, or tabular (grid only).
inline Setup make_setup(const std::string& name, const json& cfg, const std::string& mode) {
  if (mode != "structural" && mode != "tabular") throw InputError("--mode must be structural or tabular");
  if (!cfg.is_object()) throw InputError("config must be a JSON object");
  Setup s;
  s.env_name = name;
  const json trainer = cfg.value("trainer", json::object());
  auto formula_dfa = [&](const PropositionSet& props, LabelMode default_mode) {
    s.formula = trim(cfg.value("formula", std::string(kSequentialVisiting)));
    const LabelMode lm = cfg.contains("label_mode")
                             ? label_mode_from_string(cfg.at("label_mode").get<std::string>())
                             : default_mode;
    return compile_dfa(parse_formula(s.formula, props), props, {10'000, lm});
  };
  if (name == "cartpole") {
    if (mode == "tabular") throw InputError("cartpole has no tabular model");
    s.env = cartpole_product();
    s.part = single_level_partition(s.env->dfa());
    s.trainer = trainer_config_from_json(trainer, cartpole_defaults());
  } else if (name == "dubins") {
    if (mode == "tabular") throw InputError("dubins has no tabular model");
    s.workspace = cfg.contains("workspace") ? workspace_from_json(cfg.at("workspace")) : default_workspace();
    const Dfa d = formula_dfa(sequential_visiting_props(), LabelMode::Exclusive);
    s.env = dubins_product(*s.workspace, d);
    s.part = decompose(d);
    s.trainer = trainer_config_from_json(trainer, sequential_visiting_defaults());
  } else if (name == "grid") {
    if (!cfg.contains("grid")) throw InputError("grid environment needs a \"grid\" config section");
    if (!cfg.contains("formula")) throw InputError("grid environment needs a formula");
    const GridSpec g = grid_from_json(cfg.at("grid"));
    LabeledMdp m = grid_world(g);
    const Dfa d = formula_dfa(m.ap(), LabelMode::Any);
    s.part = mode == "tabular" ? decompose(d, m) : decompose(d);
    const std::size_t steps = cfg.at("grid").value("max_steps", std::size_t{100});
    s.env = std::make_shared<ProductEnvironment>(std::make_shared<TabularEnvironment>(std::move(m), steps), d);
    s.trainer = trainer_config_from_json(trainer, grid_defaults(g.width * g.height));
  } else {
    throw InputError("unknown environment '" + name + "' (cartpole, dubins, grid)");
  }
  return s;
}

// --single-network implies --no-topo. Without levels the budget per level
// is multiplied by the number of levels merged so totals stay equal.
inline void apply_ablation(Setup& s, bool single_network, bool no_topo) {
  if (single_network) {
    s.trainer.approx.single_network = true;
    no_topo = true;
  }
  if (no_topo && s.part.num_levels() > 2) {
    s.trainer.M *= s.part.num_levels() - 1;
    s.part = flat_partition(s.part);
  }
}

// ---------------------------------------------------------------------------
// Commands

struct CompileArgs {
  std::string formula;
  std::vector<std::string> ap;
  bool exclusive = false;
  std::size_t state_budget = 10'000;
  std::string out;
};

inline int cmd_compile(const CompileArgs& a, std::ostream& out) {
  make_out_dir(a.out);
  RunManifest man("compile", a.out, 0);
  const std::string text = trim(man.input(a.formula));
  const PropositionSet props(a.ap.empty() ? infer_propositions(text) : a.ap);
  const LabelMode lm = a.exclusive ? LabelMode::Exclusive : LabelMode::Any;
  const Dfa d = compile_dfa(parse_formula(text, props), props, {a.state_budget, lm});
  write_text(fs::path(a.out) / "dfa.json", to_json(d).dump(2) + "\n");
  write_text(fs::path(a.out) / "dfa.dot", to_dot(d));
  std::size_t acc = 0;
  for (std::size_t q = 0; q < d.num_states(); ++q) acc += d.is_accepting(q) ? 1 : 0;
  out << "states " << d.num_states() << ", accepting " << acc;
  for (std::size_t q = 0; q < d.num_states(); ++q) {
    if (d.is_sink(q)) out << ", sink " << Dfa::name(q);
  }
  out << "\n";
  man.config({{"ap", props.names()}, {"label_mode", a.exclusive ? "exclusive" : "any"},
              {"state_budget", a.state_budget}});
  man.write();
  return kOk;
}

struct DecomposeArgs {
  std::string dfa;
  std::string mdp;
  std::string mode;  // empty: tabular when --mdp is given
  std::string out;
};

inline int cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
  make_out_dir(a.out);
  RunManifest man("decompose", a.out, 0);
  const Dfa d = dfa_from_json(parse_json(man.input(a.dfa), a.dfa));
  const std::string mode = a.mode.empty() ? (a.mdp.empty() ? "structural" : "tabular") : a.mode;
  CausalGraph g;
  if (mode == "structural") {
    g = causal_graph(d);
  } else if (mode == "tabular") {
    if (a.mdp.empty()) throw InputError("tabular mode needs --mdp");
    g = causal_graph(d, mdp_from_json(parse_json(man.input(a.mdp), a.mdp)));
  } else {
    throw InputError("--mode must be structural or tabular");
  }
  const LevelPartition p = level_sets(meta_modes(g), g, d);
  write_text(fs::path(a.out) / "levels.json", to_json(p).dump(2) + "\n");
  write_text(fs::path(a.out) / "quotient.dot", to_dot(p, g));
  out << "levels " << levels_string(p) << "\n";
  for (std::size_t i = 0; i < p.modes.size(); ++i) {
    if (!p.repaired[i]) continue;
    out << "repaired mode {";
    for (std::size_t k = 0; k < p.modes[i].size(); ++k) out << (k ? "," : "") << Dfa::name(p.modes[i][k]);
    out << "}: no outgoing edges, placed in L0\n";
  }
  man.config({{"mode", mode}});
  man.write();
  return kOk;
}

struct SolveArgs {
  std::string mdp, dfa, config, mode = "tabular", out;
};

inline int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  make_out_dir(a.out);
  RunManifest man("solve", a.out, 0);
  const LabeledMdp m = mdp_from_json(parse_json(man.input(a.mdp), a.mdp));
  const Dfa d = dfa_from_json(parse_json(man.input(a.dfa), a.dfa));
  const json cfg = a.config.empty() ? json::object() : parse_json(man.input(a.config), a.config);
  double gamma = 0.9;
  SolverConfig sc;
  try {
    gamma = cfg.value("gamma", gamma);
    sc.tau = cfg.value("tau", sc.tau);
    sc.tolerance = cfg.value("tolerance", sc.tolerance);
    sc.max_iterations = cfg.value("max_iterations", sc.max_iterations);
  } catch (const json::exception& e) {
    throw InputError(std::string("solver config: ") + e.what());
  }
  LevelPartition part;
  if (a.mode == "tabular") part = decompose(d, m);
  else if (a.mode == "structural") part = decompose(d);
  else throw InputError("--mode must be structural or tabular");

  const ProductMdp p = build_product(m, d, gamma);
  const ValueTable v = solve_topological(p, part, sc);
  const ValueTable flat = value_iteration(p, sc);
  const double gap = sup_distance(v, flat);
  write_text(fs::path(a.out) / "values.csv", values_csv(v, p));
  write_text(fs::path(a.out) / "policy.json", policy_json(extract_policy(v, p, sc), p).dump(2) + "\n");

  std::ostringstream line;
  line.precision(6);
  line << std::fixed << "V" << p.state_name(p.initial()) << " = " << v[p.initial()] << "\n";
  out << line.str();
  out << "levels " << levels_string(part) << "\n";
  std::ostringstream gl;
  gl.precision(3);
  gl << std::scientific << "gap topological vs flat = " << gap << " (tolerance " << sc.tolerance << ")\n";
  out << gl.str();
  man.config({{"gamma", gamma}, {"tau", sc.tau}, {"tolerance", sc.tolerance},
              {"max_iterations", sc.max_iterations}, {"mode", a.mode}});
  man.write();
  // Both solves stop at a sup-norm step below tolerance; their fixed points
  // differ by at most tolerance * gamma / (1 - gamma) each.
  const double bound = 2.0 * sc.tolerance / (1.0 - gamma) + 1e-12;
  if (gap > bound) {
    err << "topological and flat solutions disagree beyond the tolerance bound " << bound << "\n";
    return kNumericalError;
  }
  return kOk;
}

struct TrainArgs {
  std::string env;
  std::string config, formula;
  std::string mode = "structural";
  bool single_network = false, no_topo = false;
  std::size_t eval_interval = 0, eval_episodes = 10;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  make_out_dir(a.out);
  const std::uint64_t seed = resolve_seed(a.seed);
  RunManifest man("train", a.out, seed);
  json base = a.config.empty() ? json::object() : parse_json(man.input(a.config), a.config);
  if (!a.formula.empty()) base["formula"] = trim(man.input(a.formula));

  Setup s = make_setup(a.env, base, a.mode);
  apply_ablation(s, a.single_network, a.no_topo);
  s.trainer.seed = seed;

  json effective = {{"env", a.env},
                    {"mode", a.mode},
                    {"single_network", a.single_network},
                    {"no_topo", a.no_topo || a.single_network},
                    {"trainer", to_json(s.trainer)},
                    {"levels", to_json(s.part)}};
  if (!s.formula.empty()) effective["formula"] = s.formula;
  if (s.workspace) effective["workspace"] = to_json(*s.workspace);
  if (base.contains("grid")) effective["grid"] = base.at("grid");
  write_text(fs::path(a.out) / "config.json", effective.dump(2) + "\n");
  man.config(effective);

  // Enough to rebuild the environment and approximator layout at evaluation.
  const json extra = {{"env", a.env},
                      {"config", base},
                      {"mode", a.mode},
                      {"single_network", a.single_network},
                      {"no_topo", a.no_topo},
                      {"seed", seed}};

  std::ofstream metrics(fs::path(a.out) / "metrics.csv", std::ios::binary);
  if (!metrics) throw InputError("cannot write metrics.csv");
  metrics << metrics_header() << "\n";
  std::ofstream evals;
  TrainHooks hooks;
  hooks.on_metrics = [&](const MetricsRow& r) { metrics << to_csv(r) << "\n"; };
  if (a.eval_interval) {
    evals.open(fs::path(a.out) / "eval.csv", std::ios::binary);
    evals << "env_steps,rate,mean_length,mean_return\n";
    hooks.eval_interval = a.eval_interval;
    hooks.on_eval = [&](std::size_t steps, const ModularApproximator& m) {
      EvalReport r;
      try {
        r = evaluate(m, *s.env, a.eval_episodes, seed + steps);
      } catch (const UnknownAutomatonState&) {
        return;  // the initial automaton state belongs to a level not reached yet
      }
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g", steps, r.rate, r.mean_length, r.mean_return);
      evals << buf << "\n";
      evals.flush();
    };
  }
  hooks.on_level = [&](std::size_t level, const std::vector<std::size_t>& qs, const ModularApproximator& m) {
    const fs::path p = fs::path(a.out) / ("checkpoint_L" + std::to_string(level) + ".bin");
    write_checkpoint(p.string(), m, level, qs, extra);
    metrics.flush();
    out << "level " << level << " trained, checkpoint " << p.filename().string() << "\n";
  };

  TrainResult r = train(*s.env, s.part, s.trainer, hooks);
  metrics.flush();

  std::vector<std::size_t> all;
  for (std::size_t i = 1; i < s.part.num_levels(); ++i) {
    for (auto q : s.part.states(i)) all.push_back(q);
  }
  std::sort(all.begin(), all.end());
  write_checkpoint((fs::path(a.out) / "model.bin").string(), r.model, s.part.num_levels() - 1, all, extra);

  json levels = json::array();
  for (const auto& l : r.levels) {
    json names = json::array();
    for (auto q : l.states) names.push_back(Dfa::name(q));
    levels.push_back({{"level", l.level}, {"states", names}, {"violations", l.violations},
                      {"nu", l.nus}, {"lambda", l.lambdas}, {"env_steps", l.env_steps}});
  }
  write_text(fs::path(a.out) / "levels.json",
             json({{"levels", levels}, {"env_steps", r.env_steps}, {"iterations", r.iterations},
                   {"budget_exhausted", r.budget_exhausted}})
                     .dump(2) +
                 "\n");
  out << "trained " << r.levels.size() << " level(s), " << r.iterations << " updates, " << r.env_steps
      << " environment steps" << (r.budget_exhausted ? " (budget exhausted)" : "") << "\n";
  man.write();
  return kOk;
}

struct EvaluateArgs {
  std::vector<std::string> checkpoints;
  std::string env, config, formula;
  std::string mode = "structural";
  std::size_t episodes = 200, workers = 1, max_len = 0;
  bool greedy = false;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  make_out_dir(a.out);
  const std::uint64_t seed = resolve_seed(a.seed);
  RunManifest man("evaluate", a.out, seed);

  std::vector<CheckpointData> ckpts;
  for (const auto& c : a.checkpoints) {
    man.input(c);
    ckpts.push_back(read_checkpoint(c));
  }
  std::string env = a.env, mode = a.mode;
  bool single = false, no_topo = false;
  json base = json::object();
  if (!ckpts.empty()) {
    const json& x = ckpts[0].header.at("extra");
    if (!x.is_object() || !x.contains("env")) throw CheckpointMismatch("checkpoint lacks environment metadata");
    if (!env.empty() && env != x.at("env")) {
      throw CheckpointMismatch("checkpoint was trained on " + x.at("env").get<std::string>() + ", not " + env);
    }
    env = x.at("env").get<std::string>();
    base = x.value("config", json::object());
    mode = x.value("mode", mode);
    single = x.value("single_network", false);
    no_topo = x.value("no_topo", false);
  } else {
    if (env.empty()) throw InputError("evaluate needs a checkpoint or --env");
    if (!a.config.empty()) base = parse_json(man.input(a.config), a.config);
    if (!a.formula.empty()) base["formula"] = trim(man.input(a.formula));
  }

  Setup s = make_setup(env, base, mode);
  apply_ablation(s, single, no_topo);
  ModularApproximator m = make_approximator(*s.env, s.part, s.trainer);
  if (ckpts.empty()) {
    // Fresh nets emit uniform policies.
    for (std::size_t i = 1; i < s.part.num_levels(); ++i) m.activate(s.part.states(i));
    m.freeze_all();
  }
  for (const auto& c : ckpts) load_checkpoint(c, m);

  const EvalReport r = evaluate(m, *s.env, a.episodes, seed, a.workers, a.max_len, a.greedy);
  json report = to_json(r);
  report["env"] = env;
  report["seed"] = seed;
  report["policy"] = ckpts.empty() ? "uniform" : (a.greedy ? "greedy" : "stochastic");
  report["checkpoints"] = a.checkpoints;
  write_text(fs::path(a.out) / "report.json", report.dump(2) + "\n");

  if (s.workspace) {
    Rng rng = episode_rng(seed, 0);
    const std::size_t len = a.max_len ? a.max_len : s.env->max_episode_steps();
    write_text(fs::path(a.out) / "trajectory.csv", trajectory_csv(run_episode(m, *s.env, len, rng, a.greedy), *s.workspace));
  }
  out << report.dump(2) << "\n";
  man.config({{"env", env}, {"episodes", a.episodes}, {"workers", a.workers}, {"greedy", a.greedy},
              {"max_len", a.max_len}, {"mode", mode}, {"single_network", single}, {"no_topo", no_topo}});
  man.write();
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Temporal-logic policy synthesis with topological decomposition"};
  app.name("tsynth");
  app.require_subcommand(1);

  CompileArgs ca;
  auto* compile = app.add_subcommand("compile", "Compile an scLTL formula to a DFA (dfa.json, dfa.dot)");
  compile->add_option("formula", ca.formula, "File holding the formula")->required();
  compile->add_option("--ap", ca.ap, "Atomic propositions, comma separated (default: identifiers in order)")
      ->delimiter(',');
  compile->add_flag("--exclusive", ca.exclusive, "At most one proposition holds per letter");
  compile->add_option("--state-budget", ca.state_budget, "Abort beyond this many DFA states");
  compile->add_option("--out", ca.out, "Output directory")->required();

  DecomposeArgs da;
  auto* decomp = app.add_subcommand("decompose", "Level sets over meta-modes (levels.json, quotient.dot)");
  decomp->add_option("dfa", da.dfa, "DFA JSON")->required();
  decomp->add_option("--mdp", da.mdp, "Labeled MDP JSON for the tabular causal graph");
  decomp->add_option("--mode", da.mode, "structural or tabular");
  decomp->add_option("--out", da.out, "Output directory")->required();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Topological mellowmax value iteration (values.csv, policy.json)");
  solve->add_option("mdp", sa.mdp, "Labeled MDP JSON")->required();
  solve->add_option("dfa", sa.dfa, "DFA JSON")->required();
  solve->add_option("--config", sa.config, "JSON with gamma, tau, tolerance, max_iterations");
  solve->add_option("--mode", sa.mode, "Decomposition: tabular (default) or structural");
  solve->add_option("--out", sa.out, "Output directory")->required();

  TrainArgs ta;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Sequential actor-critic training");
  train_cmd->add_option("env", ta.env, "cartpole, dubins or grid")->required();
  train_cmd->add_option("--config", ta.config, "JSON with trainer, workspace, grid, formula sections");
  train_cmd->add_option("--formula", ta.formula, "Formula file (overrides the config)");
  train_cmd->add_option("--mode", ta.mode, "Decomposition: structural (default) or tabular");
  train_cmd->add_flag("--single-network", ta.single_network, "One shared network pair; implies --no-topo");
  train_cmd->add_flag("--no-topo", ta.no_topo, "Train all levels jointly");
  train_cmd->add_option("--eval-interval", ta.eval_interval, "Environment steps between evaluations (eval.csv)");
  train_cmd->add_option("--eval-episodes", ta.eval_episodes, "Episodes per periodic evaluation");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Seed (default: TEMPORAL_SYNTH_SEED or 0)");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();

  EvaluateArgs ea;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Success rate of a trained or uniform policy (report.json)");
  eval_cmd->add_option("checkpoints", ea.checkpoints, "Checkpoint files (none: uniform policy)");
  eval_cmd->add_option("--env", ea.env, "Environment when no checkpoint is given");
  eval_cmd->add_option("--config", ea.config, "Environment config when no checkpoint is given");
  eval_cmd->add_option("--formula", ea.formula, "Formula file when no checkpoint is given");
  eval_cmd->add_option("--episodes", ea.episodes, "Number of episodes");
  eval_cmd->add_option("--workers", ea.workers, "Rollout threads");
  eval_cmd->add_option("--max-len", ea.max_len, "Episode cap (default: the environment's)");
  eval_cmd->add_flag("--greedy", ea.greedy, "Act by argmax instead of sampling");
  auto* eval_seed_opt = eval_cmd->add_option("--seed", eval_seed, "Seed (default: TEMPORAL_SYNTH_SEED or 0)");
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  try {
    if (*compile) return cmd_compile(ca, out);
    if (*decomp) return cmd_decompose(da, out);
    if (*solve) return cmd_solve(sa, out, err);
    if (*train_cmd) {
      if (train_seed_opt->count()) ta.seed = train_seed;
      return cmd_train(ta, out);
    }
    if (*eval_cmd) {
      if (eval_seed_opt->count()) ea.seed = eval_seed;
      return cmd_evaluate(ea, out);
    }
  } catch (const LevelError& e) {
    err << "error: " << e.what() << "\n";
    return e.numerical() ? kNumericalError : kInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace tsynth::cli
