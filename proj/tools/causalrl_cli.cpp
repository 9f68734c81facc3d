// Experiment driver for the fault-alarm causal RL loop.
//
//   causalrl run          train a (masked) agent and log per-episode metrics
//   causalrl discover     learn a causal graph from a trajectory dump
//   causalrl env-sample   roll episodes and dump transitions as JSONL
//   causalrl check-bounds run the randomized policy/value bound suites
//   causalrl metrics      re-aggregate summary.json from a metrics.jsonl

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "causalrl/causalrl.hpp"

using namespace causalrl;

namespace {

std::string default_truth_path() {
  const std::filesystem::path local = "data/alarm_ground_truth.csv";
  if (std::filesystem::exists(local)) return local.string();
  return std::string(CAUSALRL_DATA_DIR) + "/alarm_ground_truth.csv";
}

int cmd_run(CLI::App& app, int argc, char** argv) {
  std::string config_path, seeds_text, algo_text, mask_text, init_text, out_dir, truth_path;
  int episodes = -1, topk = -1;

  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seeds_text, "comma-separated seed list");
  app.add_option("--episodes", episodes, "episodes per seed");
  app.add_option("--algo", algo_text, "ppo or dqn");
  app.add_option("--mask", mask_text, "causal or none");
  app.add_option("--k", topk, "TopK mask width");
  app.add_option("--init-graph", init_text, "random:p | file:PATH | truth");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--truth", truth_path, "ground-truth graph csv");
  app.parse(argc, argv);

  RunConfig cfg;
  cfg.truth_graph_path = default_truth_path();
  if (!config_path.empty()) cfg = load_run_config(config_path);
  if (cfg.truth_graph_path.empty()) cfg.truth_graph_path = default_truth_path();

  // flags override file values
  if (!seeds_text.empty()) {
    cfg.seeds.clear();
    std::stringstream ss(seeds_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
  }
  if (episodes > 0) cfg.episodes = episodes;
  if (!algo_text.empty()) {
    const double eta_default = cfg.train.eta_causal;
    cfg.train.algo = algo_from_string(algo_text);
    if (eta_default == 0.3 && cfg.train.algo == Algo::dqn) cfg.train.eta_causal = 0.2;
  }
  if (!mask_text.empty()) cfg.mask_mode = mask_mode_from_string(mask_text);
  if (topk > 0) cfg.train.topk = topk;
  if (!init_text.empty()) cfg.init_graph = InitGraphSpec::parse(init_text);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!truth_path.empty()) cfg.truth_graph_path = truth_path;

  cfg.validate();
  std::cerr << "run: " << cfg.seeds.size() << " seed(s), " << cfg.episodes
            << " episodes, algo=" << to_string(cfg.train.algo)
            << ", mask=" << to_string(cfg.mask_mode) << "\n";
  const RunResult result = run_experiment(cfg);
  emit_metrics(result, cfg);

  const auto summary = summarize_records(result.all_records());
  std::cout << summary.dump(2) << "\n";
  std::cerr << "wrote " << cfg.out_dir << "/metrics.jsonl\n";
  return 0;
}

int cmd_discover(CLI::App& app, int argc, char** argv) {
  std::string trajectory_path, init_path, truth_path, out_graph, out_metrics;
  DiscoveryConfig dcfg;
  double penalty = -1.0;

  app.add_option("--trajectory", trajectory_path, "trajectory jsonl")->required();
  app.add_option("--init-graph", init_path, "initial graph csv (default: empty graph)");
  app.add_option("--truth", truth_path, "ground-truth csv for metrics");
  app.add_option("--out-graph", out_graph, "learned graph csv")->required();
  app.add_option("--out-metrics", out_metrics, "metrics json (requires --truth)");
  app.add_option("--att-threshold", dcfg.att_threshold, "orientation threshold");
  app.add_option("--n-min", dcfg.n_min, "treated samples per valid pair");
  app.add_option("--score-penalty", penalty, "fixed pruning penalty (default 0.5 ln T)");
  app.add_option("--max-prune-passes", dcfg.max_prune_passes, "removal budget multiplier");
  app.parse(argc, argv);
  if (penalty >= 0.0) dcfg.score_penalty = penalty;

  const std::vector<Transition> buffer = read_trajectory(trajectory_path);
  if (buffer.empty()) throw std::runtime_error("trajectory is empty");
  const int v = static_cast<int>(buffer.front().type_activity.size());

  std::optional<CausalGraph> truth;
  if (!truth_path.empty()) {
    truth = load_graph_csv(truth_path);
    if (truth->num_types() != v)
      throw std::runtime_error("truth graph type count does not match trajectory");
  }

  CausalGraph initial(v, truth ? truth->type_names() : std::vector<std::string>{});
  if (!init_path.empty()) {
    initial = load_graph_csv(init_path);
    if (truth) initial = align_to_universe(initial, truth->type_names());
    if (initial.num_types() != v)
      throw std::runtime_error("initial graph type count does not match trajectory");
  }

  const CausalGraph learned = update_structure(initial, buffer, dcfg);
  save_graph_adjacency(learned, out_graph);
  std::cerr << "wrote " << out_graph << " (" << learned.edge_count() << " edges)\n";

  if (truth) {
    const GraphMetrics m = graph_metrics(learned, *truth);
    nlohmann::json j;
    j["f1"] = m.f1;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["accuracy"] = m.accuracy;
    j["shd"] = m.shd;
    const std::string path = out_metrics.empty() ? out_graph + ".metrics.json" : out_metrics;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_env_sample(CLI::App& app, int argc, char** argv) {
  std::string config_path, out_path, truth_path, behavior = "uniform-all";
  int episodes = 10;
  std::uint64_t seed = 1;

  app.add_option("--config", config_path, "key=value config file (env.* keys)");
  app.add_option("--episodes", episodes, "episodes to roll");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--behavior", behavior, "uniform-all or uniform-active")
      ->check(CLI::IsMember({"uniform-all", "uniform-active"}));
  app.add_option("--truth", truth_path, "ground-truth graph csv");
  app.add_option("--out", out_path, "output jsonl")->required();
  app.parse(argc, argv);

  RunConfig cfg;
  cfg.truth_graph_path = default_truth_path();
  if (!config_path.empty()) cfg = load_run_config(config_path);
  if (!truth_path.empty()) cfg.truth_graph_path = truth_path;
  cfg.env.validate();

  const CausalGraph truth = load_graph_csv(cfg.truth_graph_path);
  if (truth.num_types() != cfg.env.num_types)
    throw std::runtime_error("truth graph does not match env.num_types");

  Rng rng_params = make_rng(seed, "env-params");
  Topology topo = cfg.env.topology_free
                      ? Topology::identity(cfg.env.num_nodes, 1)
                      : [&] {
                          Rng rng_topo = make_rng(seed, "topology");
                          return random_connected_topology(cfg.env.num_nodes,
                                                           cfg.topology_edge_prob,
                                                           cfg.env.max_hop, rng_topo);
                        }();
  Environment env(cfg.env, truth, std::move(topo), rng_params);

  Rng rng = make_rng(seed, "env");
  Rng rng_behavior = make_rng(seed, "behavior");
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);

  long total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(rng);
    while (!env.done()) {
      Transition tr;
      tr.obs = obs;
      tr.type_activity = env.type_activity();
      if (behavior == "uniform-all") {
        std::uniform_int_distribution<int> any(0, cfg.env.action_space() - 1);
        tr.action = ActionId(any(rng_behavior));
      } else {
        const CausalMask active = active_alarm_mask(obs, cfg.env.num_nodes, cfg.env.num_types);
        tr.action = ActionId(sample_uniform_allowed(active, rng_behavior));
      }
      const StepResult res = env.step(tr.action, rng);
      tr.next_obs = res.next_obs;
      tr.next_type_activity = env.type_activity();
      tr.reward = res.reward;
      tr.treated_types.assign(cfg.env.num_types, 0);
      if (res.treated_type >= 0) tr.treated_types[res.treated_type] = 1;
      tr.done = res.done;
      out << transition_to_json(tr).dump() << "\n";
      obs = res.next_obs;
      ++total;
    }
  }
  std::cerr << "wrote " << total << " transitions to " << out_path << "\n";
  return 0;
}

int cmd_check_bounds(CLI::App& app, int argc, char** argv) {
  int policy_instances = 1000, mdp_instances = 500;
  std::uint64_t seed = 7;
  app.add_option("--policy-instances", policy_instances, "policy-distance suite size");
  app.add_option("--mdp-instances", mdp_instances, "value-gap suite size");
  app.add_option("--seed", seed, "suite seed");
  app.parse(argc, argv);

  Rng rng_policy = make_rng(seed, "policy-suite");
  const BoundSuiteReport pol = run_policy_distance_suite(policy_instances, rng_policy);
  std::cout << "policy-distance bound: " << pol.held << "/" << pol.total
            << " held, tightest lhs/rhs = " << pol.tightest_ratio << "\n";

  Rng rng_mdp = make_rng(seed, "mdp-suite");
  const BoundSuiteReport gap = run_value_gap_suite(mdp_instances, rng_mdp);
  std::cout << "value-gap bound:       " << gap.held << "/" << gap.total
            << " held, tightest gap/bound = " << gap.tightest_ratio << "\n";

  const bool ok = pol.held == pol.total && gap.held == gap.total;
  std::cout << (ok ? "all bounds held\n" : "BOUND VIOLATION\n");
  return ok ? 0 : 1;
}

int cmd_metrics(CLI::App& app, int argc, char** argv) {
  std::string in_dir;
  app.add_option("--in", in_dir, "run directory containing metrics.jsonl")->required();
  app.parse(argc, argv);

  std::ifstream in(in_dir + "/metrics.jsonl");
  if (!in) throw std::runtime_error("cannot open " + in_dir + "/metrics.jsonl");
  std::vector<EpisodeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  const auto summary = summarize_records(records);
  std::ofstream out(in_dir + "/summary.json");
  if (!out) throw std::runtime_error("cannot write " + in_dir + "/summary.json");
  out << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: causalrl <run|discover|env-sample|check-bounds|metrics> [options]\n";
    return 2;
  }
  const std::string cmd = argv[1];
  CLI::App app{"fault-alarm causal reinforcement learning"};
  try {
    if (cmd == "run") return cmd_run(app, argc - 1, argv + 1);
    if (cmd == "discover") return cmd_discover(app, argc - 1, argv + 1);
    if (cmd == "env-sample") return cmd_env_sample(app, argc - 1, argv + 1);
    if (cmd == "check-bounds") return cmd_check_bounds(app, argc - 1, argv + 1);
    if (cmd == "metrics") return cmd_metrics(app, argc - 1, argv + 1);
    std::cerr << "unknown subcommand: " << cmd << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
