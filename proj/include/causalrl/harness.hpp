#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "causalrl/agents.hpp"
#include "causalrl/discovery.hpp"
#include "causalrl/env.hpp"
#include "causalrl/graph.hpp"
#include "causalrl/metrics.hpp"
#include "causalrl/rng.hpp"
#include "causalrl/topology.hpp"

namespace causalrl {

struct InitGraphSpec {
  enum class Kind { random, file, truth };
  Kind kind = Kind::random;
  double edge_prob = 0.1;  // random
  std::string path;        // file

  static InitGraphSpec parse(const std::string& text) {
    InitGraphSpec spec;
    if (text == "truth") {
      spec.kind = Kind::truth;
    } else if (text.rfind("random:", 0) == 0) {
      spec.kind = Kind::random;
      spec.edge_prob = std::stod(text.substr(7));
    } else if (text.rfind("file:", 0) == 0) {
      spec.kind = Kind::file;
      spec.path = text.substr(5);
    } else {
      throw std::invalid_argument("init_graph must be random:p, file:PATH or truth: " + text);
    }
    return spec;
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::truth: return "truth";
      case Kind::file: return "file:" + path;
      case Kind::random: {
        std::ostringstream os;
        os << "random:" << edge_prob;
        return os.str();
      }
    }
    return "";
  }
};

enum class MaskMode { causal, none };

inline MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "causal") return MaskMode::causal;
  if (s == "none") return MaskMode::none;
  throw std::invalid_argument("mask mode must be causal or none: " + s);
}

inline std::string to_string(MaskMode m) { return m == MaskMode::causal ? "causal" : "none"; }

struct RunConfig {
  EnvConfig env;
  TrainConfig train;
  DiscoveryConfig discovery;
  int episodes = 100;
  std::vector<std::uint64_t> seeds = {1};
  InitGraphSpec init_graph;
  MaskMode mask_mode = MaskMode::causal;
  bool discovery_enabled = true;
  std::string out_dir = "out";
  std::string truth_graph_path = "data/alarm_ground_truth.csv";
  std::string topology_file;       // empty: generate randomly
  double topology_edge_prob = 0.1;
  int threads = 0;                 // 0: one worker per seed up to hw limit

  void validate() const {
    env.validate();
    train.validate();
    if (episodes < 1) throw std::invalid_argument("run: episodes must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("run: at least one seed required");
    if (init_graph.kind == InitGraphSpec::Kind::random &&
        (init_graph.edge_prob < 0.0 || init_graph.edge_prob > 1.0))
      throw std::invalid_argument("run: init graph edge probability must be in [0,1]");
    if (topology_edge_prob < 0.0 || topology_edge_prob > 1.0)
      throw std::invalid_argument("run: topology edge probability must be in [0,1]");
    if (discovery.att_threshold <= 0.0) throw std::invalid_argument("run: att threshold must be > 0");
    if (discovery.n_min < 1) throw std::invalid_argument("run: n_min must be >= 1");
  }
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  double cumulative_reward = 0.0;
  int intervention_steps = 0;
  double mean_active_alarms = 0.0;
  GraphMetrics graph;
  double wall_ms = 0.0;  // kept out of metrics.jsonl so reruns are byte-identical
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> records;
  CausalGraph final_graph;
  long graph_selection_reads = 0;  // times action selection consulted the graph
  long structure_updates = 0;
  long env_steps = 0;
};

struct RunResult {
  std::vector<SeedResult> per_seed;
  std::vector<std::string> type_names;

  std::vector<EpisodeRecord> all_records() const {
    std::vector<EpisodeRecord> out;
    for (const auto& s : per_seed)
      out.insert(out.end(), s.records.begin(), s.records.end());
    return out;
  }
};

// --------------------------------------------------------------------------
// Config file: flat key=value lines with env./train./discovery. prefixes.

inline std::map<std::string, std::string> parse_kv_file(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_long = [&] { return std::stol(value); };
  auto as_double = [&] { return std::stod(value); };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("expected boolean for " + key + ": " + value);
  };

  if (key == "env.num_nodes") cfg.env.num_nodes = as_int();
  else if (key == "env.num_types") cfg.env.num_types = as_int();
  else if (key == "env.step_max") cfg.env.step_max = as_int();
  else if (key == "env.max_hop") cfg.env.max_hop = as_int();
  else if (key == "env.alpha_lo") cfg.env.alpha_range[0] = as_double();
  else if (key == "env.alpha_hi") cfg.env.alpha_range[1] = as_double();
  else if (key == "env.mu_lo") cfg.env.mu_range[0] = as_double();
  else if (key == "env.mu_hi") cfg.env.mu_range[1] = as_double();
  else if (key == "env.kappa") cfg.env.kernel_kappa = as_double();
  else if (key == "env.warmup_time_range") cfg.env.warmup_time_range = as_int();
  else if (key == "env.root_cause_num") cfg.env.root_cause_num = as_int();
  else if (key == "env.count_cap") cfg.env.count_cap = as_int();
  else if (key == "env.boost_scale") cfg.env.boost_scale = as_double();
  else if (key == "env.topology_free") cfg.env.topology_free = as_bool();
  else if (key == "env.topology_edge_prob") cfg.topology_edge_prob = as_double();
  else if (key == "env.topology_file") cfg.topology_file = value;
  else if (key == "train.algo") cfg.train.algo = algo_from_string(value);
  else if (key == "train.lr") cfg.train.lr = as_double();
  else if (key == "train.gamma") cfg.train.gamma = as_double();
  else if (key == "train.batch") cfg.train.batch = as_int();
  else if (key == "train.hidden") cfg.train.hidden = as_int();
  else if (key == "train.clip") cfg.train.clip = as_double();
  else if (key == "train.k_epochs") cfg.train.k_epochs = as_int();
  else if (key == "train.ppo_update_timestep") cfg.train.ppo_update_timestep = as_int();
  else if (key == "train.gae_lambda") cfg.train.gae_lambda = as_double();
  else if (key == "train.entropy_coef") cfg.train.entropy_coef = as_double();
  else if (key == "train.value_coef") cfg.train.value_coef = as_double();
  else if (key == "train.replay_capacity") cfg.train.replay_capacity = as_int();
  else if (key == "train.dqn_update_timestep") cfg.train.dqn_update_timestep = as_int();
  else if (key == "train.target_sync") cfg.train.target_sync = as_int();
  else if (key == "train.eps_greedy") cfg.train.eps_greedy = as_double();
  else if (key == "train.eta_causal") cfg.train.eta_causal = as_double();
  else if (key == "train.random_sample_timestep") cfg.train.random_sample_timestep = as_long();
  else if (key == "train.topk") cfg.train.topk = as_int();
  else if (key == "discovery.att_threshold") cfg.discovery.att_threshold = as_double();
  else if (key == "discovery.n_min") cfg.discovery.n_min = as_int();
  else if (key == "discovery.score_penalty") cfg.discovery.score_penalty = as_double();
  else if (key == "discovery.max_prune_passes") cfg.discovery.max_prune_passes = as_int();
  else if (key == "episodes") cfg.episodes = as_int();
  else if (key == "seeds") {
    cfg.seeds.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
  } else if (key == "init_graph") cfg.init_graph = InitGraphSpec::parse(value);
  else if (key == "mask_mode") cfg.mask_mode = mask_mode_from_string(value);
  else if (key == "discovery_enabled") cfg.discovery_enabled = as_bool();
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "truth_graph") cfg.truth_graph_path = value;
  else if (key == "threads") cfg.threads = as_int();
  else throw std::invalid_argument("unknown config key: " + key);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfig cfg;
  for (const auto& [k, v] : parse_kv_file(in)) apply_config_entry(cfg, k, v);
  return cfg;
}

inline std::string config_echo(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "env.num_nodes=" << cfg.env.num_nodes << "\n";
  os << "env.num_types=" << cfg.env.num_types << "\n";
  os << "env.step_max=" << cfg.env.step_max << "\n";
  os << "env.max_hop=" << cfg.env.max_hop << "\n";
  os << "env.alpha_lo=" << cfg.env.alpha_range[0] << "\n";
  os << "env.alpha_hi=" << cfg.env.alpha_range[1] << "\n";
  os << "env.mu_lo=" << cfg.env.mu_range[0] << "\n";
  os << "env.mu_hi=" << cfg.env.mu_range[1] << "\n";
  os << "env.kappa=" << cfg.env.kernel_kappa << "\n";
  os << "env.warmup_time_range=" << cfg.env.warmup_time_range << "\n";
  os << "env.root_cause_num=" << cfg.env.root_cause_num << "\n";
  os << "env.count_cap=" << cfg.env.count_cap << "\n";
  os << "env.boost_scale=" << cfg.env.boost_scale << "\n";
  os << "env.topology_free=" << (cfg.env.topology_free ? "true" : "false") << "\n";
  os << "env.topology_edge_prob=" << cfg.topology_edge_prob << "\n";
  os << "env.topology_file=" << cfg.topology_file << "\n";
  os << "train.algo=" << to_string(cfg.train.algo) << "\n";
  os << "train.lr=" << cfg.train.lr << "\n";
  os << "train.gamma=" << cfg.train.gamma << "\n";
  os << "train.batch=" << cfg.train.batch << "\n";
  os << "train.hidden=" << cfg.train.hidden << "\n";
  os << "train.clip=" << cfg.train.clip << "\n";
  os << "train.k_epochs=" << cfg.train.k_epochs << "\n";
  os << "train.ppo_update_timestep=" << cfg.train.ppo_update_timestep << "\n";
  os << "train.gae_lambda=" << cfg.train.gae_lambda << "\n";
  os << "train.entropy_coef=" << cfg.train.entropy_coef << "\n";
  os << "train.value_coef=" << cfg.train.value_coef << "\n";
  os << "train.replay_capacity=" << cfg.train.replay_capacity << "\n";
  os << "train.dqn_update_timestep=" << cfg.train.dqn_update_timestep << "\n";
  os << "train.target_sync=" << cfg.train.target_sync << "\n";
  os << "train.eps_greedy=" << cfg.train.eps_greedy << "\n";
  os << "train.eta_causal=" << cfg.train.eta_causal << "\n";
  os << "train.random_sample_timestep=" << cfg.train.random_sample_timestep << "\n";
  os << "train.topk=" << cfg.train.topk << "\n";
  os << "discovery.att_threshold=" << cfg.discovery.att_threshold << "\n";
  if (cfg.discovery.score_penalty)
    os << "discovery.score_penalty=" << *cfg.discovery.score_penalty << "\n";
  os << "discovery.n_min=" << cfg.discovery.n_min << "\n";
  os << "discovery.max_prune_passes=" << cfg.discovery.max_prune_passes << "\n";
  os << "episodes=" << cfg.episodes << "\n";
  os << "seeds=";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? "," : "") << cfg.seeds[i];
  os << "\n";
  os << "init_graph=" << cfg.init_graph.to_string() << "\n";
  os << "mask_mode=" << to_string(cfg.mask_mode) << "\n";
  os << "discovery_enabled=" << (cfg.discovery_enabled ? "true" : "false") << "\n";
  os << "truth_graph=" << cfg.truth_graph_path << "\n";
  os << "out_dir=" << cfg.out_dir << "\n";
  return os.str();
}

// --------------------------------------------------------------------------
// Training loop (one seed). Implements the alternation: roll out an
// episode under the masked policy, append to the cumulative buffer, run
// one structure update per completed episode, update the policy on its
// own cadence.

namespace detail {

inline CausalGraph make_init_graph(const RunConfig& cfg, const CausalGraph& truth,
                                   std::uint64_t seed) {
  switch (cfg.init_graph.kind) {
    case InitGraphSpec::Kind::truth:
      return truth;
    case InitGraphSpec::Kind::file:
      return align_to_universe(load_graph_csv(cfg.init_graph.path), truth.type_names());
    case InitGraphSpec::Kind::random: {
      Rng rng = make_rng(seed, "init-graph");
      return random_dag(truth.num_types(), cfg.init_graph.edge_prob, rng, truth.type_names());
    }
  }
  throw std::logic_error("unreachable");
}

inline Topology make_topology(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.env.topology_free) return Topology::identity(cfg.env.num_nodes, 1);
  if (!cfg.topology_file.empty()) return load_topology_csv(cfg.topology_file, cfg.env.max_hop);
  Rng rng = make_rng(seed, "topology");
  return random_connected_topology(cfg.env.num_nodes, cfg.topology_edge_prob, cfg.env.max_hop,
                                   rng);
}

}  // namespace detail

inline SeedResult run_seed(const RunConfig& cfg, const CausalGraph& truth, std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;

  Rng rng_params = make_rng(seed, "env-params");
  Rng rng_env = make_rng(seed, "env");
  Rng rng_policy = make_rng(seed, "policy");
  Rng rng_net = make_rng(seed, "net");

  Environment env(cfg.env, truth, detail::make_topology(cfg, seed), rng_params);
  CausalGraph learned = detail::make_init_graph(cfg, truth, seed);

  const int obs_dim = cfg.env.observation_size();
  const int num_actions = cfg.env.action_space();
  std::optional<PpoAgent> ppo;
  std::optional<DqnAgent> dqn;
  if (cfg.train.algo == Algo::ppo) ppo.emplace(obs_dim, num_actions, cfg.train, rng_net);
  else dqn.emplace(obs_dim, num_actions, cfg.train, rng_net);

  std::vector<Transition> buffer;  // slim records (no observations) for discovery
  long env_step = 0;

  const CausalMask all_allowed{std::vector<std::uint8_t>(num_actions, 1), 0};

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const auto ep_start = std::chrono::steady_clock::now();
    Observation obs = env.reset(rng_env);
    double cumulative = 0.0;
    long active_sum = 0;
    int steps = 0;

    while (!env.done()) {
      const CausalMask active_mask = active_alarm_mask(obs, cfg.env.num_nodes, cfg.env.num_types);
      CausalMask policy_mask;
      if (cfg.mask_mode == MaskMode::causal) {
        policy_mask = build_mask(learned, obs, cfg.train.topk, cfg.env.num_nodes);
        ++result.graph_selection_reads;
      } else {
        policy_mask = all_allowed;
      }

      ActionChoice choice;
      if (ppo) choice = ppo->select(obs, policy_mask, active_mask, env_step, rng_policy);
      else choice = dqn->select(obs, policy_mask, active_mask, env_step, rng_policy);

      const std::vector<int> act_pre = env.type_activity();
      const StepResult res = env.step(choice.action, rng_env);
      const std::vector<int> act_post = env.type_activity();
      ++env_step;

      Transition slim;
      slim.action = choice.action;
      slim.reward = res.reward;
      slim.treated_types.assign(cfg.env.num_types, 0);
      if (res.treated_type >= 0) slim.treated_types[res.treated_type] = 1;
      slim.type_activity = act_pre;
      slim.next_type_activity = act_post;
      slim.done = res.done;
      buffer.push_back(std::move(slim));

      if (ppo) {
        RolloutEntry entry;
        entry.obs = obs.as_vector();
        entry.next_obs = res.next_obs.as_vector();
        entry.action = choice.action.index;
        entry.logp_old = choice.logp;
        entry.reward = res.reward;
        entry.done = res.done;
        entry.mask = choice.effective_mask;
        ppo->record(std::move(entry));
        if (ppo->ready()) ppo->update(rng_policy);
      } else {
        ReplayEntry entry;
        entry.obs = obs.as_vector().cast<float>();
        entry.next_obs = res.next_obs.as_vector().cast<float>();
        entry.action = choice.action.index;
        entry.reward = res.reward;
        entry.done = res.done;
        if (cfg.mask_mode == MaskMode::causal)
          entry.next_allow =
              build_mask(learned, res.next_obs, cfg.train.topk, cfg.env.num_nodes).allow;
        else
          entry.next_allow = all_allowed.allow;
        dqn->replay().push(std::move(entry));
        if (env_step % cfg.train.dqn_update_timestep == 0 && dqn->ready())
          dqn->update(rng_policy);
      }

      cumulative += res.reward;
      active_sum += res.alarms_active;
      ++steps;
      obs = res.next_obs;
    }

    if (cfg.discovery_enabled) {
      learned = update_structure(learned, buffer, cfg.discovery);
      ++result.structure_updates;
    }

    EpisodeRecord rec;
    rec.seed = seed;
    rec.episode = ep;
    rec.cumulative_reward = cumulative;
    rec.intervention_steps = steps;
    rec.mean_active_alarms = steps > 0 ? static_cast<double>(active_sum) / steps : 0.0;
    rec.graph = graph_metrics(learned, truth);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            ep_start)
                      .count();
    result.records.push_back(rec);
  }

  result.final_graph = learned;
  result.env_steps = env_step;
  return result;
}

inline RunResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const CausalGraph truth = load_graph_csv(cfg.truth_graph_path);
  if (truth.num_types() != cfg.env.num_types)
    throw std::invalid_argument("run: truth graph has " + std::to_string(truth.num_types()) +
                                " types but env.num_types=" + std::to_string(cfg.env.num_types));

  RunResult result;
  result.type_names = truth.type_names();
  result.per_seed.resize(cfg.seeds.size());

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.seeds.size()));

  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      result.per_seed[i] = run_seed(cfg, truth, cfg.seeds[i]);
    return result;
  }

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cfg.seeds.size()) return;
        try {
          result.per_seed[i] = run_seed(cfg, truth, cfg.seeds[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

// --------------------------------------------------------------------------
// Metric files.

inline nlohmann::json record_to_json(const EpisodeRecord& rec) {
  nlohmann::json j;
  j["seed"] = rec.seed;
  j["episode"] = rec.episode;
  j["cumulative_reward"] = rec.cumulative_reward;
  j["intervention_steps"] = rec.intervention_steps;
  j["mean_active_alarms"] = rec.mean_active_alarms;
  j["f1"] = rec.graph.f1;
  j["precision"] = rec.graph.precision;
  j["recall"] = rec.graph.recall;
  j["accuracy"] = rec.graph.accuracy;
  j["shd"] = rec.graph.shd;
  return j;
}

inline EpisodeRecord record_from_json(const nlohmann::json& j) {
  EpisodeRecord rec;
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.episode = j.at("episode").get<int>();
  rec.cumulative_reward = j.at("cumulative_reward").get<double>();
  rec.intervention_steps = j.at("intervention_steps").get<int>();
  rec.mean_active_alarms = j.at("mean_active_alarms").get<double>();
  rec.graph.f1 = j.at("f1").get<double>();
  rec.graph.precision = j.at("precision").get<double>();
  rec.graph.recall = j.at("recall").get<double>();
  rec.graph.accuracy = j.at("accuracy").get<double>();
  rec.graph.shd = j.at("shd").get<int>();
  return rec;
}

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;
};

inline WindowStats window_stats(const std::vector<double>& xs) {
  WindowStats out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= xs.size();
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(acc / (xs.size() - 1));
  }
  return out;
}

// Per-seed means and standard deviations over the final-10-episode window.
inline nlohmann::json summarize_records(const std::vector<EpisodeRecord>& records,
                                        int window = 10) {
  std::map<std::uint64_t, std::vector<EpisodeRecord>> by_seed;
  for (const auto& r : records) by_seed[r.seed].push_back(r);

  nlohmann::json seeds = nlohmann::json::object();
  for (auto& [seed, recs] : by_seed) {
    std::sort(recs.begin(), recs.end(),
              [](const auto& a, const auto& b) { return a.episode < b.episode; });
    const std::size_t take = std::min<std::size_t>(window, recs.size());
    std::vector<double> reward, steps, alarms, f1;
    for (std::size_t i = recs.size() - take; i < recs.size(); ++i) {
      reward.push_back(recs[i].cumulative_reward);
      steps.push_back(recs[i].intervention_steps);
      alarms.push_back(recs[i].mean_active_alarms);
      f1.push_back(recs[i].graph.f1);
    }
    nlohmann::json s;
    const auto rw = window_stats(reward), st = window_stats(steps), al = window_stats(alarms),
               fs = window_stats(f1);
    s["episodes"] = recs.size();
    s["window"] = take;
    s["cumulative_reward_mean"] = rw.mean;
    s["cumulative_reward_std"] = rw.stddev;
    s["intervention_steps_mean"] = st.mean;
    s["intervention_steps_std"] = st.stddev;
    s["mean_active_alarms_mean"] = al.mean;
    s["mean_active_alarms_std"] = al.stddev;
    s["f1_mean"] = fs.mean;
    s["f1_std"] = fs.stddev;
    seeds[std::to_string(seed)] = std::move(s);
  }

  std::vector<double> seed_rewards, seed_f1s;
  for (auto& [seed, s] : seeds.items()) {
    seed_rewards.push_back(s["cumulative_reward_mean"].get<double>());
    seed_f1s.push_back(s["f1_mean"].get<double>());
  }
  nlohmann::json out;
  out["seeds"] = std::move(seeds);
  out["final_window_reward_mean"] = window_stats(seed_rewards).mean;
  out["final_window_f1_mean"] = window_stats(seed_f1s).mean;
  return out;
}

inline void emit_metrics(const RunResult& result, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create out dir " + dir.string() + ": " + ec.message());

  auto open = [&](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };

  {
    auto out = open(dir / "metrics.jsonl");
    for (const auto& s : result.per_seed)
      for (const auto& rec : s.records) out << record_to_json(rec).dump() << "\n";
  }
  {
    auto out = open(dir / "timing.jsonl");
    for (const auto& s : result.per_seed)
      for (const auto& rec : s.records) {
        nlohmann::json j;
        j["seed"] = rec.seed;
        j["episode"] = rec.episode;
        j["wall_ms"] = rec.wall_ms;
        out << j.dump() << "\n";
      }
  }
  {
    auto out = open(dir / "config_echo.txt");
    out << config_echo(cfg);
  }
  {
    auto out = open(dir / "summary.json");
    out << summarize_records(result.all_records()).dump(2) << "\n";
  }
  if (!result.per_seed.empty()) {
    auto out = open(dir / "learned_graph.csv");
    save_graph_adjacency(result.per_seed.front().final_graph, out);
    if (result.per_seed.size() > 1) {
      for (const auto& s : result.per_seed) {
        auto per = open(dir / ("learned_graph_seed" + std::to_string(s.seed) + ".csv"));
        save_graph_adjacency(s.final_graph, per);
      }
    }
  }
}

}  // namespace causalrl
