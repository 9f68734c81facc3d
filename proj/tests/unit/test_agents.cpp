#include <catch2/catch_amalgamated.hpp>

#include "causalrl/agents.hpp"

using namespace causalrl;

namespace {

Observation tiny_obs(const std::vector<std::uint8_t>& active_flags) {
  Observation obs;
  const std::size_t nv = active_flags.size();
  obs.vec.assign(2 * nv, 0.0f);
  for (std::size_t a = 0; a < nv; ++a) {
    obs.vec[a] = active_flags[a] ? 1.0f : 0.0f;
    obs.vec[nv + a] = active_flags[a] ? 0.05f : 0.0f;
  }
  return obs;
}

CausalMask mask_of(std::vector<std::uint8_t> allow) {
  CausalMask m;
  m.allow = std::move(allow);
  return m;
}

}  // namespace

TEST_CASE("eta=1 samples uniformly over active alarms") {
  Rng init(1);
  Mlp net({12, 8, 7}, init);  // 6 actions + value head
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.eta_causal = 1.0;
  cfg.random_sample_timestep = 0;

  const Observation obs = tiny_obs({1, 0, 1, 0, 0, 1});
  const CausalMask active = mask_of({1, 0, 1, 0, 0, 1});
  const CausalMask causal = mask_of({1, 0, 0, 0, 0, 0});

  Rng rng(2);
  std::vector<int> counts(6, 0);
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) {
    const auto choice = ppo_select_action(net, obs, causal, active, cfg, 1000, rng);
    counts[choice.action.index] += 1;
  }
  for (int a : {0, 2, 5}) {
    const double freq = static_cast<double>(counts[a]) / draws;
    REQUIRE(std::abs(freq - 1.0 / 3) < 3.0 * std::sqrt((1.0 / 3) * (2.0 / 3) / draws));
  }
  REQUIRE(counts[1] + counts[3] + counts[4] == 0);
}

TEST_CASE("eta=0 with a single allowed action always picks it") {
  Rng init(3);
  Mlp net({8, 8, 5}, init);
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.eta_causal = 0.0;
  cfg.random_sample_timestep = 0;

  const Observation obs = tiny_obs({1, 1, 0, 0});
  const CausalMask causal = mask_of({0, 1, 0, 0});
  const CausalMask active = mask_of({1, 1, 0, 0});
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto choice = ppo_select_action(net, obs, causal, active, cfg, 600, rng);
    REQUIRE(choice.action.index == 1);
    REQUIRE(choice.logp == 0.0);
  }
}

TEST_CASE("warm-up phase ignores the causal mask") {
  Rng init(5);
  Mlp net({8, 8, 5}, init);
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.eta_causal = 0.0;
  cfg.random_sample_timestep = 512;

  const Observation obs = tiny_obs({1, 1, 1, 1});
  const CausalMask causal = mask_of({0, 1, 0, 0});
  const CausalMask active = mask_of({1, 1, 1, 1});
  Rng rng(6);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 8000; ++i)
    counts[ppo_select_action(net, obs, causal, active, cfg, 100, rng).action.index] += 1;
  for (int a = 0; a < 4; ++a) REQUIRE(counts[a] > 0);
}

TEST_CASE("action frequencies at eta=0.3 match the mixture distribution") {
  Rng init(7);
  Mlp net({12, 16, 7}, init);
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.eta_causal = 0.3;
  cfg.random_sample_timestep = 0;

  const Observation obs = tiny_obs({1, 1, 1, 0, 1, 0});
  const CausalMask active = mask_of({1, 1, 1, 0, 1, 0});
  const CausalMask causal = mask_of({1, 1, 0, 0, 0, 0});

  const Eigen::VectorXd head = net.forward_one(obs.as_vector());
  const Eigen::VectorXd masked = masked_distribution(head.head(6), causal);

  const int draws = 100000;
  Rng rng(8);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < draws; ++i)
    counts[ppo_select_action(net, obs, causal, active, cfg, 5000, rng).action.index] += 1;

  for (int a = 0; a < 6; ++a) {
    const double uniform_part = active.allow[a] ? 0.3 / 4.0 : 0.0;
    const double expect = uniform_part + 0.7 * masked(a);
    const double freq = static_cast<double>(counts[a]) / draws;
    const double sigma = std::sqrt(std::max(expect * (1 - expect), 1e-12) / draws);
    CAPTURE(a, expect, freq);
    REQUIRE(std::abs(freq - expect) <= 3.0 * sigma + 1e-4);
  }
}

TEST_CASE("masked actions are never emitted without exploration") {
  Rng init(9);
  Mlp net({12, 8, 7}, init);
  TrainConfig ppo_cfg = TrainConfig::defaults_for(Algo::ppo);
  ppo_cfg.eta_causal = 0.0;
  ppo_cfg.random_sample_timestep = 0;
  TrainConfig dqn_cfg = TrainConfig::defaults_for(Algo::dqn);
  dqn_cfg.eta_causal = 0.0;
  dqn_cfg.random_sample_timestep = 0;

  Rng dqn_init(10);
  Mlp qnet({12, 8, 6}, dqn_init);

  const Observation obs = tiny_obs({1, 1, 1, 1, 1, 1});
  const CausalMask causal = mask_of({0, 1, 0, 1, 0, 0});
  const CausalMask active = mask_of({1, 1, 1, 1, 1, 1});

  Rng rng(11);
  for (int i = 0; i < 100000; ++i) {
    const auto p = ppo_select_action(net, obs, causal, active, ppo_cfg, 1000 + i, rng);
    REQUIRE(causal.allow[p.action.index]);
    const auto d = dqn_select_action(qnet, obs, causal, active, dqn_cfg, 1000 + i, rng);
    REQUIRE(causal.allow[d.action.index]);
  }
}

TEST_CASE("a binding clip zeroes the whole sample gradient") {
  Rng init(13);
  Mlp net({6, 8, 4}, init);  // 3 actions + value
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.clip = 0.2;
  cfg.entropy_coef = 0.0;
  cfg.value_coef = 0.0;

  RolloutEntry e;
  e.obs = Eigen::VectorXd::Constant(6, 0.3);
  e.next_obs = e.obs;
  e.action = 1;
  e.mask = mask_of({1, 1, 1});
  e.reward = 1.0;
  e.done = true;

  const Eigen::VectorXd head = net.forward_one(e.obs);
  const Eigen::VectorXd probs = masked_distribution(head.head(3), e.mask);
  // make the current ratio 1.5 with a positive advantage: clip binds
  e.logp_old = std::log(probs(1)) - std::log(1.5);

  std::vector<RolloutEntry> rollout{e};
  Eigen::VectorXd adv(1), ret(1);
  adv << 1.0;
  ret << head(3);  // zero value error so only the policy term could act
  const auto res = detail::ppo_batch_pass(net, rollout, {0}, adv, ret, cfg);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    REQUIRE(res.grads.w[l].cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(res.grads.b[l].cwiseAbs().maxCoeff() == 0.0);
  }

  // the same sample inside the clip region does produce a gradient
  rollout[0].logp_old = std::log(probs(1));
  const auto res2 = detail::ppo_batch_pass(net, rollout, {0}, adv, ret, cfg);
  double total = 0.0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) total += res2.grads.w[l].cwiseAbs().sum();
  REQUIRE(total > 0.0);
}

TEST_CASE("surrogate gradients match central finite differences on a 10-action toy") {
  Rng init(17);
  Mlp net({5, 12, 11}, init);  // 10 actions + value head
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.entropy_coef = 0.01;
  cfg.value_coef = 0.5;

  Rng rng(18);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RolloutEntry> rollout;
  Eigen::VectorXd adv(6), ret(6);
  std::vector<int> batch;
  for (int i = 0; i < 6; ++i) {
    RolloutEntry e;
    e.obs = Eigen::VectorXd::NullaryExpr(5, [&](int) { return u(rng); });
    e.next_obs = e.obs;
    std::vector<std::uint8_t> allow(10, 0);
    for (int a = 0; a < 10; ++a) allow[a] = (a % (i + 2)) != 0 ? 1 : 0;
    allow[i % 10] = 1;
    e.mask = mask_of(allow);
    e.action = i % 10;
    if (!e.mask.allow[e.action]) e.action = 1;
    const Eigen::VectorXd head = net.forward_one(e.obs);
    const Eigen::VectorXd probs = masked_distribution(head.head(10), e.mask);
    // mix of clipped and unclipped samples
    const double offset = (i % 3 == 0) ? std::log(1.6) : u(rng) * 0.1;
    e.logp_old = std::log(std::max(probs(e.action), 1e-300)) - offset;
    rollout.push_back(e);
    adv(i) = u(rng);
    ret(i) = u(rng);
    batch.push_back(i);
  }

  const auto res = detail::ppo_batch_pass(net, rollout, batch, adv, ret, cfg);
  auto loss_at = [&](Mlp& m) {
    return detail::ppo_batch_pass(m, rollout, batch, adv, ret, cfg).total_loss(cfg);
  };

  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < net.param_count(); ++p) {
    const double saved = net.get_param(p);
    net.set_param(p, saved + eps);
    const double up = loss_at(net);
    net.set_param(p, saved - eps);
    const double down = loss_at(net);
    net.set_param(p, saved);
    const double fd = (up - down) / (2 * eps);
    const double an = net.grad_at(res.grads, p);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  CAPTURE(worst);
  REQUIRE(worst < 1e-4);
}

TEST_CASE("a positive-advantage action gains masked probability") {
  Rng init(21);
  Mlp net({6, 16, 5}, init);  // 4 actions + value
  TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
  cfg.lr = 1e-4;
  cfg.k_epochs = 5;
  cfg.batch = 8;

  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(6, 0.5);
  const CausalMask mask = mask_of({1, 1, 1, 1});
  const Eigen::VectorXd head = net.forward_one(obs);
  const Eigen::VectorXd probs0 = masked_distribution(head.head(4), mask);

  std::vector<RolloutEntry> rollout;
  for (int i = 0; i < 8; ++i) {
    RolloutEntry e;
    e.obs = obs;
    e.next_obs = obs;
    e.mask = mask;
    e.action = i == 0 ? 2 : 3;
    e.reward = i == 0 ? 1.0 : -0.2;
    e.done = true;
    e.logp_old = std::log(masked_distribution(head.head(4), mask)(e.action));
    rollout.push_back(e);
  }
  AdamState adam(net);
  Rng rng(22);
  const auto diag = ppo_update(net, adam, rollout, cfg, rng);
  REQUIRE_FALSE(diag.aborted);

  const Eigen::VectorXd probs1 =
      masked_distribution(net.forward_one(obs).head(4), mask);
  REQUIRE(probs1(2) >= probs0(2));
}

TEST_CASE("identical seeds give identical ppo parameter trajectories") {
  auto train = [](std::uint64_t seed) {
    Rng init(seed);
    Mlp net({6, 8, 5}, init);
    AdamState adam(net);
    TrainConfig cfg = TrainConfig::defaults_for(Algo::ppo);
    cfg.k_epochs = 3;
    cfg.batch = 4;
    Rng rng(seed + 1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int round = 0; round < 3; ++round) {
      std::vector<RolloutEntry> rollout;
      for (int i = 0; i < 8; ++i) {
        RolloutEntry e;
        e.obs = Eigen::VectorXd::NullaryExpr(6, [&](int) { return u(rng); });
        e.next_obs = e.obs;
        e.mask = mask_of({1, 1, 1, 1});
        e.action = static_cast<int>(rng() % 4);
        e.reward = u(rng);
        e.done = i % 4 == 3;
        const Eigen::VectorXd head = net.forward_one(e.obs);
        e.logp_old = std::log(masked_distribution(head.head(4), e.mask)(e.action));
        rollout.push_back(e);
      }
      ppo_update(net, adam, rollout, cfg, rng);
    }
    std::vector<double> params(net.param_count());
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = net.get_param(i);
    return params;
  };
  REQUIRE(train(100) == train(100));
  REQUIRE(train(100) != train(101));
}

TEST_CASE("dqn terminal targets are the raw rewards") {
  Rng init(31);
  Mlp net({4, 8, 3}, init);
  TrainConfig cfg = TrainConfig::defaults_for(Algo::dqn);
  cfg.batch = 16;
  cfg.lr = 0.01;
  AdamState adam(net);

  ReplayBuffer buffer(64);
  ReplayEntry e;
  e.obs = Eigen::VectorXf::Constant(4, 0.25f);
  e.next_obs = e.obs;
  e.action = 1;
  e.reward = 0.7;
  e.done = true;
  e.next_allow = {1, 1, 1};
  for (int i = 0; i < 32; ++i) buffer.push(e);

  Rng rng(32);
  for (int it = 0; it < 3000; ++it) dqn_update(net, net, buffer, cfg, adam, rng);
  const Eigen::VectorXd q = net.forward_one(e.obs.cast<double>());
  REQUIRE(q(1) == Catch::Approx(0.7).margin(1e-2));
}

TEST_CASE("gamma=0 q-values converge to empirical reward means on a 2-state toy") {
  Rng init(41);
  Mlp net({2, 16, 2}, init);
  TrainConfig cfg = TrainConfig::defaults_for(Algo::dqn);
  cfg.gamma = 0.0;
  cfg.batch = 32;
  cfg.lr = 0.005;
  AdamState adam(net);

  // two one-hot states, two actions, deterministic rewards
  Rng rng(42);
  ReplayBuffer buffer(4096);
  const double reward_table[2][2] = {{0.1, 0.9}, {-0.4, 0.3}};
  std::vector<Eigen::VectorXf> states = {Eigen::VectorXf::Zero(2), Eigen::VectorXf::Zero(2)};
  states[0](0) = 1.0f;
  states[1](1) = 1.0f;
  for (int i = 0; i < 2048; ++i) {
    ReplayEntry e;
    const int s = static_cast<int>(rng() % 2), a = static_cast<int>(rng() % 2);
    e.obs = states[s];
    e.next_obs = states[(s + 1) % 2];
    e.action = a;
    e.reward = reward_table[s][a];
    e.done = false;
    e.next_allow = {1, 1};
    buffer.push(e);
  }
  for (int it = 0; it < 6000; ++it) dqn_update(net, net, buffer, cfg, adam, rng);

  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd q = net.forward_one(states[s].cast<double>());
    for (int a = 0; a < 2; ++a)
      REQUIRE(q(a) == Catch::Approx(reward_table[s][a]).margin(0.02));
  }
}

TEST_CASE("bootstrap max honors the stored allowed set") {
  Eigen::RowVectorXd q(4);
  q << 5.0, 1.0, 3.0, 4.0;
  REQUIRE(masked_max(q, {0, 1, 1, 0}) == 3.0);
  REQUIRE(masked_max(q, {1, 1, 1, 1}) == 5.0);
  // brute-force oracle on random vectors
  Rng rng(51);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::RowVectorXd qs(6);
    std::vector<std::uint8_t> allow(6, 0);
    bool any = false;
    for (int a = 0; a < 6; ++a) {
      qs(a) = u(rng);
      allow[a] = coin(rng) ? 1 : 0;
      any = any || allow[a];
    }
    if (!any) allow[3] = 1;
    double want = -1e18;
    for (int a = 0; a < 6; ++a)
      if (allow[a]) want = std::max(want, qs(a));
    REQUIRE(masked_max(qs, allow) == want);
  }
}
