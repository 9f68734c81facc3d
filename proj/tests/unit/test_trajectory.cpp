#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "causalrl/trajectory.hpp"
#include "test_helpers.hpp"

using namespace causalrl;
using namespace causalrl::testutil;

TEST_CASE("trajectory round-trips through jsonl") {
  Environment env = make_chain_env(4, 3, 71);
  Rng rng(71);
  std::vector<Transition> transitions;
  Observation obs = env.reset(rng);
  std::uniform_int_distribution<int> any(0, env.config().action_space() - 1);
  for (int i = 0; i < 25 && !env.done(); ++i) {
    Transition tr;
    tr.obs = obs;
    tr.type_activity = env.type_activity();
    tr.action = ActionId(any(rng));
    const StepResult res = env.step(tr.action, rng);
    tr.next_obs = res.next_obs;
    tr.next_type_activity = env.type_activity();
    tr.reward = res.reward;
    tr.treated_types.assign(3, 0);
    if (res.treated_type >= 0) tr.treated_types[res.treated_type] = 1;
    tr.done = res.done;
    obs = res.next_obs;
    transitions.push_back(std::move(tr));
  }

  std::stringstream buf;
  write_trajectory(transitions, buf);
  const auto back = read_trajectory(buf);
  REQUIRE(back.size() == transitions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].obs.vec == transitions[i].obs.vec);
    REQUIRE(back[i].next_obs.vec == transitions[i].next_obs.vec);
    REQUIRE(back[i].action == transitions[i].action);
    REQUIRE(back[i].reward == transitions[i].reward);
    REQUIRE(back[i].treated_types == transitions[i].treated_types);
    REQUIRE(back[i].type_activity == transitions[i].type_activity);
    REQUIRE(back[i].next_type_activity == transitions[i].next_type_activity);
    REQUIRE(back[i].done == transitions[i].done);
  }
}

TEST_CASE("slim transitions omit observations") {
  Transition tr;
  tr.action = ActionId(4);
  tr.reward = -0.25;
  tr.treated_types = {0, 1};
  tr.type_activity = {3, 0};
  tr.next_type_activity = {3, 1};
  tr.done = false;

  std::stringstream buf;
  write_trajectory(std::vector<Transition>{tr}, buf);
  const auto back = read_trajectory(buf);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].obs.empty());
  REQUIRE(back[0].treated_types == tr.treated_types);
}

TEST_CASE("malformed lines report their position") {
  std::stringstream buf("{\"action\":1,\"reward\":0.0,\"treated_types\":[0],"
                        "\"type_activity\":[0],\"next_type_activity\":[0],\"done\":false}\n"
                        "not json\n");
  try {
    read_trajectory(buf);
    FAIL("expected parse failure");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
