#pragma once

#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalrl/state.hpp"

namespace causalrl {

// Newline-delimited JSON, one object per transition.
inline nlohmann::json transition_to_json(const Transition& tr) {
  nlohmann::json j;
  j["obs"] = tr.obs.vec;
  j["action"] = tr.action.index;
  j["reward"] = tr.reward;
  j["next_obs"] = tr.next_obs.vec;
  j["treated_types"] = tr.treated_types;
  j["type_activity"] = tr.type_activity;
  j["next_type_activity"] = tr.next_type_activity;
  j["done"] = tr.done;
  return j;
}

inline Transition transition_from_json(const nlohmann::json& j) {
  Transition tr;
  if (j.contains("obs")) tr.obs.vec = j.at("obs").get<std::vector<float>>();
  tr.action = ActionId(j.at("action").get<int>());
  tr.reward = j.at("reward").get<double>();
  if (j.contains("next_obs")) tr.next_obs.vec = j.at("next_obs").get<std::vector<float>>();
  tr.treated_types = j.at("treated_types").get<std::vector<std::uint8_t>>();
  tr.type_activity = j.at("type_activity").get<std::vector<int>>();
  tr.next_type_activity = j.at("next_type_activity").get<std::vector<int>>();
  tr.done = j.at("done").get<bool>();
  return tr;
}

inline void write_trajectory(std::span<const Transition> transitions, std::ostream& out) {
  for (const auto& tr : transitions) out << transition_to_json(tr).dump() << "\n";
}

inline void write_trajectory(std::span<const Transition> transitions, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  write_trajectory(transitions, out);
}

inline std::vector<Transition> read_trajectory(std::istream& in) {
  std::vector<Transition> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(transition_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Transition> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  return read_trajectory(in);
}

}  // namespace causalrl
