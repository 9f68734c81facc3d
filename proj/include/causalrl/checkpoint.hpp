#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "causalrl/mlp.hpp"

namespace causalrl {

inline constexpr int kCheckpointVersion = 1;

// JSON checkpoint: version, config echo, parameter tensors, counters.
// Doubles are written with shortest-round-trip formatting, so parameters
// survive a save/load cycle bit-exactly.
inline nlohmann::json net_to_json(const Mlp& net) {
  nlohmann::json j;
  j["dims"] = net.dims();
  auto layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    nlohmann::json layer;
    auto w = nlohmann::json::array();
    for (int r = 0; r < net.weights(l).rows(); ++r) {
      auto row = nlohmann::json::array();
      for (int c = 0; c < net.weights(l).cols(); ++c) row.push_back(net.weights(l)(r, c));
      w.push_back(std::move(row));
    }
    auto b = nlohmann::json::array();
    for (int r = 0; r < net.biases(l).size(); ++r) b.push_back(net.biases(l)(r));
    layer["w"] = std::move(w);
    layer["b"] = std::move(b);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Mlp net_from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<int>>();
  Rng scratch(0);
  Mlp net(dims, scratch);
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_layers())
    throw std::invalid_argument("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.mutable_weights()[l];
    auto& b = net.mutable_biases()[l];
    const auto& jw = layers[l].at("w");
    const auto& jb = layers[l].at("b");
    if (static_cast<int>(jw.size()) != w.rows())
      throw std::invalid_argument("checkpoint: weight shape mismatch");
    for (int r = 0; r < w.rows(); ++r) {
      if (static_cast<int>(jw[r].size()) != w.cols())
        throw std::invalid_argument("checkpoint: weight shape mismatch");
      for (int c = 0; c < w.cols(); ++c) w(r, c) = jw[r][c].get<double>();
    }
    if (static_cast<int>(jb.size()) != b.size())
      throw std::invalid_argument("checkpoint: bias shape mismatch");
    for (int r = 0; r < b.size(); ++r) b(r) = jb[r].get<double>();
  }
  return net;
}

struct Checkpoint {
  Mlp net;
  std::string config_echo;
  long env_steps = 0;
  long episodes = 0;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config_echo"] = ck.config_echo;
  j["env_steps"] = ck.env_steps;
  j["episodes"] = ck.episodes;
  j["net"] = net_to_json(ck.net);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint ck{net_from_json(j.at("net")), j.at("config_echo").get<std::string>(),
                j.at("env_steps").get<long>(), j.at("episodes").get<long>()};
  return ck;
}

}  // namespace causalrl
