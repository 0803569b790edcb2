#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "procan/network.hpp"
#include "procan/optim.hpp"

namespace procan {

/// Everything needed to resume or evaluate a run. Stored as JSON; doubles are
/// written with 17 significant digits, so a save/load cycle is bit-exact.
struct Checkpoint {
  Network net;
  std::optional<AdamState> adam;
  std::map<std::string, std::string> rng_states;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace procan
