#include "procan/checkpoint.hpp"

#include <fstream>

#include "procan/errors.hpp"

namespace procan {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "procan-checkpoint";
constexpr int kVersion = 1;

json block_to_json(const CanBlock& block) {
  const CanBlockParams& p = block.params();
  json params = json::object();
  for (const Parameter* q : {&p.mq, &p.mk, &p.mv, &p.me, &p.mo, &p.bn_scale, &p.bn_shift, &p.se_reduce, &p.se_expand})
    params[q->name] = tensor_to_json(q->value);
  return json{{"params", params},
              {"running_mean", tensor_to_json(p.bn.running_mean)},
              {"running_var", tensor_to_json(p.bn.running_var)}};
}

void block_from_json(CanBlock& block, const json& j) {
  CanBlockParams& p = block.params();
  const json& params = j.at("params");
  for (Parameter* q : {&p.mq, &p.mk, &p.mv, &p.me, &p.mo, &p.bn_scale, &p.bn_shift, &p.se_reduce, &p.se_expand}) {
    Tensor t = tensor_from_json(params.at(q->name));
    if (t.shape() != q->value.shape())
      throw DataError("checkpoint tensor '" + q->name + "' has shape " + shape_str(t.shape()) + ", expected " +
                      shape_str(q->value.shape()));
    q->value = std::move(t);
    q->grad = Tensor(q->value.shape());
  }
  p.bn.running_mean = tensor_from_json(j.at("running_mean"));
  p.bn.running_var = tensor_from_json(j.at("running_var"));
}

json config_to_json(const CanBlockConfig& c) {
  return json{{"c_in", c.c_in}, {"c_out", c.c_out}, {"c_bar", c.c_bar}, {"stride", c.stride},
              {"variant", to_string(c.variant)}};
}

CanBlockConfig config_from_json(const json& j) {
  return CanBlockConfig{j.at("c_in").get<std::size_t>(), j.at("c_out").get<std::size_t>(),
                        j.at("c_bar").get<std::size_t>(), j.at("stride").get<std::size_t>(),
                        parse_variant(j.at("variant").get<std::string>())};
}

GrowthPhase parse_phase(const std::string& s) {
  if (s == "start") return GrowthPhase::Start;
  if (s == "transition") return GrowthPhase::Transition;
  if (s == "final") return GrowthPhase::Final;
  throw DataError("unknown growth phase '" + s + "'");
}

}  // namespace

json tensor_to_json(const Tensor& t) { return json{{"shape", t.shape()}, {"data", t.values()}}; }

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

json spec_to_json(const NetworkSpec& spec) {
  json blocks = json::array();
  for (const auto& b : spec.base_blocks) blocks.push_back(config_to_json(b));
  return json{{"input_channels", spec.input_channels},
              {"input_size", spec.input_size},
              {"base_blocks", blocks},
              {"extended_budget", spec.extended_budget},
              {"dropout_p", spec.dropout_p}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec s;
  s.input_channels = j.at("input_channels").get<std::size_t>();
  s.input_size = j.at("input_size").get<std::size_t>();
  for (const auto& b : j.at("base_blocks")) s.base_blocks.push_back(config_from_json(b));
  s.extended_budget = j.at("extended_budget").get<std::size_t>();
  s.dropout_p = j.at("dropout_p").get<double>();
  return s;
}

json network_to_json(const Network& net) {
  json base = json::array();
  for (const auto& b : net.base()) base.push_back(block_to_json(b));
  json ext = json::array();
  for (const auto& e : net.extended()) {
    const GrowthState& s = e.state;
    json state{{"phase", to_string(s.phase)},   {"p", s.p},          {"strategy", to_string(s.strategy)},
               {"schedule", s.schedule},        {"height", s.height}, {"width", s.width},
               {"omega", s.omega ? tensor_to_json(*s.omega) : json(nullptr)}};
    ext.push_back(json{{"block", block_to_json(e.block)}, {"state", state}});
  }
  return json{{"spec", spec_to_json(net.spec())},
              {"base", base},
              {"fc_weight", tensor_to_json(net.fc_weight().value)},
              {"fc_bias", tensor_to_json(net.fc_bias().value)},
              {"extended", ext}};
}

Network network_from_json(const json& j) {
  Rng scratch(0);
  Network net(spec_from_json(j.at("spec")), scratch);
  const json& base = j.at("base");
  if (base.size() != net.base().size()) throw DataError("checkpoint base block count does not match its spec");
  for (std::size_t i = 0; i < base.size(); ++i) block_from_json(net.base()[i], base[i]);
  for (const auto& e : j.at("extended")) {
    const json& s = e.at("state");
    net.grow(parse_blending(s.at("strategy").get<std::string>()), scratch);
    ExtendedBlock& ext = net.extended().back();
    block_from_json(ext.block, e.at("block"));
    ext.state.phase = parse_phase(s.at("phase").get<std::string>());
    ext.state.p = s.at("p").get<double>();
    ext.state.schedule = s.at("schedule").get<std::vector<double>>();
    ext.state.height = s.at("height").get<std::size_t>();
    ext.state.width = s.at("width").get<std::size_t>();
    ext.state.omega.reset();
    if (!s.at("omega").is_null()) ext.state.omega = tensor_from_json(s.at("omega"));
  }
  net.fc_weight().value = tensor_from_json(j.at("fc_weight"));
  net.fc_bias().value = tensor_from_json(j.at("fc_bias"));
  return net;
}

json adam_to_json(const AdamState& state) {
  json slots = json::array();
  for (const auto& s : state.slots)
    slots.push_back(json{{"m", tensor_to_json(s.m)}, {"v", tensor_to_json(s.v)}, {"step", s.step}});
  return json{{"beta1", state.beta1}, {"beta2", state.beta2}, {"eps", state.eps}, {"slots", slots}};
}

AdamState adam_from_json(const json& j) {
  AdamState s;
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  for (const auto& slot : j.at("slots"))
    s.slots.push_back(
        AdamSlot{tensor_from_json(slot.at("m")), tensor_from_json(slot.at("v")), slot.at("step").get<std::uint64_t>()});
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j{{"format", kFormat},
         {"version", kVersion},
         {"network", network_to_json(ckpt.net)},
         {"adam", ckpt.adam ? adam_to_json(*ckpt.adam) : json(nullptr)},
         {"rng", ckpt.rng_states},
         {"meta", ckpt.meta}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != kFormat) throw DataError(path.string() + " is not a checkpoint");
  if (j.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version in " + path.string());
  try {
    Checkpoint c{network_from_json(j.at("network")), std::nullopt,
                 j.at("rng").get<std::map<std::string, std::string>>(), j.at("meta")};
    if (!j.at("adam").is_null()) c.adam = adam_from_json(j.at("adam"));
    return c;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace procan
