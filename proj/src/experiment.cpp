#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cleanup/json_io.hpp"
#include "cleanup/orchestrator.hpp"

namespace cleanup::orch {

namespace fs = std::filesystem;
using nlohmann::json;

nets::NetConfig ExperimentConfig::network() const {
  nets::NetConfig n = net;
  n.window = window;
  n.channels = env::visual_channels(group_size);
  n.social = group_size;
  n.actions = env::kNumActions;
  return n;
}

void ExperimentConfig::validate() const {
  env.validate();
  if (population_size < 1 || group_size < 1 || group_size > population_size) {
    throw ConfigError("group_size must lie in [1, population_size]");
  }
  if (env.num_players != group_size) throw ConfigError("env.num_players must equal group_size");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (unroll < 1) throw ConfigError("unroll must be >= 1");
  if (arena_count < 1) throw ConfigError("arena_count must be >= 1");
  if (window < 3 || window % 2 == 0) throw ConfigError("window must be odd and >= 3");
  if (reputation.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (!(vtrace.gamma > 0.0 && vtrace.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (eval.groups < 1 || eval.episodes_per_group < 1) throw ConfigError("bad eval protocol");
  if (eval.groups * group_size > population_size) {
    throw ConfigError("eval.groups * group_size exceeds the population");
  }
  if (threads < 0) throw ConfigError("threads must be >= 0");
  network().validate();
}

std::uint64_t ExperimentConfig::hash() const {
  json j = *this;
  return fnv1a(j.dump());
}

ExperimentConfig ExperimentConfig::full_profile() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::toy_profile() {
  ExperimentConfig c;
  c.name = "toy";
  c.population_size = 10;
  c.arena_count = 8;
  c.total_steps = 2'000'000;
  c.env.map = env::TileMap::builtin("toy_12x9");
  c.window = 9;
  c.eval.groups = 2;
  c.rmsprop.learning_rate = 0.0016;
  return c;
}

namespace {

std::string mean_name(ReputationMean m) { return m == ReputationMean::kTrue ? "true" : "observed"; }

ReputationMean mean_from(const std::string& s) {
  if (s == "observed") return ReputationMean::kObserved;
  if (s == "true") return ReputationMean::kTrue;
  throw ConfigError("reputation.mean must be 'observed' or 'true'");
}

template <typename T>
void get(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  json envj = c.env;
  j = json{
      {"name", c.name},
      {"condition", to_string(c.condition)},
      {"population_size", c.population_size},
      {"arena_count", c.arena_count},
      {"group_size", c.group_size},
      {"batch_size", c.batch_size},
      {"unroll", c.unroll},
      {"total_steps", c.total_steps},
      {"seed", c.seed},
      {"env", envj},
      {"window", c.window},
      {"rotate_view", c.rotate_view},
      {"reputation",
       {{"enabled", c.reputation.enabled},
        {"noise_sigma", c.reputation.noise_sigma},
        {"include_self", c.reputation.include_self},
        {"mean", mean_name(c.reputation.mean)},
        {"visibility_mask", c.reputation.visibility_mask}}},
      {"net",
       {{"conv_channels", c.net.conv_channels},
        {"kernel", c.net.kernel},
        {"fc1", c.net.fc1},
        {"fc2", c.net.fc2},
        {"lstm", c.net.lstm}}},
      {"rmsprop",
       {{"learning_rate", c.rmsprop.learning_rate},
        {"epsilon", c.rmsprop.epsilon},
        {"decay", c.rmsprop.decay},
        {"momentum", c.rmsprop.momentum}}},
      {"vtrace",
       {{"gamma", c.vtrace.gamma}, {"rho_bar", c.vtrace.rho_bar}, {"c_bar", c.vtrace.c_bar}}},
      {"loss",
       {{"entropy_cost", c.loss.entropy_cost},
        {"baseline_cost", c.loss.baseline_cost},
        {"reward_scale", c.loss.reward_scale}}},
      {"eval",
       {{"groups", c.eval.groups},
        {"episodes_per_group", c.eval.episodes_per_group},
        {"start_polluted", c.eval.start_polluted}}},
      {"scheduling", c.scheduling == Scheduling::kThreaded ? "threaded" : "serialized"},
      {"threads", c.threads},
  };
}

void from_json(const json& j, ExperimentConfig& c) {
  const std::string profile = j.value("profile", std::string("full"));
  if (profile == "full") {
    c = ExperimentConfig::full_profile();
  } else if (profile == "toy") {
    c = ExperimentConfig::toy_profile();
  } else {
    throw ConfigError("unknown experiment profile '" + profile + "'");
  }
  get(j, "name", c.name);
  if (j.contains("condition")) c.condition = condition_from_string(j.at("condition").get<std::string>());
  get(j, "population_size", c.population_size);
  get(j, "arena_count", c.arena_count);
  get(j, "group_size", c.group_size);
  get(j, "batch_size", c.batch_size);
  get(j, "unroll", c.unroll);
  get(j, "total_steps", c.total_steps);
  get(j, "seed", c.seed);
  if (j.contains("env")) {
    // Unlisted env keys keep the profile's values, including its map.
    json envj = c.env;
    envj.erase("map");
    for (const auto& [k, v] : j.at("env").items()) envj[k] = v;
    if (!j.at("env").contains("map") && !j.at("env").contains("map_name") &&
        !j.at("env").contains("map_file")) {
      envj["map"] = c.env.map.serialize();
    }
    c.env = envj.get<env::EnvParams>();
  }
  if (!j.contains("env") || !j.at("env").contains("num_players")) c.env.num_players = c.group_size;
  get(j, "window", c.window);
  get(j, "rotate_view", c.rotate_view);
  if (j.contains("reputation")) {
    const json& r = j.at("reputation");
    get(r, "enabled", c.reputation.enabled);
    get(r, "noise_sigma", c.reputation.noise_sigma);
    get(r, "include_self", c.reputation.include_self);
    if (r.contains("mean")) c.reputation.mean = mean_from(r.at("mean").get<std::string>());
    get(r, "visibility_mask", c.reputation.visibility_mask);
  }
  if (j.contains("net")) {
    const json& n = j.at("net");
    get(n, "conv_channels", c.net.conv_channels);
    get(n, "kernel", c.net.kernel);
    get(n, "fc1", c.net.fc1);
    get(n, "fc2", c.net.fc2);
    get(n, "lstm", c.net.lstm);
  }
  if (j.contains("rmsprop")) {
    const json& r = j.at("rmsprop");
    get(r, "learning_rate", c.rmsprop.learning_rate);
    get(r, "epsilon", c.rmsprop.epsilon);
    get(r, "decay", c.rmsprop.decay);
    get(r, "momentum", c.rmsprop.momentum);
  }
  if (j.contains("vtrace")) {
    const json& v = j.at("vtrace");
    get(v, "gamma", c.vtrace.gamma);
    get(v, "rho_bar", c.vtrace.rho_bar);
    get(v, "c_bar", c.vtrace.c_bar);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    get(l, "entropy_cost", c.loss.entropy_cost);
    get(l, "baseline_cost", c.loss.baseline_cost);
    get(l, "reward_scale", c.loss.reward_scale);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    get(e, "groups", c.eval.groups);
    get(e, "episodes_per_group", c.eval.episodes_per_group);
    get(e, "start_polluted", c.eval.start_polluted);
  }
  if (j.contains("scheduling")) {
    const std::string s = j.at("scheduling").get<std::string>();
    if (s == "serialized") {
      c.scheduling = Scheduling::kSerialized;
    } else if (s == "threaded") {
      c.scheduling = Scheduling::kThreaded;
    } else {
      throw ConfigError("scheduling must be 'serialized' or 'threaded'");
    }
  }
  get(j, "threads", c.threads);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t params_hash(const nets::NetworkParams<float>& p) {
  return fnv1a(p.flat().data(), p.size() * sizeof(float));
}

std::uint64_t PopulationCheckpoint::params_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const AgentRecord& a : agents) {
    h = fnv1a(a.params.flat().data(), a.params.size() * sizeof(float), h);
  }
  return h;
}

namespace {

std::string agent_file(int i) {
  std::ostringstream s;
  s << "agent_" << std::setw(3) << std::setfill('0') << i << ".ckpt";
  return s.str();
}

constexpr const char* kManifestFormat = "cleanup-population";
constexpr int kManifestVersion = 1;

}  // namespace

void PopulationCheckpoint::save(const std::string& dir) const {
  fs::create_directories(dir);
  json agents_j = json::array();
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentRecord& a = agents[i];
    nets::AgentCheckpoint ck;
    ck.params = a.params;
    ck.opt = a.opt;
    ck.alpha = a.motivation.alpha;
    ck.beta = a.motivation.beta;
    ck.lambda = a.motivation.lambda;
    ck.steps_consumed = a.steps_consumed;
    ck.updates = a.updates;
    const std::string file = agent_file(static_cast<int>(i));
    ck.save((fs::path(dir) / file).string());
    agents_j.push_back({{"id", i},
                        {"file", file},
                        {"alpha", a.motivation.alpha},
                        {"beta", a.motivation.beta},
                        {"steps_consumed", a.steps_consumed},
                        {"updates", a.updates},
                        {"params_hash", orch::params_hash(a.params)}});
  }
  json m = {{"format", kManifestFormat},
            {"version", kManifestVersion},
            {"condition", to_string(config.condition)},
            {"population_size", config.population_size},
            {"config_hash", config.hash()},
            {"config", config},
            {"agents", agents_j}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in '" + dir + "'");
  out << m.dump(2) << '\n';
  if (!out) throw ConfigError("write failed for manifest in '" + dir + "'");
}

PopulationCheckpoint PopulationCheckpoint::load(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest);
  if (!in) throw ConfigError("missing checkpoint manifest '" + manifest.string() + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint manifest: " + std::string(e.what()));
  }
  if (m.value("format", std::string()) != kManifestFormat ||
      m.value("version", 0) != kManifestVersion) {
    throw ParseError("checkpoint manifest: unsupported format or version");
  }
  PopulationCheckpoint p;
  p.config = m.at("config").get<ExperimentConfig>();
  if (m.at("config_hash").get<std::uint64_t>() != p.config.hash()) {
    throw ParseError("checkpoint manifest: config hash mismatch");
  }
  const json& agents_j = m.at("agents");
  if (static_cast<int>(agents_j.size()) != p.config.population_size) {
    throw ParseError("checkpoint manifest: agent count differs from population_size");
  }
  const nets::NetConfig net = p.config.network();
  for (const json& a : agents_j) {
    const nets::AgentCheckpoint ck =
        nets::AgentCheckpoint::load((fs::path(dir) / a.at("file").get<std::string>()).string());
    if (!(ck.params.config() == net)) {
      throw ParseError("checkpoint: agent network shape differs from the config");
    }
    AgentRecord r;
    r.params = ck.params;
    r.opt = ck.opt;
    r.motivation = {ck.alpha, ck.beta, ck.lambda};
    r.steps_consumed = ck.steps_consumed;
    r.updates = ck.updates;
    if (orch::params_hash(r.params) != a.at("params_hash").get<std::uint64_t>()) {
      throw ParseError("checkpoint: parameter hash mismatch for " + a.at("file").get<std::string>());
    }
    p.agents.push_back(std::move(r));
  }
  return p;
}

}  // namespace cleanup::orch
