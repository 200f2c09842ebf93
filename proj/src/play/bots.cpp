#include <algorithm>
#include <filesystem>

#include "cleanup/play.hpp"

namespace cleanup::play {

namespace {
constexpr std::uint64_t kTagAgentNoise = 0xa9e7;
}

void ScriptedBot::begin_episode(const env::EnvParams& params, Condition) {
  if (!policy_) policy_.emplace(params);
}

env::Action ScriptedBot::act(const BotContext& c) {
  require(policy_.has_value(), "ScriptedBot::act before begin_episode");
  return policy_->act(c.state, c.seat, role_, c.rng);
}

std::string ScriptedBot::describe() const {
  switch (role_) {
    case scripted::Role::kCooperator: return "scripted-cooperator";
    case scripted::Role::kDefector: return "scripted-defector";
    case scripted::Role::kRandom: return "scripted-random";
  }
  return "scripted";
}

AgentBot::AgentBot(std::shared_ptr<const orch::PopulationCheckpoint> checkpoint, int agent)
    : checkpoint_(std::move(checkpoint)),
      agent_(agent),
      net_(checkpoint_->config.network()),
      evaluator_(net_),
      state_(net_.lstm),
      visual_(net_.visual_size()),
      social_(net_.social) {
  require(agent_ >= 0 && agent_ < static_cast<int>(checkpoint_->agents.size()),
          "AgentBot: agent index out of range");
}

void AgentBot::begin_episode(const env::EnvParams& params, Condition) {
  if (params.num_players != checkpoint_->config.group_size) {
    throw ConfigError("checkpoint agents were trained for groups of " +
                      std::to_string(checkpoint_->config.group_size));
  }
  state_.reset();
}

env::Action AgentBot::act(const BotContext& c) {
  const orch::ExperimentConfig& cfg = checkpoint_->config;
  const env::ViewGrid view = env::render_observation(c.state, c.params, c.seat, c.condition,
                                                     cfg.window, cfg.rotate_view);
  env::encode_one_hot(view, net_.channels, std::span<float>(visual_));
  Rng noise(derive_seed(c.rng(), kTagAgentNoise));
  const reputation::SocialObservation obs = reputation::social_observation(
      c.traces, c.seat, c.condition, cfg.reputation.noise_sigma, noise);
  orch::network_social_input(obs, reputation::trace_ceiling(c.traces.lambda()),
                             std::span<float>(social_));
  float logits[env::kNumActions];
  float value = 0.0f;
  evaluator_.step(checkpoint_->agents[agent_].params, visual_, social_, state_,
                  std::span<float>(logits, env::kNumActions), value);
  const nets::ActionSample a =
      nets::sample_action<float>(std::span<const float>(logits, env::kNumActions), c.rng);
  return static_cast<env::Action>(a.action);
}

std::string AgentBot::describe() const { return "agent-" + std::to_string(agent_); }

BotFactory scripted_bots(scripted::Role role) {
  return [role](int) { return std::make_unique<ScriptedBot>(role); };
}

BotFactory checkpoint_bots(std::shared_ptr<const orch::PopulationCheckpoint> checkpoint,
                           std::uint64_t seed) {
  const int population = static_cast<int>(checkpoint->agents.size());
  Rng rng(seed);
  std::vector<int> order(population);
  for (int i = 0; i < population; ++i) order[i] = i;
  shuffle(order, rng);
  return [checkpoint, order](int seat) -> std::unique_ptr<Bot> {
    return std::make_unique<AgentBot>(checkpoint, order[seat % order.size()]);
  };
}

BotFactory bots_from_json(const json& desc, const std::string& base_dir) {
  const std::string kind = desc.value("kind", std::string("scripted"));
  if (kind == "none") return {};
  if (kind == "scripted") {
    const std::string role = desc.value("role", std::string("cooperator"));
    if (role == "cooperator") return scripted_bots(scripted::Role::kCooperator);
    if (role == "defector") return scripted_bots(scripted::Role::kDefector);
    if (role == "random") return scripted_bots(scripted::Role::kRandom);
    throw ConfigError("unknown scripted bot role '" + role + "'");
  }
  if (kind == "checkpoint") {
    if (!desc.contains("path")) throw ConfigError("checkpoint bots need a 'path'");
    std::filesystem::path dir = desc.at("path").get<std::string>();
    if (dir.is_relative() && !base_dir.empty()) dir = std::filesystem::path(base_dir) / dir;
    auto ckpt = std::make_shared<const orch::PopulationCheckpoint>(
        orch::PopulationCheckpoint::load(dir.string()));
    return checkpoint_bots(std::move(ckpt), desc.value("seed", std::uint64_t{1}));
  }
  throw ConfigError("unknown bot kind '" + kind + "'");
}

}  // namespace cleanup::play
