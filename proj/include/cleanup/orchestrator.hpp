#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cleanup/env.hpp"
#include "cleanup/episode_log.hpp"
#include "cleanup/learner.hpp"
#include "cleanup/nets.hpp"
#include "cleanup/reputation.hpp"

namespace cleanup::orch {

// Which group average enters the intrinsic reward.
enum class ReputationMean : std::uint8_t {
  kObserved,  // mean of the agent's own (possibly corrupted) social observation
  kTrue,      // mean of the exact traces, whatever the agent observes
};

struct ReputationConfig {
  double noise_sigma = 0.5;  // anonymous peer-noise scale, in units of the trace ceiling
  bool include_self = true;  // c-bar averages over all members including self
  ReputationMean mean = ReputationMean::kObserved;
  bool enabled = true;       // false: extrinsic reward only
  bool visibility_mask = false;  // peers out of view read as zero
  bool operator==(const ReputationConfig&) const = default;
};

struct EvalConfig {
  int groups = 24;
  int episodes_per_group = 7;
  bool start_polluted = false;  // evaluation start: clean river, full orchard
  bool operator==(const EvalConfig&) const = default;
};

enum class Scheduling : std::uint8_t { kSerialized, kThreaded };

struct ExperimentConfig {
  std::string name = "full";
  Condition condition = Condition::kIdentifiable;
  int population_size = 120;
  int arena_count = 2000;
  int group_size = 5;
  int batch_size = 10;
  int unroll = 100;
  std::uint64_t total_steps = 100'000'000;  // per agent
  std::uint64_t seed = 1;
  env::EnvParams env = env::EnvParams::agent_defaults();  // training start state
  int window = 15;
  bool rotate_view = true;
  ReputationConfig reputation;
  nets::NetConfig net;  // window, channels and social are derived
  nets::RmsPropConfig rmsprop;
  learner::VTraceConfig vtrace;
  learner::LossConfig loss;
  EvalConfig eval;
  Scheduling scheduling = Scheduling::kSerialized;
  int threads = 0;  // threaded mode worker count, 0: hardware concurrency

  // Network shape implied by the window, group size and channel encoding.
  nets::NetConfig network() const;
  void validate() const;
  std::uint64_t hash() const;

  // Published protocol: 120 agents, 2000 arenas, 1e8 steps per agent.
  static ExperimentConfig full_profile();
  // Desk-scale profile: 10 agents, 8 arenas, 12x9 map, 2e6 steps per agent.
  static ExperimentConfig toy_profile();
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Keys absent from `j` keep the values of its "profile" entry ("full" or
// "toy", default full).
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

struct AgentRecord {
  nets::NetworkParams<float> params;
  nets::OptState<float> opt;
  reputation::MotivationParams motivation;
  std::uint64_t steps_consumed = 0;
  std::uint64_t updates = 0;
};

struct PopulationCheckpoint {
  ExperimentConfig config;
  std::vector<AgentRecord> agents;

  // Directory layout: manifest.json plus agent_XXX.ckpt per agent.
  void save(const std::string& dir) const;
  static PopulationCheckpoint load(const std::string& dir);
  // Fingerprint over all agents' parameters.
  std::uint64_t params_hash() const;
};

std::uint64_t params_hash(const nets::NetworkParams<float>& p);

// ---- episodes ---------------------------------------------------------------

struct Seat {
  const nets::NetworkParams<float>* params = nullptr;
  reputation::MotivationParams motivation;
  int agent_id = -1;
};

struct EpisodeOptions {
  bool start_polluted = true;
  bool record_trajectories = true;
  bool record_log = false;
  std::uint64_t seed = 0;
  int group_id = 0;
  int episode_index = 0;
  std::string source = "training";
};

struct EpisodeResult {
  std::vector<std::vector<learner::Trajectory>> trajectories;  // per seat
  std::optional<env::EpisodeLog> log;
  std::vector<double> return_ext;  // per seat
  std::vector<double> return_int;  // per seat
  std::vector<int> clean_steps;    // per seat
  double collective_return() const;
  int contribution_level() const;
};

// Plays one episode with the given seats; actions are sampled from each
// seat's policy and intrinsic rewards follow the reputation config.
class EpisodeRunner {
 public:
  explicit EpisodeRunner(const ExperimentConfig& config);
  EpisodeResult run(std::span<const Seat> seats, const EpisodeOptions& options);

 private:
  ExperimentConfig config_;
  nets::NetConfig net_;
  nets::PolicyEvaluator<float> evaluator_;
};

// Social vector as fed to the network: own reading first, then peers in
// seat order, all scaled by the trace ceiling.
void network_social_input(const reputation::SocialObservation& obs, double ceiling,
                          std::span<float> out);

// ---- training ---------------------------------------------------------------

struct TrainingProgress {
  std::uint64_t episodes = 0;
  std::uint64_t min_steps = 0;  // least-trained agent's consumed transitions
  double collective_return = 0.0;  // last episode
  int contribution_level = 0;      // last episode
};

struct TrainingOptions {
  std::string out_dir;  // when set, metrics streams and the checkpoint go here
  std::function<void(const TrainingProgress&)> progress;
  std::uint64_t max_episodes = 0;  // 0: unlimited; for tests
};

struct TrainingStats {
  std::uint64_t episodes = 0;
  std::vector<std::uint64_t> times_sampled;  // per agent
};

PopulationCheckpoint initial_population(const ExperimentConfig& config);
PopulationCheckpoint run_training(const ExperimentConfig& config,
                                  const TrainingOptions& options = {},
                                  TrainingStats* stats = nullptr);

// ---- evaluation -------------------------------------------------------------

struct EvaluationResult {
  std::vector<std::vector<int>> groups;  // agent ids per group
  std::vector<env::EpisodeLog> logs;     // group-major, episode-minor
};

// Random partition into groups, then frozen-parameter episodes per group.
std::vector<std::vector<int>> partition_groups(int population, int group_size, int groups,
                                               std::uint64_t seed);
EvaluationResult run_evaluation(const PopulationCheckpoint& checkpoint,
                                const std::string& out_dir = {});

}  // namespace cleanup::orch
