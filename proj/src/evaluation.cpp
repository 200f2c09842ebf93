#include <filesystem>
#include <iomanip>
#include <sstream>

#include "cleanup/orchestrator.hpp"

namespace cleanup::orch {

namespace fs = std::filesystem;

namespace {
constexpr std::uint64_t kTagPartition = 0x9a27;
constexpr std::uint64_t kTagEvalEpisode = 0xe7a1;
}  // namespace

std::vector<std::vector<int>> partition_groups(int population, int group_size, int groups,
                                               std::uint64_t seed) {
  if (group_size < 1 || groups < 1 || groups * group_size > population) {
    throw ConfigError("partition_groups: groups * group_size exceeds the population");
  }
  std::vector<int> ids(population);
  for (int i = 0; i < population; ++i) ids[i] = i;
  Rng rng(derive_seed(seed, kTagPartition));
  shuffle(ids, rng);
  std::vector<std::vector<int>> out(groups);
  for (int g = 0; g < groups; ++g) {
    out[g].assign(ids.begin() + g * group_size, ids.begin() + (g + 1) * group_size);
  }
  return out;
}

EvaluationResult run_evaluation(const PopulationCheckpoint& checkpoint,
                                const std::string& out_dir) {
  const ExperimentConfig& config = checkpoint.config;
  config.validate();
  if (static_cast<int>(checkpoint.agents.size()) != config.population_size) {
    throw ConfigError("run_evaluation: checkpoint population does not match its config");
  }
  if (config.population_size % config.group_size != 0) {
    throw ConfigError("run_evaluation: population_size must be divisible by group_size");
  }
  EvaluationResult result;
  result.groups = partition_groups(config.population_size, config.group_size, config.eval.groups,
                                   config.seed);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  EpisodeRunner runner(config);
  for (int g = 0; g < static_cast<int>(result.groups.size()); ++g) {
    std::vector<Seat> seats;
    for (int id : result.groups[g]) {
      seats.push_back({&checkpoint.agents[id].params, checkpoint.agents[id].motivation, id});
    }
    for (int e = 0; e < config.eval.episodes_per_group; ++e) {
      EpisodeOptions o;
      o.start_polluted = config.eval.start_polluted;
      o.record_trajectories = false;
      o.record_log = true;
      o.seed = derive_seed(derive_seed(config.seed, kTagEvalEpisode),
                           static_cast<std::uint64_t>(g) * 1000 + e);
      o.group_id = g;
      o.episode_index = e;
      o.source = "evaluation";
      EpisodeResult res = runner.run(seats, o);
      if (!out_dir.empty()) {
        std::ostringstream name;
        name << "episode_g" << std::setw(2) << std::setfill('0') << g << "_e" << std::setw(2)
             << e << ".jsonl";
        res.log->save((fs::path(out_dir) / name.str()).string());
      }
      result.logs.push_back(std::move(*res.log));
    }
  }
  return result;
}

}  // namespace cleanup::orch
