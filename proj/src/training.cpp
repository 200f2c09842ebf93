#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "cleanup/bounded_queue.hpp"
#include "cleanup/orchestrator.hpp"

namespace cleanup::orch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTagInit = 0x1a17;
constexpr std::uint64_t kTagMotivation = 0x3071;
constexpr std::uint64_t kTagSchedule = 0x5c4e;
constexpr std::uint64_t kTagEpisode = 0xe915;

// Metrics streams written next to the checkpoint; all no-ops without a
// directory.
class MetricsSink {
 public:
  explicit MetricsSink(const std::string& dir) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    updates_.open(fs::path(dir) / "updates.jsonl");
    episodes_.open(fs::path(dir) / "episodes.jsonl");
    if (!updates_ || !episodes_) throw ConfigError("cannot write metrics streams in '" + dir + "'");
  }

  void update(const learner::UpdateRecord& r) {
    if (updates_.is_open()) learner::write_update_record(updates_, r);
  }

  void episode(std::uint64_t index, std::span<const int> agents, const EpisodeResult& res) {
    if (!episodes_.is_open()) return;
    json j = {{"episode", index},
              {"agents", std::vector<int>(agents.begin(), agents.end())},
              {"collective_return", res.collective_return()},
              {"contribution_level", res.contribution_level()},
              {"return_ext", res.return_ext},
              {"return_int", res.return_int},
              {"clean_steps", res.clean_steps}};
    episodes_ << j.dump() << '\n';
  }

  void flush() {
    if (updates_.is_open()) updates_.flush();
    if (episodes_.is_open()) episodes_.flush();
  }

 private:
  std::ofstream updates_, episodes_;
};

std::vector<learner::Learner> make_learners(const ExperimentConfig& config,
                                            const PopulationCheckpoint& pop) {
  std::vector<learner::Learner> out;
  out.reserve(pop.agents.size());
  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    out.emplace_back(static_cast<int>(i), pop.agents[i].params, config.rmsprop, config.vtrace,
                     config.loss);
  }
  return out;
}

PopulationCheckpoint collect(const ExperimentConfig& config, const PopulationCheckpoint& initial,
                             const std::vector<learner::Learner>& learners) {
  PopulationCheckpoint out;
  out.config = config;
  out.agents = initial.agents;
  for (std::size_t i = 0; i < learners.size(); ++i) {
    out.agents[i].params = learners[i].params();
    out.agents[i].opt = learners[i].opt();
    out.agents[i].steps_consumed = learners[i].steps_consumed();
    out.agents[i].updates = learners[i].updates();
  }
  return out;
}

std::uint64_t min_steps(const std::vector<learner::Learner>& learners) {
  std::uint64_t m = UINT64_MAX;
  for (const auto& l : learners) m = std::min(m, l.steps_consumed());
  return m;
}

EpisodeOptions training_episode(const ExperimentConfig& config, std::uint64_t index) {
  EpisodeOptions o;
  o.start_polluted = config.env.start_polluted;
  o.record_trajectories = true;
  o.seed = derive_seed(derive_seed(config.seed, kTagEpisode), index);
  o.episode_index = static_cast<int>(index);
  o.source = "training";
  return o;
}

// Arenas run round by round in a fixed order. Every arena of a round pulls
// its snapshots before any learner of that round updates, and trajectories
// are delivered in arena order, so a run is a pure function of the config.
PopulationCheckpoint train_serialized(const ExperimentConfig& config,
                                      const PopulationCheckpoint& initial,
                                      const TrainingOptions& options, TrainingStats* stats) {
  auto learners = make_learners(config, initial);
  MetricsSink sink(options.out_dir);
  EpisodeRunner runner(config);
  Rng sched(derive_seed(config.seed, kTagSchedule));
  const int pop = config.population_size;
  std::vector<std::vector<learner::Trajectory>> pending(pop);
  std::uint64_t episode = 0;
  TrainingProgress progress;

  while (min_steps(learners) < config.total_steps &&
         (options.max_episodes == 0 || episode < options.max_episodes)) {
    std::vector<std::vector<int>> members;
    std::vector<EpisodeResult> results;
    for (int a = 0; a < config.arena_count; ++a) {
      if (options.max_episodes != 0 && episode + results.size() >= options.max_episodes) break;
      std::vector<int> ids = sample_without_replacement(sched, pop, config.group_size);
      std::vector<Seat> seats;
      for (int id : ids) {
        seats.push_back({&learners[id].params(), initial.agents[id].motivation, id});
        if (stats) ++stats->times_sampled[id];
      }
      results.push_back(runner.run(seats, training_episode(config, episode + results.size())));
      members.push_back(std::move(ids));
    }
    for (std::size_t r = 0; r < results.size(); ++r) {
      EpisodeResult& res = results[r];
      for (int s = 0; s < config.group_size; ++s) {
        const int id = members[r][s];
        for (auto& tr : res.trajectories[s]) {
          pending[id].push_back(std::move(tr));
          if (static_cast<int>(pending[id].size()) == config.batch_size) {
            sink.update(learners[id].update(pending[id]));
            pending[id].clear();
          }
        }
      }
      sink.episode(episode, members[r], res);
      ++episode;
      progress.episodes = episode;
      progress.collective_return = res.collective_return();
      progress.contribution_level = res.contribution_level();
    }
    progress.min_steps = min_steps(learners);
    if (options.progress) options.progress(progress);
  }
  sink.flush();
  if (stats) stats->episodes = episode;
  return collect(config, initial, learners);
}

struct Published {
  std::mutex mu;
  std::shared_ptr<const nets::NetworkParams<float>> params;
};

// Arena threads pull snapshots at episode start and push trajectories to
// the queue of the worker owning each agent; learner workers only consume.
// Nothing waits on an arena, so the pipeline cannot deadlock.
PopulationCheckpoint train_threaded(const ExperimentConfig& config,
                                    const PopulationCheckpoint& initial,
                                    const TrainingOptions& options, TrainingStats* stats) {
  auto learners = make_learners(config, initial);
  MetricsSink sink(options.out_dir);
  const int pop = config.population_size;
  const int threads = config.threads > 0
                          ? config.threads
                          : std::max(2u, std::thread::hardware_concurrency());
  const int workers = std::clamp(threads / 2, 1, pop);
  const int arenas = std::clamp(threads - workers, 1, config.arena_count);

  std::vector<Published> published(pop);
  for (int i = 0; i < pop; ++i) {
    published[i].params = std::make_shared<const nets::NetworkParams<float>>(learners[i].params());
  }
  std::vector<std::unique_ptr<BoundedQueue<learner::Trajectory>>> queues;
  for (int w = 0; w < workers; ++w) {
    queues.push_back(std::make_unique<BoundedQueue<learner::Trajectory>>(
        static_cast<std::size_t>(config.batch_size) * 4));
  }
  std::vector<std::atomic<std::uint64_t>> consumed(pop);
  for (auto& c : consumed) c = 0;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> next_episode{0};
  std::mutex sched_mu, sink_mu;
  Rng sched(derive_seed(config.seed, kTagSchedule));
  std::vector<std::uint64_t> sampled(pop, 0);
  TrainingProgress progress;

  auto done = [&] {
    if (options.max_episodes != 0 && next_episode.load() >= options.max_episodes) return true;
    for (const auto& c : consumed) {
      if (c.load() < config.total_steps) return false;
    }
    return true;
  };

  auto arena = [&] {
    EpisodeRunner runner(config);
    while (!stop.load()) {
      std::vector<int> ids;
      std::uint64_t index;
      {
        std::lock_guard lock(sched_mu);
        if (stop.load() || done()) {
          stop = true;
          break;
        }
        index = next_episode++;
        ids = sample_without_replacement(sched, pop, config.group_size);
        for (int id : ids) ++sampled[id];
      }
      std::vector<std::shared_ptr<const nets::NetworkParams<float>>> snaps;
      std::vector<Seat> seats;
      for (int id : ids) {
        std::lock_guard lock(published[id].mu);
        snaps.push_back(published[id].params);
      }
      for (std::size_t s = 0; s < ids.size(); ++s) {
        seats.push_back({snaps[s].get(), initial.agents[ids[s]].motivation, ids[s]});
      }
      EpisodeResult res = runner.run(seats, training_episode(config, index));
      for (std::size_t s = 0; s < ids.size(); ++s) {
        for (auto& tr : res.trajectories[s]) {
          if (!queues[ids[s] % workers]->push(std::move(tr))) return;
        }
      }
      std::lock_guard lock(sink_mu);
      sink.episode(index, ids, res);
      progress.episodes++;
      progress.collective_return = res.collective_return();
      progress.contribution_level = res.contribution_level();
    }
  };

  auto worker = [&](int w) {
    std::vector<std::vector<learner::Trajectory>> pending(pop);
    while (auto tr = queues[w]->pop()) {
      const int id = tr->agent_id;
      pending[id].push_back(std::move(*tr));
      if (static_cast<int>(pending[id].size()) < config.batch_size) continue;
      const learner::UpdateRecord rec = learners[id].update(pending[id]);
      pending[id].clear();
      auto snap = std::make_shared<const nets::NetworkParams<float>>(learners[id].params());
      {
        std::lock_guard lock(published[id].mu);
        published[id].params = std::move(snap);
      }
      consumed[id] = learners[id].steps_consumed();
      std::lock_guard lock(sink_mu);
      sink.update(rec);
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
  std::vector<std::thread> arena_threads;
  for (int a = 0; a < arenas; ++a) arena_threads.emplace_back(arena);
  while (!stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (options.progress) {
      std::lock_guard lock(sink_mu);
      std::uint64_t m = UINT64_MAX;
      for (const auto& c : consumed) m = std::min<std::uint64_t>(m, c.load());
      progress.min_steps = m;
      options.progress(progress);
    }
  }
  for (auto& t : arena_threads) t.join();
  for (auto& q : queues) q->close();
  for (auto& t : pool) t.join();
  sink.flush();
  if (stats) {
    stats->episodes = next_episode.load();
    stats->times_sampled = sampled;
  }
  return collect(config, initial, learners);
}

}  // namespace

PopulationCheckpoint initial_population(const ExperimentConfig& config) {
  config.validate();
  PopulationCheckpoint p;
  p.config = config;
  const nets::NetConfig net = config.network();
  for (int i = 0; i < config.population_size; ++i) {
    AgentRecord a;
    a.params = nets::NetworkParams<float>::initialize(
        net, derive_seed(derive_seed(config.seed, kTagInit), static_cast<std::uint64_t>(i)));
    a.opt = nets::OptState<float>(config.rmsprop, a.params.size());
    Rng mrng(derive_seed(derive_seed(config.seed, kTagMotivation), static_cast<std::uint64_t>(i)));
    a.motivation = reputation::sample_motivation(mrng);
    p.agents.push_back(std::move(a));
  }
  return p;
}

PopulationCheckpoint run_training(const ExperimentConfig& config, const TrainingOptions& options,
                                  TrainingStats* stats) {
  config.validate();
  const PopulationCheckpoint initial = initial_population(config);
  if (stats) *stats = TrainingStats{0, std::vector<std::uint64_t>(config.population_size, 0)};
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    std::ofstream cfg(fs::path(options.out_dir) / "config.json");
    cfg << json(config).dump(2) << '\n';
  }
  PopulationCheckpoint out = config.scheduling == Scheduling::kThreaded
                                 ? train_threaded(config, initial, options, stats)
                                 : train_serialized(config, initial, options, stats);
  if (!options.out_dir.empty()) out.save(options.out_dir);
  return out;
}

}  // namespace cleanup::orch
