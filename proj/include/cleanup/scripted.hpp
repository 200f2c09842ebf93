#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cleanup/episode_log.hpp"

namespace cleanup::scripted {

enum class Role : std::uint8_t {
  kCooperator,  // cleans while the river is polluted beyond a threshold, else harvests
  kDefector,    // only harvests
  kRandom,      // uniform random actions
};

struct ScriptConfig {
  double clean_threshold = 0.1;  // pollution fraction above which cooperators clean
};

// Greedy breadth-first navigation over the map; other avatars are ignored
// when planning and simply block moves.
class ScriptedPolicy {
 public:
  explicit ScriptedPolicy(const env::EnvParams& params, ScriptConfig config = {});

  env::Action act(const env::EnvState& state, int player, Role role, Rng& rng) const;

  // First action towards the nearest cell with an apple; kNoop without apples.
  env::Action harvest(const env::EnvState& state, int player) const;
  // First action towards the nearest pose whose clean beam reaches
  // pollution; fires once there. kNoop when the river is clean.
  env::Action clean(const env::EnvState& state, int player) const;

 private:
  env::Action step_towards(const env::Avatar& self, int next_cell) const;

  env::EnvParams params_;
  ScriptConfig config_;
  std::vector<std::array<std::vector<int>, 4>> footprints_;  // per cell and facing
};

struct ScriptedEpisode {
  std::vector<Role> roles;
  std::uint64_t seed = 0;
  int group_id = 0;
  int episode_index = 0;
};

env::EpisodeLog run_scripted_episode(const env::EnvParams& params, Condition condition,
                                     const ScriptedEpisode& episode, ScriptConfig config = {});

// `episodes` episodes whose cooperator counts cycle through 0..num_players,
// with roles assigned to random seats.
std::vector<env::EpisodeLog> scripted_mixtures(const env::EnvParams& params, int episodes,
                                               std::uint64_t seed, ScriptConfig config = {});

}  // namespace cleanup::scripted
