#include "cleanup/scripted.hpp"

#include <deque>

namespace cleanup::scripted {

using env::Action;
using env::Facing;
using env::Pos;

namespace {

constexpr Facing kFacings[4] = {Facing::kNorth, Facing::kEast, Facing::kSouth, Facing::kWest};

// Breadth-first search from `start`; returns the first step of a shortest
// path to the nearest cell satisfying `goal` (the start itself when it
// qualifies), or -1 when unreachable. Neighbours expand N, E, S, W.
template <typename Goal>
std::pair<int, int> nearest(const env::TileMap& map, int start, Goal goal) {
  if (goal(start)) return {start, start};
  std::vector<int> first(map.cell_count(), -2);
  std::deque<int> frontier{start};
  first[start] = -1;
  while (!frontier.empty()) {
    const int c = frontier.front();
    frontier.pop_front();
    const Pos p = map.pos(c);
    for (Facing f : kFacings) {
      const Pos d = env::facing_delta(f);
      const Pos q{p.x + d.x, p.y + d.y};
      if (!map.walkable(q)) continue;
      const int qc = map.index(q);
      if (first[qc] != -2) continue;
      first[qc] = first[c] == -1 ? qc : first[c];
      if (goal(qc)) return {qc, first[qc]};
      frontier.push_back(qc);
    }
  }
  return {-1, -1};
}

Action random_action(Rng& rng) {
  return static_cast<Action>(uniform_index(rng, env::kNumActions));
}

// Whether a move is blocked by another avatar.
bool blocked(const env::EnvState& state, int player, Action a) {
  const env::Avatar& self = state.avatars[player];
  Facing dir;
  switch (a) {
    case Action::kForward: dir = self.facing; break;
    case Action::kBackward: dir = env::rotate_cw(env::rotate_cw(self.facing)); break;
    case Action::kStepLeft: dir = env::rotate_ccw(self.facing); break;
    case Action::kStepRight: dir = env::rotate_cw(self.facing); break;
    default: return false;
  }
  const Pos d = env::facing_delta(dir);
  return state.avatar_at({self.pos.x + d.x, self.pos.y + d.y}) >= 0;
}

}  // namespace

ScriptedPolicy::ScriptedPolicy(const env::EnvParams& params, ScriptConfig config)
    : params_(params), config_(config) {
  const env::TileMap& map = params_.map;
  footprints_.resize(map.cell_count());
  for (int c = 0; c < map.cell_count(); ++c) {
    if (!map.walkable(map.pos(c))) continue;
    for (int f = 0; f < 4; ++f) {
      for (Pos p : env::beam_footprint(map, map.pos(c), kFacings[f], params_.beam_length,
                                       params_.beam_width)) {
        if (map.at(p) == env::Terrain::kRiver) footprints_[c][f].push_back(map.index(p));
      }
    }
  }
}

Action ScriptedPolicy::step_towards(const env::Avatar& self, int next_cell) const {
  const Pos p = params_.map.pos(next_cell);
  const Pos d{p.x - self.pos.x, p.y - self.pos.y};
  if (d == env::facing_delta(self.facing)) return Action::kForward;
  if (d == env::facing_delta(env::rotate_cw(env::rotate_cw(self.facing)))) return Action::kBackward;
  if (d == env::facing_delta(env::rotate_ccw(self.facing))) return Action::kStepLeft;
  if (d == env::facing_delta(env::rotate_cw(self.facing))) return Action::kStepRight;
  return Action::kNoop;
}

Action ScriptedPolicy::harvest(const env::EnvState& state, int player) const {
  if (state.apple_count == 0) return Action::kNoop;
  const env::TileMap& map = params_.map;
  const env::Avatar& self = state.avatars[player];
  const auto [target, next] =
      nearest(map, map.index(self.pos), [&](int c) { return state.apple[c] != 0; });
  if (target < 0 || next == map.index(self.pos)) return Action::kNoop;
  return step_towards(self, next);
}

Action ScriptedPolicy::clean(const env::EnvState& state, int player) const {
  if (state.polluted_count == 0) return Action::kNoop;
  const env::TileMap& map = params_.map;
  const env::Avatar& self = state.avatars[player];
  auto reaches = [&](int c, int f) {
    for (int r : footprints_[c][f]) {
      if (state.polluted[r]) return true;
    }
    return false;
  };
  const int here = map.index(self.pos);
  const int facing = static_cast<int>(self.facing);
  if (reaches(here, facing)) return Action::kFireClean;
  const auto [target, next] = nearest(map, here, [&](int c) {
    for (int f = 0; f < 4; ++f) {
      if (reaches(c, f)) return true;
    }
    return false;
  });
  if (target < 0) return Action::kNoop;
  if (target != here) return step_towards(self, next);
  // In position but facing the wrong way: turn towards a reaching facing.
  for (int k = 1; k <= 2; ++k) {
    if (reaches(here, (facing + k) % 4)) return Action::kTurnRight;
    if (reaches(here, (facing + 4 - k) % 4)) return Action::kTurnLeft;
  }
  return Action::kNoop;
}

Action ScriptedPolicy::act(const env::EnvState& state, int player, Role role, Rng& rng) const {
  Action a = Action::kNoop;
  switch (role) {
    case Role::kRandom:
      return random_action(rng);
    case Role::kDefector:
      a = harvest(state, player);
      break;
    case Role::kCooperator:
      a = state.pollution_fraction(params_.map) > config_.clean_threshold ? clean(state, player)
                                                                          : harvest(state, player);
      break;
  }
  // Sidestep randomly around avatars standing in the way.
  if (blocked(state, player, a)) {
    a = static_cast<Action>(static_cast<int>(Action::kForward) + uniform_index(rng, 4));
  }
  return a;
}

env::EpisodeLog run_scripted_episode(const env::EnvParams& params, Condition condition,
                                     const ScriptedEpisode& episode, ScriptConfig config) {
  require(static_cast<int>(episode.roles.size()) == params.num_players,
          "run_scripted_episode: one role per player required");
  const ScriptedPolicy policy(params, config);
  env::EnvState state = env::reset(params, episode.seed);
  env::EpisodeLog log = env::EpisodeLog::begin(state, params, episode.seed, condition);
  log.header.group_id = episode.group_id;
  log.header.episode_index = episode.episode_index;
  log.header.source = "scripted";
  Rng rng(derive_seed(episode.seed, 0x5c21));
  std::vector<Action> joint(params.num_players);
  for (int t = 0; t < params.episode_length; ++t) {
    for (int i = 0; i < params.num_players; ++i) {
      joint[i] = policy.act(state, i, episode.roles[i], rng);
    }
    const env::StepEvents ev = env::step(state, joint, params);
    log.append(state, joint, ev);
  }
  return log;
}

std::vector<env::EpisodeLog> scripted_mixtures(const env::EnvParams& params, int episodes,
                                               std::uint64_t seed, ScriptConfig config) {
  const int n = params.num_players;
  Rng rng(derive_seed(seed, 0x5c22));
  std::vector<env::EpisodeLog> out;
  out.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    const int cooperators = e % (n + 1);
    std::vector<Role> roles(n, Role::kDefector);
    for (int i : sample_without_replacement(rng, n, cooperators)) roles[i] = Role::kCooperator;
    ScriptedEpisode ep{roles, derive_seed(seed, static_cast<std::uint64_t>(e)), cooperators, e};
    out.push_back(run_scripted_episode(params, Condition::kIdentifiable, ep, config));
  }
  return out;
}

}  // namespace cleanup::scripted
