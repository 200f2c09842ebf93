#include "cleanup/env.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cleanup {

std::string to_string(Condition c) {
  return c == Condition::kIdentifiable ? "identifiable" : "anonymous";
}

Condition condition_from_string(std::string_view s) {
  if (s == "identifiable") return Condition::kIdentifiable;
  if (s == "anonymous") return Condition::kAnonymous;
  throw ConfigError("unknown condition '" + std::string(s) + "'");
}

}  // namespace cleanup

namespace cleanup::env {

namespace {

constexpr std::string_view kMapHeader = "cleanup-map v1";

constexpr std::string_view kFullMap =
    "cleanup-map v1\n"
    "WWWWWWWWWWWWWWWWWWWWWWW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR..SSSSS..OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WRRRRRR.........OOOOOOW\n"
    "WWWWWWWWWWWWWWWWWWWWWWW\n";

constexpr std::string_view kToyMap =
    "cleanup-map v1\n"
    "WWWWWWWWWWWW\n"
    "WRRR....OOOW\n"
    "WRRR.SS.OOOW\n"
    "WRRR.SS.OOOW\n"
    "WRRR.SS.OOOW\n"
    "WRRR.SS.OOOW\n"
    "WRRR.SS.OOOW\n"
    "WRRR....OOOW\n"
    "WWWWWWWWWWWW\n";

char terrain_char(Terrain t, bool spawn) {
  switch (t) {
    case Terrain::kWall: return 'W';
    case Terrain::kRiver: return 'R';
    case Terrain::kOrchard: return 'O';
    case Terrain::kFloor: return spawn ? 'S' : '.';
  }
  return '?';
}

}  // namespace

Pos facing_delta(Facing f) {
  switch (f) {
    case Facing::kNorth: return {0, -1};
    case Facing::kEast: return {1, 0};
    case Facing::kSouth: return {0, 1};
    case Facing::kWest: return {-1, 0};
  }
  return {0, 0};
}

Facing rotate_cw(Facing f) { return static_cast<Facing>((static_cast<int>(f) + 1) % 4); }
Facing rotate_ccw(Facing f) { return static_cast<Facing>((static_cast<int>(f) + 3) % 4); }

TileMap TileMap::parse(std::string_view text) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("tile map: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMapHeader) throw ParseError("tile map: missing header '" + std::string(kMapHeader) + "'");
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw ParseError("tile map: no rows");
  TileMap m;
  m.height_ = static_cast<int>(rows.size());
  m.width_ = static_cast<int>(rows.front().size());
  m.terrain_.resize(static_cast<std::size_t>(m.width_) * m.height_);
  for (int y = 0; y < m.height_; ++y) {
    if (static_cast<int>(rows[y].size()) != m.width_) {
      throw ParseError("tile map: ragged row " + std::to_string(y));
    }
    for (int x = 0; x < m.width_; ++x) {
      const int i = y * m.width_ + x;
      switch (rows[y][x]) {
        case 'W': m.terrain_[i] = Terrain::kWall; break;
        case 'R': m.terrain_[i] = Terrain::kRiver; m.river_.push_back(i); break;
        case 'O': m.terrain_[i] = Terrain::kOrchard; m.orchard_.push_back(i); break;
        case 'S': m.terrain_[i] = Terrain::kFloor; m.spawn_.push_back(i); break;
        case '.': m.terrain_[i] = Terrain::kFloor; break;
        default:
          throw ParseError(std::string("tile map: unknown tile '") + rows[y][x] + "'");
      }
    }
  }
  if (m.river_.empty()) throw ParseError("tile map: no river cells");
  if (m.orchard_.empty()) throw ParseError("tile map: no orchard cells");
  return m;
}

TileMap TileMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tile map '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

TileMap TileMap::builtin(std::string_view name) {
  if (name == "cleanup_23x16") return parse(kFullMap);
  if (name == "toy_12x9") return parse(kToyMap);
  throw ConfigError("unknown built-in map '" + std::string(name) + "'");
}

std::string TileMap::serialize() const {
  std::string out(kMapHeader);
  out += '\n';
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const int i = y * width_ + x;
      const bool spawn = std::find(spawn_.begin(), spawn_.end(), i) != spawn_.end();
      out += terrain_char(terrain_[i], spawn);
    }
    out += '\n';
  }
  return out;
}

void EnvParams::validate() const {
  if (!(0.0 <= h_abundance && h_abundance < h_depletion && h_depletion <= 1.0)) {
    throw ConfigError("require 0 <= h_abundance < h_depletion <= 1");
  }
  if (!(0.0 <= pr_apple && pr_apple <= 1.0)) throw ConfigError("pr_apple must lie in [0,1]");
  if (!(0.0 <= pr_pollution && pr_pollution <= 1.0)) {
    throw ConfigError("pr_pollution must lie in [0,1]");
  }
  if (episode_length <= 0) throw ConfigError("episode_length must be positive");
  if (ticket_cost > 0.0 || ticket_penalty > 0.0) {
    throw ConfigError("ticket_cost and ticket_penalty must be <= 0");
  }
  if (apples_per_point <= 0) throw ConfigError("apples_per_point must be positive");
  if (num_players <= 0) throw ConfigError("num_players must be positive");
  if (beam_length <= 0 || beam_width <= 0 || beam_width % 2 == 0) {
    throw ConfigError("beam_length must be positive and beam_width a positive odd number");
  }
  if (map.cell_count() == 0) throw ConfigError("no tile map");
  // River and orchard are disjoint by construction of the terrain grid.
  if (static_cast<int>(map.spawn_cells().size()) < num_players) {
    throw ConfigError("tile map has " + std::to_string(map.spawn_cells().size()) +
                      " spawn cells for " + std::to_string(num_players) + " players");
  }
}

EnvParams EnvParams::agent_defaults() {
  EnvParams p;
  p.map = TileMap::builtin("cleanup_23x16");
  return p;
}

EnvParams EnvParams::human_defaults() {
  EnvParams p;
  p.pr_apple = 0.067;
  p.pr_pollution = 0.6;
  p.h_abundance = 0.3;
  p.h_depletion = 0.6;
  p.episode_length = 2000;
  p.ticket_cost = -4.0;
  p.ticket_penalty = -40.0;
  p.apples_per_point = 2;
  p.start_polluted = false;
  p.map = TileMap::builtin("cleanup_23x16");
  return p;
}

std::string_view action_name(Action a) {
  static constexpr std::array<std::string_view, kNumActions> kNames = {
      "noop",      "forward",    "backward",   "step_left",  "step_right",
      "turn_left", "turn_right", "fire_clean", "fire_ticket"};
  return kNames[static_cast<int>(a)];
}

int EnvState::avatar_at(Pos p) const {
  for (int i = 0; i < num_players(); ++i) {
    if (avatars[i].pos == p) return i;
  }
  return -1;
}

double apple_regrowth_probability(double f, const EnvParams& params) {
  if (f >= params.h_depletion) return 0.0;
  if (f <= params.h_abundance) return params.pr_apple;
  const double p = params.pr_apple * (params.h_depletion - f) /
                   (params.h_depletion - params.h_abundance);
  return std::clamp(p, 0.0, params.pr_apple);
}

double pollution_accrual_probability(double f, const EnvParams& params) {
  return f < params.h_depletion ? params.pr_pollution : 0.0;
}

EnvState reset(const EnvParams& params, std::uint64_t seed) {
  params.validate();
  const TileMap& map = params.map;
  const int n = params.num_players;
  EnvState s;
  s.rng.seed(seed);
  s.polluted.assign(map.cell_count(), 0);
  s.apple.assign(map.cell_count(), 0);
  if (params.start_polluted) {
    for (int i : map.river_cells()) s.polluted[i] = 1;
    s.polluted_count = static_cast<int>(map.river_cells().size());
  } else {
    for (int i : map.orchard_cells()) s.apple[i] = 1;
    s.apple_count = static_cast<int>(map.orchard_cells().size());
  }
  const auto& spawns = map.spawn_cells();
  const auto picks = sample_without_replacement(s.rng, static_cast<int>(spawns.size()), n);
  s.avatars.resize(n);
  for (int i = 0; i < n; ++i) {
    s.avatars[i].pos = map.pos(spawns[picks[i]]);
    s.avatars[i].facing = static_cast<Facing>(uniform_index(s.rng, 4));
  }
  s.score.assign(n, 0.0);
  s.apple_counter.assign(n, 0);
  s.tickets_used.assign(n, 0);
  return s;
}

std::vector<Pos> beam_footprint(const TileMap& map, Pos from, Facing facing, int length,
                                int width) {
  const Pos fwd = facing_delta(facing);
  const Pos right = facing_delta(rotate_cw(facing));
  std::vector<Pos> cells;
  cells.reserve(static_cast<std::size_t>(length) * width);
  const int half = width / 2;
  for (int lane = -half; lane <= half; ++lane) {
    for (int d = 1; d <= length; ++d) {
      const Pos p{from.x + d * fwd.x + lane * right.x, from.y + d * fwd.y + lane * right.y};
      if (!map.walkable(p)) break;
      cells.push_back(p);
    }
  }
  return cells;
}

StepEvents step(EnvState& s, std::span<const Action> joint_action, const EnvParams& params) {
  const int n = s.num_players();
  if (static_cast<int>(joint_action.size()) != n) {
    throw ContractViolation("step: joint action has " + std::to_string(joint_action.size()) +
                            " entries for " + std::to_string(n) + " players");
  }
  require(s.step < params.episode_length, "step: episode already finished");
  const TileMap& map = params.map;

  StepEvents ev;
  ev.cleaned.assign(n, 0);
  ev.apples_eaten.assign(n, 0);
  ev.reward.assign(n, 0.0);

  std::vector<Action> act(joint_action.begin(), joint_action.end());
  for (int i = 0; i < n; ++i) {
    require(static_cast<int>(act[i]) < kNumActions, "step: action index out of range");
    if (s.avatars[i].frozen_until > s.step) act[i] = Action::kNoop;
  }

  // Random priority resolves contested moves and overlapping beams.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, s.rng);

  for (int i : order) {
    Avatar& a = s.avatars[i];
    Pos dir{0, 0};
    switch (act[i]) {
      case Action::kForward: dir = facing_delta(a.facing); break;
      case Action::kBackward: dir = facing_delta(rotate_cw(rotate_cw(a.facing))); break;
      case Action::kStepLeft: dir = facing_delta(rotate_ccw(a.facing)); break;
      case Action::kStepRight: dir = facing_delta(rotate_cw(a.facing)); break;
      case Action::kTurnLeft: a.facing = rotate_ccw(a.facing); continue;
      case Action::kTurnRight: a.facing = rotate_cw(a.facing); continue;
      default: continue;
    }
    const Pos target{a.pos.x + dir.x, a.pos.y + dir.y};
    if (map.walkable(target) && s.avatar_at(target) < 0) a.pos = target;
  }

  for (int i : order) {
    if (act[i] != Action::kFireClean && act[i] != Action::kFireTicket) continue;
    const Avatar& a = s.avatars[i];
    const auto cells = beam_footprint(map, a.pos, a.facing, params.beam_length, params.beam_width);
    if (act[i] == Action::kFireClean) {
      for (Pos p : cells) {
        const int c = map.index(p);
        if (s.polluted[c]) {
          s.polluted[c] = 0;
          --s.polluted_count;
          ++ev.cleaned[i];
        }
      }
    } else {
      for (Pos p : cells) {
        const int target = s.avatar_at(p);
        if (target < 0 || target == i) continue;
        if (params.ticket_budget >= 0 && s.tickets_used[i] >= params.ticket_budget) break;
        ++s.tickets_used[i];
        ev.tickets.emplace_back(i, target);
        ev.reward[i] += params.ticket_cost;
        ev.reward[target] += params.ticket_penalty;
        if (params.ticket_freeze_steps > 0) {
          s.avatars[target].frozen_until = s.step + 1 + params.ticket_freeze_steps;
        }
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const int c = map.index(s.avatars[i].pos);
    if (!s.apple[c]) continue;
    s.apple[c] = 0;
    --s.apple_count;
    ++ev.apples_eaten[i];
    if (++s.apple_counter[i] >= params.apples_per_point) {
      s.apple_counter[i] = 0;
      ev.reward[i] += 1.0;
    }
  }

  // Both production functions read the pollution level after cleaning.
  const double f = s.pollution_fraction(map);
  if (bernoulli(s.rng, pollution_accrual_probability(f, params))) {
    const auto& river = map.river_cells();
    const int clean = static_cast<int>(river.size()) - s.polluted_count;
    if (clean > 0) {
      int k = static_cast<int>(uniform_index(s.rng, clean));
      for (int c : river) {
        if (s.polluted[c]) continue;
        if (k-- == 0) {
          s.polluted[c] = 1;
          ++s.polluted_count;
          break;
        }
      }
    }
  }
  const double p_apple = apple_regrowth_probability(f, params);
  if (p_apple > 0.0) {
    for (int c : map.orchard_cells()) {
      if (s.apple[c] || s.avatar_at(map.pos(c)) >= 0) continue;
      if (bernoulli(s.rng, p_apple)) {
        s.apple[c] = 1;
        ++s.apple_count;
      }
    }
  }

  for (int i = 0; i < n; ++i) s.score[i] += ev.reward[i];
  ++s.step;
  return ev;
}

ViewGrid render_observation(const EnvState& s, const EnvParams& params, int player,
                            Condition condition, int window, bool rotate) {
  require(player >= 0 && player < s.num_players(), "render_observation: bad player index");
  require(window > 0 && window % 2 == 1, "render_observation: window must be odd");
  const TileMap& map = params.map;
  const Avatar& self = s.avatars[player];
  const int half = window / 2;
  const Facing up = rotate ? self.facing : Facing::kNorth;
  const Pos fwd = facing_delta(up);
  const Pos right = facing_delta(rotate_cw(up));

  ViewGrid view;
  view.size = window;
  view.cells.resize(static_cast<std::size_t>(window) * window);
  for (int row = 0; row < window; ++row) {
    for (int col = 0; col < window; ++col) {
      const int ahead = half - row;
      const int side = col - half;
      const Pos p{self.pos.x + ahead * fwd.x + side * right.x,
                  self.pos.y + ahead * fwd.y + side * right.y};
      std::uint8_t sprite = kSpriteWall;
      if (map.in_bounds(p)) {
        const int c = map.index(p);
        switch (map.at(c)) {
          case Terrain::kWall: sprite = kSpriteWall; break;
          case Terrain::kFloor: sprite = kSpriteFloor; break;
          case Terrain::kRiver: sprite = s.polluted[c] ? kSpritePollution : kSpriteRiver; break;
          case Terrain::kOrchard: sprite = s.apple[c] ? kSpriteApple : kSpriteOrchard; break;
        }
        const int who = s.avatar_at(p);
        if (who == player) {
          sprite = kSpriteSelf;
        } else if (who >= 0) {
          sprite = condition == Condition::kAnonymous
                       ? static_cast<std::uint8_t>(kSpriteOther)
                       : static_cast<std::uint8_t>(kSpritePlayerBase + who);
        }
      }
      view.cells[row * window + col] = sprite;
    }
  }
  return view;
}

namespace {

template <typename T>
void encode_one_hot_impl(const ViewGrid& view, int channels, std::span<T> out) {
  require(out.size() == view.cells.size() * static_cast<std::size_t>(channels),
          "encode_one_hot: output size mismatch");
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t i = 0; i < view.cells.size(); ++i) {
    const int sprite = view.cells[i];
    if (sprite == kSpriteFloor) continue;
    require(sprite - 1 < channels, "encode_one_hot: sprite outside channel range");
    out[i * channels + (sprite - 1)] = T(1);
  }
}

}  // namespace

void encode_one_hot(const ViewGrid& view, int channels, std::span<float> out) {
  encode_one_hot_impl(view, channels, out);
}

void encode_one_hot(const ViewGrid& view, int channels, std::span<double> out) {
  encode_one_hot_impl(view, channels, out);
}

}  // namespace cleanup::env
