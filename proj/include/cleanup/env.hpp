#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cleanup/common.hpp"

namespace cleanup {

enum class Condition : std::uint8_t { kIdentifiable, kAnonymous };

std::string to_string(Condition c);
Condition condition_from_string(std::string_view s);

}  // namespace cleanup

namespace cleanup::env {

enum class Terrain : std::uint8_t { kFloor, kWall, kRiver, kOrchard };

struct Pos {
  int x = 0;
  int y = 0;
  bool operator==(const Pos&) const = default;
};

enum class Facing : std::uint8_t { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

Pos facing_delta(Facing f);
Facing rotate_cw(Facing f);
Facing rotate_ccw(Facing f);

// Plain-text tile map. First line is the version header "cleanup-map v1",
// then one row per line using W (wall), R (river), O (orchard), S (spawn)
// and '.' (open floor).
class TileMap {
 public:
  TileMap() = default;

  static TileMap parse(std::string_view text);
  static TileMap load(const std::string& path);
  // Built-in copies of the shipped assets: "cleanup_23x16" and "toy_12x9".
  static TileMap builtin(std::string_view name);

  std::string serialize() const;

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  bool in_bounds(Pos p) const {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
  }
  int index(Pos p) const { return p.y * width_ + p.x; }
  Pos pos(int index) const { return {index % width_, index / width_}; }
  Terrain at(Pos p) const { return terrain_[index(p)]; }
  Terrain at(int index) const { return terrain_[index]; }
  bool walkable(Pos p) const { return in_bounds(p) && at(p) != Terrain::kWall; }

  const std::vector<int>& river_cells() const { return river_; }
  const std::vector<int>& orchard_cells() const { return orchard_; }
  const std::vector<int>& spawn_cells() const { return spawn_; }

  bool operator==(const TileMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Terrain> terrain_;
  std::vector<int> river_;
  std::vector<int> orchard_;
  std::vector<int> spawn_;
};

struct EnvParams {
  double pr_apple = 0.03;
  double pr_pollution = 0.5;
  double h_abundance = 0.0;
  double h_depletion = 0.32;
  int episode_length = 1000;
  double ticket_cost = -1.0;
  double ticket_penalty = -50.0;
  int apples_per_point = 1;
  bool start_polluted = true;
  int num_players = 5;
  int beam_length = 5;
  int beam_width = 3;
  int ticket_freeze_steps = 0;
  int ticket_budget = -1;  // negative: unlimited
  TileMap map;

  // Throws ConfigError on violated invariants.
  void validate() const;

  // Parameter set of the reinforcement-learning experiment.
  static EnvParams agent_defaults();
  // Parameter set of the human-play protocol.
  static EnvParams human_defaults();

  bool operator==(const EnvParams&) const = default;
};

enum class Action : std::uint8_t {
  kNoop = 0,
  kForward,
  kBackward,
  kStepLeft,
  kStepRight,
  kTurnLeft,
  kTurnRight,
  kFireClean,
  kFireTicket,
};
inline constexpr int kNumActions = 9;

std::string_view action_name(Action a);

struct Avatar {
  Pos pos;
  Facing facing = Facing::kNorth;
  int frozen_until = 0;
  bool operator==(const Avatar&) const = default;
};

struct EnvState {
  int step = 0;
  // Per-map-cell occupancy flags; a cell can only be set inside its region.
  std::vector<std::uint8_t> polluted;
  std::vector<std::uint8_t> apple;
  int polluted_count = 0;
  int apple_count = 0;
  std::vector<Avatar> avatars;
  std::vector<double> score;
  std::vector<int> apple_counter;
  std::vector<int> tickets_used;
  Rng rng;

  double pollution_fraction(const TileMap& map) const {
    return static_cast<double>(polluted_count) /
           static_cast<double>(map.river_cells().size());
  }
  int num_players() const { return static_cast<int>(avatars.size()); }
  int avatar_at(Pos p) const;  // -1 when empty

  bool operator==(const EnvState&) const = default;
};

struct StepEvents {
  std::vector<int> cleaned;       // pollution cells removed by each player
  std::vector<int> apples_eaten;  // apples consumed by each player
  std::vector<std::pair<int, int>> tickets;  // (shooter, target)
  std::vector<double> reward;     // extrinsic reward per player

  bool contributed(int player) const { return cleaned[player] > 0; }
};

double apple_regrowth_probability(double polluted_fraction, const EnvParams& params);
double pollution_accrual_probability(double polluted_fraction, const EnvParams& params);

EnvState reset(const EnvParams& params, std::uint64_t seed);

// Advances the state by one step in place.
StepEvents step(EnvState& state, std::span<const Action> joint_action,
                const EnvParams& params);

// Cells covered by a beam fired from `from` along `facing`. Each lane stops
// at the first wall.
std::vector<Pos> beam_footprint(const TileMap& map, Pos from, Facing facing,
                                int length, int width);

// Per-cell sprite classes of a rendered view.
enum Sprite : std::uint8_t {
  kSpriteFloor = 0,
  kSpriteWall = 1,
  kSpriteRiver = 2,
  kSpritePollution = 3,
  kSpriteOrchard = 4,
  kSpriteApple = 5,
  kSpriteSelf = 6,
  kSpriteOther = 7,      // shared colour of peers in the anonymous condition
  kSpritePlayerBase = 8  // kSpritePlayerBase + j: peer j, identifiable condition
};

// Number of one-hot channels used to feed rendered views to a network.
// Floor is the all-zero encoding.
inline int visual_channels(int num_players) { return kSpritePlayerBase - 1 + num_players; }

struct ViewGrid {
  int size = 0;                     // square window side
  std::vector<std::uint8_t> cells;  // row-major sprite classes
  std::uint8_t at(int row, int col) const { return cells[row * size + col]; }
};

// Egocentric window centred on `player`. With `rotate` the view is turned so
// the avatar faces the top row. Cells beyond the map render as walls.
ViewGrid render_observation(const EnvState& state, const EnvParams& params, int player,
                            Condition condition, int window, bool rotate);

// Writes size*size*channels floats in (row, col, channel) order.
void encode_one_hot(const ViewGrid& view, int channels, std::span<float> out);
void encode_one_hot(const ViewGrid& view, int channels, std::span<double> out);

}  // namespace cleanup::env
