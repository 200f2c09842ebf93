#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cleanup/env.hpp"

namespace cleanup::env {

inline constexpr int kEpisodeLogVersion = 1;

// One line of an episode log: the joint action taken at `step` and the
// resulting avatar poses, events and rewards.
struct StepRecord {
  int step = 0;
  std::vector<Pos> pos;
  std::vector<Facing> facing;
  std::vector<int> action;
  std::vector<double> reward;
  std::vector<int> cleaned;
  std::vector<int> apples;
  std::vector<std::pair<int, int>> tickets;
  double pollution_fraction = 0.0;
  std::vector<double> intrinsic;  // empty when not recorded

  bool operator==(const StepRecord&) const = default;
};

struct EpisodeHeader {
  int version = kEpisodeLogVersion;
  std::uint64_t seed = 0;
  Condition condition = Condition::kIdentifiable;
  EnvParams params;
  int group_id = 0;
  int episode_index = 0;
  std::vector<int> agent_ids;
  std::vector<Avatar> initial;  // poses right after reset
  std::string source;           // "evaluation", "training", "session", "scripted"
  int task_order = 0;           // position of the episode within a session
};

class EpisodeLog {
 public:
  EpisodeHeader header;
  std::vector<StepRecord> steps;

  // Starts a log for an episode that was just reset.
  static EpisodeLog begin(const EnvState& initial, const EnvParams& params, std::uint64_t seed,
                          Condition condition);

  void append(const EnvState& after, std::span<const Action> joint_action,
              const StepEvents& events, std::span<const double> intrinsic = {});

  int num_players() const { return header.params.num_players; }
  bool complete() const {
    return static_cast<int>(steps.size()) == header.params.episode_length;
  }

  void write(std::ostream& out) const;
  void save(const std::string& path) const;
  // Throws ParseError on malformed lines, version mismatch or gaps in the
  // step sequence. A log that simply ends early parses; see complete().
  static EpisodeLog read(std::istream& in);
  static EpisodeLog load(const std::string& path);
};

struct ReplayResult {
  bool identical = false;
  int first_mismatch = -1;  // step index of the first differing record
  std::vector<double> final_scores;
  EnvState final_state;
};

// Re-simulates the logged joint actions from the header seed and compares
// every record bit-exactly.
ReplayResult replay(const EpisodeLog& log);

}  // namespace cleanup::env
