#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cleanup/episode_log.hpp"

namespace cleanup::metrics {

// ---- territoriality -----------------------------------------------------------

// presence[j][l]: member j visited location l at least once. Returns the
// normalized beta diversity (gamma/alpha) / min(gamma, N_l) over visited
// locations, or nullopt when no location was visited.
std::optional<double> territoriality_from_presence(const std::vector<std::vector<bool>>& presence);

// Presence of each player on each river cell over the episode, including
// the initial poses.
std::vector<std::vector<bool>> river_presence(const env::EpisodeLog& log);

std::optional<double> territoriality(const env::EpisodeLog& log);

// ---- turn taking --------------------------------------------------------------

// Table value for the number of turns since a member's previous turn;
// `gap < 0` marks a first appearance, which scores like 4+.
double recency_value(int gap);

// 1 - mean recency over the turn sequence; nullopt for an empty sequence.
std::optional<double> turn_taking_score(std::span<const int> turns);

// A turn is an entry from outside into the river region followed by at
// least one cleaning event within `clean_window` steps, counting the entry
// step. Turns are ordered by entry step, then by player index.
std::vector<int> river_turns(const env::EpisodeLog& log, int clean_window = 20);

std::optional<double> turn_taking(const env::EpisodeLog& log, int clean_window = 20);

// ---- temporal consistency -----------------------------------------------------

// Pairwise-difference Gini coefficient sum|c_j - c_k| / (2 t^2 mean);
// nullopt when the mean is zero.
std::optional<double> gini_pairwise(std::span<const double> c);
// Same value in O(t log t) via sorting.
std::optional<double> gini(std::span<const double> c);

// Group contribution counts (players cleaning per step) summed into `bins`
// equal periods; the last bin absorbs the remainder.
std::vector<double> contribution_bins(const env::EpisodeLog& log, int bins = 10);

std::optional<double> temporal_consistency(const env::EpisodeLog& log, int bins = 10);

// ---- per-episode summary ------------------------------------------------------

struct EpisodeMetrics {
  std::string run;  // population or session label
  int group_id = 0;
  int episode_index = 0;
  Condition condition = Condition::kIdentifiable;
  int task_order = 0;
  double collective_return = 0.0;
  int contribution_level = 0;  // player-steps with at least one cleaned cell
  std::optional<double> territoriality;
  std::optional<double> turn_taking;
  std::optional<double> consistency;
  std::vector<int> contributions;  // clean steps per player
  std::vector<double> returns;     // points per player
  std::vector<int> apples;         // apples eaten per player
  std::vector<double> intrinsic;   // summed intrinsic reward per player, if logged
  bool operator==(const EpisodeMetrics&) const = default;
};

struct MetricsConfig {
  int clean_window = 20;
  int bins = 10;
};

// Throws ParseError on an incomplete log.
EpisodeMetrics summarize(const env::EpisodeLog& log, const MetricsConfig& config = {},
                         const std::string& run = {});

// CSV with a "# cleanup-metrics v1" header line, one row per episode;
// undefined scores are written as NA and per-player lists are ';'-joined.
void write_csv(std::ostream& out, std::span<const EpisodeMetrics> rows);
std::vector<EpisodeMetrics> read_csv(std::istream& in);

}  // namespace cleanup::metrics
