#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cleanup/analysis.hpp"
#include "cleanup/metrics.hpp"

namespace cleanup::pipeline {

// Walks `dir` recursively in path order. Episode logs are summarized with
// the run label set to their directory relative to `dir`; metrics CSVs are
// read as they are. Other files are ignored.
std::vector<metrics::EpisodeMetrics> collect(const std::string& dir,
                                             const metrics::MetricsConfig& config = {});

// Metric names understood by metric_value, in report order.
const std::vector<std::string>& metric_names();
std::optional<double> metric_value(const metrics::EpisodeMetrics& m, const std::string& name);

struct ConditionSummary {
  std::string metric;
  Condition condition = Condition::kIdentifiable;
  int n = 0;  // episodes with a defined value
  double mean = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% t-interval
};

struct DilemmaReport {
  Condition condition = Condition::kIdentifiable;
  std::optional<analysis::JenksBreak> threshold;
  analysis::SchellingDiagram diagram;
  analysis::DilemmaVerdict verdict;
  std::optional<analysis::DilemmaRegressions> regressions;
  std::string note;  // why a step was skipped, if any
};

// One line of the effects table; unused numeric fields stay NaN.
struct EffectRow {
  std::string analysis;  // anova, regression, mediation, reward_comparison
  std::string metric;
  std::string term;
  double estimate = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double statistic = 0.0;
  double df1 = 0.0, df2 = 0.0;
  double p = 1.0;
  int n = 0;
  std::string note;
};

struct AnalysisOptions {
  int bootstrap_n = 10000;
  std::uint64_t seed = 1;
  std::string mediator = "turn_taking";
};

struct Report {
  std::vector<ConditionSummary> summaries;
  std::vector<DilemmaReport> dilemmas;
  std::vector<EffectRow> effects;
};

// Condition summaries, per-condition dilemma analysis, condition ANOVAs
// (group fixed effects, pairing groups across conditions by group id),
// performance regressions on group means, mediation of the condition effect
// on collective return, and the intrinsic-vs-extrinsic reward comparison.
Report analyze(std::span<const metrics::EpisodeMetrics> rows, const AnalysisOptions& options = {});

// Writes metrics.csv, summary.csv, dilemma.csv, schelling_<condition>.csv,
// effects.csv and a human-readable report.txt into `out_dir`.
void write_report(const Report& report, std::span<const metrics::EpisodeMetrics> rows,
                  const std::string& out_dir);

}  // namespace cleanup::pipeline
