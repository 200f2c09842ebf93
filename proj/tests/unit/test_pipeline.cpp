#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cleanup/pipeline.hpp"
#include "cleanup/scripted.hpp"

using namespace cleanup;
namespace fs = std::filesystem;

namespace {

// Two runs of scripted mixtures in both conditions, group ids shared across
// conditions so the panel is balanced.
fs::path write_corpus(const std::string& name) {
  const fs::path root = fs::temp_directory_path() / ("cleanup_test_" + name);
  fs::remove_all(root);
  env::EnvParams p = env::EnvParams::agent_defaults();
  p.episode_length = 300;
  for (int run = 0; run < 2; ++run) {
    for (Condition c : {Condition::kIdentifiable, Condition::kAnonymous}) {
      const fs::path dir = root / ("run" + std::to_string(run)) / to_string(c);
      fs::create_directories(dir);
      auto logs = scripted::scripted_mixtures(p, 12, 100 + run * 2 + static_cast<int>(c));
      for (std::size_t k = 0; k < logs.size(); ++k) {
        logs[k].header.condition = c;
        logs[k].header.group_id = static_cast<int>(k % 3);
        logs[k].header.episode_index = static_cast<int>(k / 3);
        logs[k].save((dir / ("episode_" + std::to_string(k) + ".jsonl")).string());
      }
    }
  }
  std::ofstream(root / "notes.txt") << "not a log\n";
  return root;
}

}  // namespace

TEST_CASE("collect finds logs recursively, labels runs and ignores other files") {
  const fs::path root = write_corpus("collect");
  const auto rows = pipeline::collect(root.string());
  REQUIRE(rows.size() == 48);
  std::set<std::string> runs;
  for (const auto& r : rows) runs.insert(r.run);
  CHECK(runs == std::set<std::string>{"run0/anonymous", "run0/identifiable", "run1/anonymous",
                                       "run1/identifiable"});
  // A metrics CSV is read back as the same rows.
  {
    std::ofstream out(root / "cached.csv");
    metrics::write_csv(out, rows);
  }
  const auto twice = pipeline::collect(root.string());
  CHECK(twice.size() == 96);
  fs::remove_all(root);
}

TEST_CASE("analyze covers every metric, both conditions and each analysis family") {
  const fs::path root = write_corpus("analyze");
  const auto rows = pipeline::collect(root.string());
  pipeline::AnalysisOptions o;
  o.bootstrap_n = 200;
  const pipeline::Report report = pipeline::analyze(rows, o);
  CHECK(report.summaries.size() == 2 * pipeline::metric_names().size());
  REQUIRE(report.dilemmas.size() == 2);
  for (const auto& d : report.dilemmas) CHECK(d.threshold.has_value());
  std::set<std::string> families, anova_metrics;
  for (const auto& e : report.effects) {
    families.insert(e.analysis);
    if (e.analysis == "anova") anova_metrics.insert(e.metric);
    if (!std::isnan(e.p)) {
      CHECK(e.p >= 0.0);
      CHECK(e.p <= 1.0);
    }
  }
  CHECK(families.count("anova") == 1);
  CHECK(families.count("regression") == 1);
  CHECK(families.count("mediation") == 1);
  CHECK(anova_metrics.size() == pipeline::metric_names().size());

  const pipeline::Report again = pipeline::analyze(rows, o);
  REQUIRE(again.effects.size() == report.effects.size());
  for (std::size_t k = 0; k < report.effects.size(); ++k) {
    CHECK((again.effects[k].estimate == report.effects[k].estimate ||
           (std::isnan(again.effects[k].estimate) && std::isnan(report.effects[k].estimate))));
  }

  const fs::path out = root / "report";
  pipeline::write_report(report, rows, out.string());
  for (const char* f : {"metrics.csv", "summary.csv", "dilemma.csv", "effects.csv", "report.txt",
                        "schelling_identifiable.csv", "schelling_anonymous.csv"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  std::ifstream metrics_csv(out / "metrics.csv");
  CHECK(metrics::read_csv(metrics_csv).size() == rows.size());
  fs::remove_all(root);
}

TEST_CASE("analyze degrades gracefully with a single condition") {
  env::EnvParams p = env::EnvParams::agent_defaults();
  p.episode_length = 200;
  std::vector<metrics::EpisodeMetrics> rows;
  for (const auto& log : scripted::scripted_mixtures(p, 12, 5)) rows.push_back(metrics::summarize(log));
  pipeline::AnalysisOptions o;
  o.bootstrap_n = 50;
  const pipeline::Report report = pipeline::analyze(rows, o);
  CHECK(report.dilemmas.size() == 1);
  for (const auto& e : report.effects) CHECK(e.analysis != "anova");
}
