#include "cleanup/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace cleanup::pipeline {

namespace fs = std::filesystem;
using metrics::EpisodeMetrics;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reads the first line and reports what kind of file this is.
enum class FileKind { kOther, kEpisodeLog, kMetricsCsv };

FileKind sniff(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return FileKind::kOther;
  if (line.rfind("# cleanup-metrics", 0) == 0) return FileKind::kMetricsCsv;
  if (line.find("\"cleanup-episode-log\"") != std::string::npos) return FileKind::kEpisodeLog;
  return FileKind::kOther;
}

std::pair<double, double> t_interval(std::span<const double> x) {
  analysis::SchellingCell cell;
  cell.samples.assign(x.begin(), x.end());
  return cell.ci();
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? kNaN : s / static_cast<double>(x.size());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void summarize_conditions(std::span<const EpisodeMetrics> rows, Report& report) {
  for (const std::string& name : metric_names()) {
    for (Condition c : {Condition::kIdentifiable, Condition::kAnonymous}) {
      std::vector<double> v;
      for (const auto& m : rows) {
        if (m.condition != c) continue;
        if (auto x = metric_value(m, name)) v.push_back(*x);
      }
      if (v.empty()) continue;
      ConditionSummary s;
      s.metric = name;
      s.condition = c;
      s.n = static_cast<int>(v.size());
      s.mean = mean_of(v);
      std::tie(s.ci_low, s.ci_high) = t_interval(v);
      report.summaries.push_back(s);
    }
  }
}

DilemmaReport dilemma_for(std::span<const EpisodeMetrics> rows, Condition c) {
  DilemmaReport d;
  d.condition = c;
  std::vector<EpisodeMetrics> subset;
  std::vector<double> contributions;
  for (const auto& m : rows) {
    if (m.condition != c) continue;
    subset.push_back(m);
    for (int x : m.contributions) contributions.push_back(x);
  }
  try {
    d.threshold = analysis::jenks_breaks(contributions);
  } catch (const std::exception& e) {
    d.note = std::string("no threshold: ") + e.what();
    return d;
  }
  d.diagram = analysis::schelling_diagram(subset, d.threshold->upper_min);
  d.verdict = analysis::dilemma_conditions(d.diagram);
  try {
    d.regressions = analysis::dilemma_regressions(subset);
  } catch (const std::exception& e) {
    d.note = std::string("no regressions: ") + e.what();
  }
  return d;
}

// Condition ANOVA on episode rows; when dropping undefined values leaves the
// panel unbalanced, falls back to one mean per (group, condition) cell.
EffectRow anova_for(std::span<const EpisodeMetrics> rows, const std::string& name) {
  EffectRow r;
  r.analysis = "anova";
  r.metric = name;
  r.term = "identifiable";
  r.ci_low = r.ci_high = kNaN;
  std::vector<analysis::PanelRow> panel;
  std::map<std::pair<int, int>, std::vector<double>> cells;
  for (const auto& m : rows) {
    auto x = metric_value(m, name);
    if (!x) continue;
    const int cond = m.condition == Condition::kIdentifiable ? 1 : 0;
    panel.push_back({m.group_id, cond, *x});
    cells[{m.group_id, cond}].push_back(*x);
  }
  auto fill = [&](const analysis::AnovaResult& a, int n) {
    r.estimate = a.effect;
    r.statistic = a.f;
    r.df1 = a.df1;
    r.df2 = a.df2;
    r.p = a.p;
    r.n = n;
  };
  try {
    fill(analysis::condition_anova(panel), static_cast<int>(panel.size()));
    return r;
  } catch (const std::exception& e) {
    r.note = e.what();
  }
  std::vector<analysis::PanelRow> means;
  for (const auto& [key, v] : cells) means.push_back({key.first, key.second, mean_of(v)});
  try {
    fill(analysis::condition_anova(means), static_cast<int>(means.size()));
    r.note = "cell means (" + r.note + ")";
  } catch (const std::exception& e) {
    r.statistic = r.df1 = r.df2 = r.estimate = kNaN;
    r.p = kNaN;
    r.note = e.what();
  }
  return r;
}

void add_regression_rows(Report& report, const analysis::RegressionResult& reg,
                         const std::string& analysis_name, const std::string& metric) {
  for (std::size_t k = 0; k < reg.names.size(); ++k) {
    EffectRow r;
    r.analysis = analysis_name;
    r.metric = metric;
    r.term = reg.names[k];
    r.estimate = reg.coefficients[k];
    r.ci_low = reg.ci_low[k];
    r.ci_high = reg.ci_high[k];
    r.statistic = reg.t_values[k];
    r.df1 = reg.df_residual;
    r.df2 = kNaN;
    r.p = reg.p_values[k];
    r.n = reg.n;
    report.effects.push_back(r);
  }
}

void performance_rows(std::span<const EpisodeMetrics> rows, Report& report) {
  // Group means over (run, group, condition).
  struct Acc {
    double ret = 0.0;
    int n = 0;
    std::map<std::string, std::pair<double, int>> x;
  };
  std::map<std::tuple<std::string, int, int>, Acc> groups;
  for (const auto& m : rows) {
    Acc& a = groups[{m.run, m.group_id, static_cast<int>(m.condition)}];
    a.ret += m.collective_return;
    ++a.n;
    for (const char* name : {"turn_taking", "consistency", "territoriality"}) {
      if (auto v = metric_value(m, name)) {
        a.x[name].first += *v;
        ++a.x[name].second;
      }
    }
  }
  for (const char* name : {"turn_taking", "consistency", "territoriality"}) {
    std::vector<double> x, y;
    for (const auto& [key, a] : groups) {
      auto it = a.x.find(name);
      if (it == a.x.end()) continue;
      x.push_back(it->second.first / it->second.second);
      y.push_back(a.ret / a.n);
    }
    try {
      add_regression_rows(report, analysis::performance_regression(x, y, name), "regression",
                          "collective_return");
    } catch (const std::exception& e) {
      EffectRow r;
      r.analysis = "regression";
      r.metric = "collective_return";
      r.term = name;
      r.estimate = r.ci_low = r.ci_high = r.statistic = r.df1 = r.df2 = r.p = kNaN;
      r.n = static_cast<int>(x.size());
      r.note = e.what();
      report.effects.push_back(r);
    }
  }
}

void mediation_rows(std::span<const EpisodeMetrics> rows, const AnalysisOptions& options,
                    Report& report) {
  std::vector<double> cond, med, out;
  for (const auto& m : rows) {
    auto v = metric_value(m, options.mediator);
    if (!v) continue;
    cond.push_back(m.condition == Condition::kIdentifiable ? 1.0 : 0.0);
    med.push_back(*v);
    out.push_back(m.collective_return);
  }
  auto row = [&](const std::string& term, double est, double lo, double hi, double p) {
    EffectRow r;
    r.analysis = "mediation";
    r.metric = "collective_return";
    r.term = term;
    r.estimate = est;
    r.ci_low = lo;
    r.ci_high = hi;
    r.statistic = r.df1 = r.df2 = kNaN;
    r.p = p;
    r.n = static_cast<int>(cond.size());
    return r;
  };
  try {
    const auto md = analysis::mediation(cond, med, out, options.bootstrap_n, options.seed);
    const std::string via = "via " + options.mediator;
    auto ab = row("indirect " + via, md.ab, md.ab_ci_low, md.ab_ci_high, md.ab_p);
    ab.note = "bootstrap " + std::to_string(md.bootstrap_n);
    report.effects.push_back(ab);
    report.effects.push_back(row("total", md.c, md.c_ci_low, md.c_ci_high, md.c_p));
    report.effects.push_back(
        row("direct", md.c_prime, md.c_prime_ci_low, md.c_prime_ci_high, md.c_prime_p));
    auto a = row("a: condition -> " + options.mediator, md.a, kNaN, kNaN, kNaN);
    report.effects.push_back(a);
    auto b = row("b: " + options.mediator + " -> outcome", md.b, kNaN, kNaN, kNaN);
    report.effects.push_back(b);
  } catch (const std::exception& e) {
    auto r = row("indirect via " + options.mediator, kNaN, kNaN, kNaN, kNaN);
    r.note = e.what();
    report.effects.push_back(r);
  }
}

void reward_rows(std::span<const EpisodeMetrics> rows, Report& report) {
  for (Condition c : {Condition::kIdentifiable, Condition::kAnonymous}) {
    std::vector<double> ext, in;
    for (const auto& m : rows) {
      if (m.condition != c || m.intrinsic.size() != m.returns.size()) continue;
      ext.insert(ext.end(), m.returns.begin(), m.returns.end());
      in.insert(in.end(), m.intrinsic.begin(), m.intrinsic.end());
    }
    if (ext.empty()) continue;
    EffectRow r;
    r.analysis = "reward_comparison";
    r.metric = to_string(c);
    r.term = "extrinsic - intrinsic";
    r.n = static_cast<int>(ext.size());
    r.df2 = kNaN;
    std::vector<double> d(ext.size());
    for (std::size_t k = 0; k < ext.size(); ++k) d[k] = ext[k] - in[k];
    r.estimate = mean_of(d);
    std::tie(r.ci_low, r.ci_high) = t_interval(d);
    try {
      const auto t = analysis::paired_t_test(ext, in, analysis::Sided::kGreater);
      r.statistic = t.statistic;
      r.df1 = t.df;
      r.p = t.p;
    } catch (const std::exception& e) {
      r.statistic = r.df1 = r.p = kNaN;
      r.note = e.what();
    }
    report.effects.push_back(r);
  }
}

void write_schelling(const DilemmaReport& d, const fs::path& path) {
  std::ofstream out(path);
  out << "cooperators,role,count,mean,ci_low,ci_high\n";
  auto cells = [&](const std::vector<analysis::SchellingCell>& v, const char* role) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k].count() == 0) continue;
      const auto [lo, hi] = v[k].ci();
      out << k << ',' << role << ',' << v[k].count() << ',' << fmt(v[k].mean()) << ','
          << fmt(lo) << ',' << fmt(hi) << '\n';
    }
  };
  cells(d.diagram.cooperator, "cooperator");
  cells(d.diagram.defector, "defector");
}

void print_regression(std::ostream& out, const analysis::RegressionResult& reg) {
  for (std::size_t k = 0; k < reg.names.size(); ++k) {
    out << "    " << reg.names[k] << " = " << fmt(reg.coefficients[k]) << "  95% CI ["
        << fmt(reg.ci_low[k]) << ", " << fmt(reg.ci_high[k]) << "]  t(" << reg.df_residual
        << ") = " << fmt(reg.t_values[k]) << "  p = " << fmt(reg.p_values[k]) << '\n';
  }
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"contribution_level", "collective_return",
                                              "territoriality", "turn_taking", "consistency"};
  return names;
}

std::optional<double> metric_value(const EpisodeMetrics& m, const std::string& name) {
  if (name == "contribution_level") return static_cast<double>(m.contribution_level);
  if (name == "collective_return") return m.collective_return;
  if (name == "territoriality") return m.territoriality;
  if (name == "turn_taking") return m.turn_taking;
  if (name == "consistency") return m.consistency;
  throw ConfigError("unknown metric '" + name + "'");
}

std::vector<EpisodeMetrics> collect(const std::string& dir, const metrics::MetricsConfig& config) {
  if (!fs::is_directory(dir)) throw ConfigError("collect: not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EpisodeMetrics> rows;
  for (const fs::path& f : files) {
    switch (sniff(f)) {
      case FileKind::kEpisodeLog: {
        std::string run = fs::relative(f.parent_path(), dir).generic_string();
        if (run == ".") run.clear();
        rows.push_back(metrics::summarize(env::EpisodeLog::load(f.string()), config, run));
        break;
      }
      case FileKind::kMetricsCsv: {
        std::ifstream in(f);
        auto more = metrics::read_csv(in);
        rows.insert(rows.end(), more.begin(), more.end());
        break;
      }
      case FileKind::kOther:
        break;
    }
  }
  return rows;
}

Report analyze(std::span<const EpisodeMetrics> rows, const AnalysisOptions& options) {
  Report report;
  summarize_conditions(rows, report);
  std::set<Condition> present;
  for (const auto& m : rows) present.insert(m.condition);
  for (Condition c : present) report.dilemmas.push_back(dilemma_for(rows, c));
  if (present.size() == 2) {
    for (const std::string& name : metric_names()) report.effects.push_back(anova_for(rows, name));
  }
  performance_rows(rows, report);
  if (present.size() == 2) mediation_rows(rows, options, report);
  reward_rows(rows, report);
  return report;
}

void write_report(const Report& report, std::span<const EpisodeMetrics> rows,
                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream out(dir / "metrics.csv");
    metrics::write_csv(out, rows);
  }
  {
    std::ofstream out(dir / "summary.csv");
    out << "metric,condition,n,mean,ci_low,ci_high\n";
    for (const auto& s : report.summaries) {
      out << s.metric << ',' << to_string(s.condition) << ',' << s.n << ',' << fmt(s.mean) << ','
          << fmt(s.ci_low) << ',' << fmt(s.ci_high) << '\n';
    }
  }
  {
    std::ofstream out(dir / "dilemma.csv");
    out << "condition,threshold,sufficient,p1,p2,p3a,p3b,p3,p_overall,verdict,"
           "individual_slope,individual_p,group_slope,group_p,note\n";
    for (const auto& d : report.dilemmas) {
      const bool reg = d.regressions.has_value();
      out << to_string(d.condition) << ',' << (d.threshold ? fmt(d.threshold->upper_min) : "NA")
          << ',' << d.verdict.sufficient << ',' << fmt(d.verdict.p1) << ',' << fmt(d.verdict.p2)
          << ',' << fmt(d.verdict.p3a) << ',' << fmt(d.verdict.p3b) << ',' << fmt(d.verdict.p3)
          << ',' << fmt(d.verdict.p_overall) << ',' << d.verdict.verdict << ','
          << (reg ? fmt(d.regressions->individual.coefficients[1]) : "NA") << ','
          << (reg ? fmt(d.regressions->individual.p_values[1]) : "NA") << ','
          << (reg ? fmt(d.regressions->group.coefficients[1]) : "NA") << ','
          << (reg ? fmt(d.regressions->group.p_values[1]) : "NA") << ',' << csv_field(d.note)
          << '\n';
      if (d.threshold) write_schelling(d, dir / ("schelling_" + to_string(d.condition) + ".csv"));
    }
  }
  {
    std::ofstream out(dir / "effects.csv");
    out << "analysis,metric,term,estimate,ci_low,ci_high,statistic,df1,df2,p,n,note\n";
    for (const auto& e : report.effects) {
      out << e.analysis << ',' << e.metric << ',' << csv_field(e.term) << ',' << fmt(e.estimate)
          << ',' << fmt(e.ci_low) << ',' << fmt(e.ci_high) << ',' << fmt(e.statistic) << ','
          << fmt(e.df1) << ',' << fmt(e.df2) << ',' << fmt(e.p) << ',' << e.n << ','
          << csv_field(e.note) << '\n';
    }
  }
  std::ofstream out(dir / "report.txt");
  out << "episodes: " << rows.size() << "\n\n== condition means (95% CI) ==\n";
  for (const auto& s : report.summaries) {
    out << "  " << s.metric << " [" << to_string(s.condition) << "] n=" << s.n << "  "
        << fmt(s.mean) << "  [" << fmt(s.ci_low) << ", " << fmt(s.ci_high) << "]\n";
  }
  out << "\n== social dilemma ==\n";
  for (const auto& d : report.dilemmas) {
    out << "  [" << to_string(d.condition) << "]";
    if (!d.threshold) {
      out << " " << d.note << '\n';
      continue;
    }
    out << " threshold (cooperate iff contribution >=) " << fmt(d.threshold->upper_min) << '\n';
    const auto& v = d.verdict;
    if (!v.sufficient) out << "    insufficient data: a required Schelling cell is empty\n";
    out << "    p1 " << fmt(v.p1) << "  p2 " << fmt(v.p2) << "  p3a " << fmt(v.p3a) << "  p3b "
        << fmt(v.p3b) << "  p3 " << fmt(v.p3) << "  p_overall " << fmt(v.p_overall)
        << "  verdict " << (v.verdict ? "dilemma" : "not shown") << '\n';
    if (d.regressions) {
      out << "    individual: apples ~ (c - mean c)\n";
      print_regression(out, d.regressions->individual);
      out << "    group: mean apples ~ mean c\n";
      print_regression(out, d.regressions->group);
    }
    if (!d.note.empty() && d.regressions) out << "    " << d.note << '\n';
  }
  out << "\n== effects ==\n";
  for (const auto& e : report.effects) {
    out << "  " << e.analysis << "  " << e.metric << "  " << e.term << ": " << fmt(e.estimate);
    if (!std::isnan(e.ci_low)) out << "  [" << fmt(e.ci_low) << ", " << fmt(e.ci_high) << "]";
    if (e.analysis == "anova") {
      out << "  F(" << fmt(e.df1) << ", " << fmt(e.df2) << ") = " << fmt(e.statistic);
    } else if (!std::isnan(e.statistic)) {
      out << "  t(" << fmt(e.df1) << ") = " << fmt(e.statistic);
    }
    out << "  p = " << fmt(e.p) << "  n = " << e.n;
    if (!e.note.empty()) out << "  (" << e.note << ")";
    out << '\n';
  }
}

}  // namespace cleanup::pipeline
