// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [--only N[,N...]] [--report] [--report-file PATH]
//
// Exit status is the number of failed criteria, or 0 with --report as long
// as every criterion could be evaluated. --report-file also writes the lines
// to PATH. Criteria 7 and 8 read the toy-scale
// replication cache (CLEANUP_REPLICATION_DIR) and train any run missing from
// it, which takes hours.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "cleanup/analysis.hpp"
#include "cleanup/learner.hpp"
#include "cleanup/metrics.hpp"
#include "cleanup/orchestrator.hpp"
#include "cleanup/pipeline.hpp"
#include "cleanup/play_server.hpp"
#include "cleanup/scripted.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace cleanup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1. environment laws ----------------------------------------------------------

Outcome environment_laws() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const env::EnvParams& p : {env::EnvParams::agent_defaults(), env::EnvParams::human_defaults()}) {
    for (int k = 0; k < 12; ++k) {
      const double f = k / 11.0;
      double apple = p.pr_apple * (p.h_depletion - f) / (p.h_depletion - p.h_abundance);
      apple = std::min(p.pr_apple, std::max(0.0, apple));
      const double pollution = f < p.h_depletion ? p.pr_pollution : 0.0;
      worst = std::max(worst, std::abs(env::apple_regrowth_probability(f, p) - apple));
      worst = std::max(worst, std::abs(env::pollution_accrual_probability(f, p) - pollution));
    }
  }
  // Hold pollution at the depletion threshold: no apple may ever appear.
  env::EnvParams p = env::EnvParams::agent_defaults();
  p.episode_length = 10000;
  p.start_polluted = true;
  env::EnvState s = env::reset(p, 31);
  for (auto& a : s.avatars) a.frozen_until = p.episode_length + 1;
  const std::vector<env::Action> idle(p.num_players, env::Action::kNoop);
  int regrown = 0;
  const int river = static_cast<int>(p.map.river_cells().size());
  for (int t = 0; t < 10000; ++t) {
    // First half exactly at F = H_depletion, second half fully polluted.
    const int target = t < 5000 ? static_cast<int>(std::ceil(p.h_depletion * river)) : river;
    for (int c : p.map.river_cells()) {
      if (t >= 5000 && !s.polluted[c]) {
        s.polluted[c] = 1;
        ++s.polluted_count;
      }
      if (t < 5000 && s.polluted_count > target && s.polluted[c]) {
        s.polluted[c] = 0;
        --s.polluted_count;
      }
    }
    const int before = s.apple_count;
    env::step(s, idle, p);
    regrown += std::max(0, s.apple_count - before);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && regrown == 0 && secs < 1.0,
          "max |law - hand| " + fmt(worst) + ", apples regrown at F>=H_dep " +
              std::to_string(regrown) + ", " + fmt(secs, 3) + " s"};
}

// ---- 2. replay determinism --------------------------------------------------------

Outcome replay_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const env::EnvParams p = env::EnvParams::agent_defaults();
  Rng rng(2024);
  int identical = 0;
  for (int k = 0; k < 100; ++k) {
    const std::uint64_t seed = rng();
    env::EnvState s = env::reset(p, seed);
    env::EpisodeLog log = env::EpisodeLog::begin(s, p, seed, k % 2 ? Condition::kAnonymous
                                                                   : Condition::kIdentifiable);
    std::vector<env::Action> joint(p.num_players);
    while (s.step < p.episode_length) {
      for (auto& a : joint) a = static_cast<env::Action>(uniform_index(rng, env::kNumActions));
      const env::StepEvents ev = env::step(s, joint, p);
      log.append(s, joint, ev);
    }
    std::stringstream io;
    log.write(io);
    const env::EpisodeLog back = env::EpisodeLog::read(io);
    const env::ReplayResult r = env::replay(back);
    if (r.identical && r.final_state == s && back.steps == log.steps) ++identical;
  }
  const double secs = seconds_since(t0);
  return {identical == 100 && secs < 30.0,
          std::to_string(identical) + "/100 episodes bit-exact after JSONL round trip, " +
              fmt(secs, 3) + " s"};
}

// ---- 3. gradient checks -----------------------------------------------------------

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_at;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto problem = testing::make_grad_problem(1000 + seed, seed % 2 == 0);
    const auto errs = testing::gradient_errors(problem);
    for (std::size_t t = 0; t < errs.size(); ++t) {
      if (errs[t] > worst) {
        worst = errs[t];
        worst_at = problem.params.layout()[t].name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 120.0,
          "20 configurations, max relative error " + fmt(worst) + " (" + worst_at + "), " +
              fmt(secs, 3) + " s"};
}

// ---- 4. V-Trace on-policy equivalence ---------------------------------------------

Outcome vtrace_on_policy() {
  Rng rng(404);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 100));
    std::vector<double> lp(n), r(n), d(n), v(n);
    for (int t = 0; t < n; ++t) {
      lp[t] = std::log(uniform(rng, 0.01, 1.0));
      r[t] = uniform(rng, -5, 5);
      d[t] = uniform01(rng) < 0.05 ? 0.0 : uniform(rng, 0.9, 1.0);
      v[t] = uniform(rng, -10, 10);
    }
    const double bootstrap = uniform(rng, -10, 10);
    const learner::VTraceOutputs out = learner::vtrace(lp, lp, r, d, v, bootstrap);
    // n-step return with explicit discount products.
    for (int t = 0; t < n; ++t) {
      double g = 0.0, disc = 1.0;
      for (int j = t; j < n; ++j) {
        g += disc * r[j];
        disc *= d[j];
      }
      g += disc * bootstrap;
      worst = std::max(worst, std::abs(out.vs[t] - g));
      const double next = t + 1 < n ? out.vs[t + 1] : bootstrap;
      worst = std::max(worst, std::abs(out.pg_advantages[t] - (r[t] + d[t] * next - v[t])));
    }
  }
  return {worst <= 1e-10, "1000 trajectories, max |v_s - G_t| " + fmt(worst)};
}

// ---- 5. metric oracles ------------------------------------------------------------

double gini_quadratic(const std::vector<double>& x) {
  double sum = 0.0, diff = 0.0;
  for (double a : x) {
    sum += a;
    for (double b : x) diff += std::abs(a - b);
  }
  const double n = static_cast<double>(x.size());
  return diff / (2.0 * n * sum);
}

Outcome metric_oracles() {
  Rng rng(505);
  double worst = 0.0;
  int defined = 0, mismatched_na = 0;
  for (int k = 0; k < 200; ++k) {
    const env::EpisodeLog log = oracle::random_small_log(rng);
    const auto got = metrics::territoriality(log);
    const auto want = oracle::territoriality(oracle::presence(log));
    if (got.has_value() != want.has_value()) ++mismatched_na;
    if (got && want) {
      ++defined;
      worst = std::max(worst, std::abs(*got - *want));
    }
    // Consistency: bins by floor(T/10), last bin takes the remainder.
    const int steps = static_cast<int>(log.steps.size());
    const int width = std::max(1, steps / 10);
    std::vector<double> bins(10, 0.0);
    for (int t = 0; t < steps; ++t) {
      for (int c : log.steps[t].cleaned) bins[std::min(t / width, 9)] += c > 0;
    }
    const double total = std::accumulate(bins.begin(), bins.end(), 0.0);
    const auto cons = metrics::temporal_consistency(log);
    if (cons.has_value() != (total > 0)) ++mismatched_na;
    if (cons && total > 0) worst = std::max(worst, std::abs(*cons - (1.0 - gini_quadratic(bins))));
  }
  // Hand-scored turn sequences (members are seat indices).
  struct Case {
    std::vector<int> turns;
    double score;
  };
  const std::vector<Case> cases{
      {{0, 1, 2, 3, 4, 0, 1, 2, 3, 4}, 1.0},    // full rotation
      {{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, 0.4},    // two alternate: 8 turns at gap 1
      {{2, 2, 2, 2, 2}, 1.0 / 5.0},             // one member: every repeat scores 1
      {{0, 1, 1, 2, 0, 3}, 1.0 - 1.25 / 6.0},   // one immediate repeat, one gap-3 return
      {{0, 0}, 0.5},
      {{4, 3, 2, 1, 0, 1}, 1.0 - 0.75 / 6.0},
  };
  for (const auto& c : cases) {
    worst = std::max(worst, std::abs(*metrics::turn_taking_score(c.turns) - c.score));
  }
  for (int k = 0; k < 500; ++k) {
    std::vector<int> s(1 + uniform_index(rng, 40));
    for (int& m : s) m = static_cast<int>(uniform_index(rng, 5));
    worst = std::max(worst, std::abs(*metrics::turn_taking_score(s) - *oracle::turn_taking(s)));
  }
  return {worst <= 1e-12 && mismatched_na == 0 && defined >= 100,
          "200 random logs (" + std::to_string(defined) + " with river visits), " +
              std::to_string(cases.size()) + " hand-scored + 500 random turn sequences, max error " +
              fmt(worst) + ", NA mismatches " + std::to_string(mismatched_na)};
}

// ---- 6. statistics oracles --------------------------------------------------------

Outcome statistics_oracles() {
  using namespace analysis;
  std::ostringstream detail;
  bool ok = true;

  const TestResult fisher = fisher_combine(std::vector<double>{0.05, 0.05});
  const bool fisher_ok = std::abs(fisher.statistic - 11.98) <= 1e-2 && fisher.df == 4;
  ok &= fisher_ok;
  detail << "Fisher chi2 " << fmt(fisher.statistic, 6) << " df " << fisher.df;

  Rng rng(606);
  double ols_err = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int n = 20 + static_cast<int>(uniform_index(rng, 80));
    const int p = 1 + static_cast<int>(uniform_index(rng, 4));
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = standard_normal(rng);
      y(i) = 1.0 + x.row(i).sum() + standard_normal(rng);
    }
    const RegressionResult r = ols(x, y);
    Eigen::MatrixXd d(n, p + 1);
    d.col(0).setOnes();
    d.rightCols(p) = x;
    const Eigen::VectorXd beta = (d.transpose() * d).ldlt().solve(d.transpose() * y);
    for (int j = 0; j <= p; ++j) ols_err = std::max(ols_err, std::abs(r.coefficients[j] - beta(j)));
  }
  ok &= ols_err <= 1e-10;
  detail << "; OLS max error " << fmt(ols_err);

  int jenks_bad = 0;
  for (int k = 0; k < 500; ++k) {
    std::vector<double> v(2 + uniform_index(rng, 60));
    for (double& x : v) x = uniform01(rng) < 0.5 ? static_cast<double>(uniform_index(rng, 30))
                                                 : uniform(rng, 0, 100);
    std::sort(v.begin(), v.end());
    if (v.front() == v.back()) v.back() += 1.0;
    // Exhaustive search over every cut between distinct values.
    double best = INFINITY, cut = 0.0;
    for (std::size_t c = 1; c < v.size(); ++c) {
      if (v[c - 1] == v[c]) continue;
      auto ss = [&](std::size_t lo, std::size_t hi) {
        double m = 0.0;
        for (std::size_t i = lo; i < hi; ++i) m += v[i];
        m /= static_cast<double>(hi - lo);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += (v[i] - m) * (v[i] - m);
        return s;
      };
      const double s = ss(0, c) + ss(c, v.size());
      if (std::isinf(best) || s < best - 1e-12 * std::max(1.0, best)) {
        best = s;
        cut = v[c];
      }
    }
    std::vector<double> shuffled = v;
    shuffle(shuffled, rng);
    const JenksBreak got = jenks_breaks(shuffled);
    if (got.upper_min != cut || std::abs(got.within_ss - best) > 1e-9 * std::max(1.0, best)) {
      ++jenks_bad;
    }
  }
  ok &= jenks_bad == 0;
  detail << "; Jenks mismatches " << jenks_bad << "/500";

  std::vector<PanelRow> rows;
  for (int g = 0; g < 24; ++g) {
    const double mu = uniform(rng, -10, 10);
    for (int c = 0; c < 2; ++c) {
      for (int r = 0; r < 7; ++r) rows.push_back({g, c, mu + standard_normal(rng)});
    }
  }
  std::vector<double> ps;
  for (int k = 0; k < 1000; ++k) {
    for (int g = 0; g < 24; ++g) {
      std::vector<int> labels;
      for (int i = 0; i < 14; ++i) labels.push_back(rows[g * 14 + i].condition);
      shuffle(labels, rng);
      for (int i = 0; i < 14; ++i) rows[g * 14 + i].condition = labels[i];
    }
    ps.push_back(condition_anova(rows).p);
  }
  const TestResult ks = ks_uniform(ps);
  ok &= ks.p > 0.01;
  detail << "; ANOVA permutation-null KS p " << fmt(ks.p);

  // Planted mediation: a = 0.5, b = 0.6, direct effect 0.3.
  const double a = 0.5, b = 0.6;
  int covered = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = 200;
    std::vector<double> x(n), m(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i % 2;
      m[i] = a * x[i] + standard_normal(rng);
      y[i] = b * m[i] + 0.3 * x[i] + standard_normal(rng);
    }
    const MediationResult r = mediation(x, m, y, 2000, derive_seed(66, k));
    if (r.ab_ci_low <= a * b && a * b <= r.ab_ci_high) ++covered;
  }
  ok &= covered >= 95;
  detail << "; mediation CI covers planted ab in " << covered << "/100";
  return {ok, detail.str()};
}

// ---- 7-8. toy-scale replication ---------------------------------------------------

struct RunSummary {
  Condition condition;
  std::uint64_t seed;
  double contribution = 0.0, collective_return = 0.0;
  double turn_taking = NAN, territoriality = NAN;
  int episodes = 0;
};

orch::ExperimentConfig replication_config(Condition c, std::uint64_t seed) {
  return nlohmann::json{{"profile", "toy"}, {"condition", to_string(c)}, {"seed", seed}}
      .get<orch::ExperimentConfig>();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return NAN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Loads one run from the cache, training and evaluating it first if absent.
RunSummary replication_run(const fs::path& cache, Condition c, std::uint64_t seed) {
  const orch::ExperimentConfig cfg = replication_config(c, seed);
  const fs::path dir = cache / (to_string(c) + "_s" + std::to_string(seed));
  const fs::path ckpt = dir / "checkpoint", eval = dir / "eval";
  if (!fs::exists(ckpt / "manifest.json")) {
    std::cerr << "training " << dir.filename().string() << " (no cached checkpoint)\n";
    fs::create_directories(dir);
    orch::TrainingOptions o;
    o.out_dir = ckpt.string();
    orch::run_training(cfg, o);
  }
  const orch::PopulationCheckpoint population = orch::PopulationCheckpoint::load(ckpt.string());
  if (population.config.hash() != cfg.hash()) {
    throw ConfigError(dir.string() + " was trained with a different configuration");
  }
  if (!fs::exists(eval / ".done")) {
    fs::remove_all(eval);
    orch::run_evaluation(population, eval.string());
    std::ofstream(eval / ".done");
  }
  RunSummary s{c, seed};
  std::vector<double> tt, terr;
  for (const auto& m : pipeline::collect(eval.string())) {
    if (m.condition != c) throw ConfigError(eval.string() + " holds a log of the wrong condition");
    s.contribution += m.contribution_level;
    s.collective_return += m.collective_return;
    if (m.turn_taking) tt.push_back(*m.turn_taking);
    if (m.territoriality) terr.push_back(*m.territoriality);
    ++s.episodes;
  }
  if (s.episodes == 0) throw ConfigError(eval.string() + " has no evaluation logs");
  s.contribution /= s.episodes;
  s.collective_return /= s.episodes;
  s.turn_taking = mean_of(tt);
  s.territoriality = mean_of(terr);
  return s;
}

struct Replication {
  std::vector<RunSummary> identifiable, anonymous;
};

const Replication& replication() {
  static const Replication r = [] {
    const char* env_dir = std::getenv("CLEANUP_REPLICATION_DIR");
    const fs::path cache = env_dir ? env_dir : CLEANUP_REPLICATION_DIR;
    const char* env_seeds = std::getenv("CLEANUP_REPLICATION_SEEDS");
    const int seeds = env_seeds ? std::atoi(env_seeds) : 5;
    Replication out;
    for (int s = 1; s <= seeds; ++s) {
      out.identifiable.push_back(replication_run(cache, Condition::kIdentifiable, s));
      out.anonymous.push_back(replication_run(cache, Condition::kAnonymous, s));
    }
    return out;
  }();
  return r;
}

std::vector<double> field(const std::vector<RunSummary>& runs, double RunSummary::*f) {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (!std::isnan(r.*f)) v.push_back(r.*f);
  }
  return v;
}

std::string mean_ci(const std::vector<double>& v) {
  if (v.size() < 2) return v.empty() ? "NA" : fmt(v[0]) + " (n=1)";
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double se = std::sqrt(ss / (v.size() - 1) / v.size());
  const double h = analysis::student_t_quantile(0.975, static_cast<double>(v.size() - 1)) * se;
  return fmt(m) + " [" + fmt(m - h) + ", " + fmt(m + h) + "]";
}

double one_sided_greater(const std::vector<double>& a, const std::vector<double>& b) {
  try {
    return analysis::welch_t_test(a, b, analysis::Sided::kGreater).p;
  } catch (const analysis::DegenerateData&) {
    return NAN;
  }
}

Outcome directional_replication() {
  const Replication& r = replication();
  if (r.identifiable.size() < 5) {
    return {false, "only " + std::to_string(r.identifiable.size()) + " seeds per condition"};
  }
  std::ostringstream detail;
  bool ok = true;
  for (auto [name, f] : {std::pair{"contribution", &RunSummary::contribution},
                         std::pair{"collective return", &RunSummary::collective_return}}) {
    const auto id = field(r.identifiable, f), an = field(r.anonymous, f);
    const double mi = mean_of(id), ma = mean_of(an);
    const double lift = (mi - ma) / std::abs(ma);
    const double p = one_sided_greater(id, an);
    const bool pass = mi - ma >= 0.2 * std::abs(ma) && p < 0.05;
    ok &= pass;
    detail << name << ": identifiable " << mean_ci(id) << " vs anonymous " << mean_ci(an)
           << ", lift " << fmt(100 * lift, 3) << "%, Welch p(id > anon) " << fmt(p) << "; ";
  }
  detail << r.identifiable.size() << " seeds per condition";
  return {ok, detail.str()};
}

Outcome coordination_signature() {
  const Replication& r = replication();
  std::ostringstream detail;
  bool ok = true;
  // Expected: turn taking higher and territoriality lower when identifiable.
  const auto tt_id = field(r.identifiable, &RunSummary::turn_taking);
  const auto tt_an = field(r.anonymous, &RunSummary::turn_taking);
  const auto te_id = field(r.identifiable, &RunSummary::territoriality);
  const auto te_an = field(r.anonymous, &RunSummary::territoriality);
  const double p_tt_reversed = one_sided_greater(tt_an, tt_id);
  const double p_te_reversed = one_sided_greater(te_id, te_an);
  const bool tt_sign = mean_of(tt_id) > mean_of(tt_an);
  const bool te_sign = mean_of(te_id) < mean_of(te_an);
  ok &= !(p_tt_reversed < 0.05);
  ok &= !(p_te_reversed < 0.05);
  detail << "turn_taking identifiable " << mean_ci(tt_id) << " vs anonymous " << mean_ci(tt_an)
         << (tt_sign ? " (expected sign)" : " (sign reversed)") << ", p(reversed) "
         << fmt(p_tt_reversed) << "; territoriality identifiable " << mean_ci(te_id)
         << " vs anonymous " << mean_ci(te_an) << (te_sign ? " (expected sign)" : " (sign reversed)")
         << ", p(reversed) " << fmt(p_te_reversed);
  return {ok, detail.str()};
}

// ---- 9. social dilemma on scripted mixtures -----------------------------------------

Outcome scripted_dilemma() {
  const env::EnvParams p = env::EnvParams::agent_defaults();
  std::vector<metrics::EpisodeMetrics> rows;
  for (const auto& log : scripted::scripted_mixtures(p, 200, 7)) rows.push_back(metrics::summarize(log));
  std::vector<double> contributions;
  for (const auto& m : rows) {
    for (int c : m.contributions) contributions.push_back(c);
  }
  const analysis::JenksBreak br = analysis::jenks_breaks(contributions);
  const analysis::SchellingDiagram d = analysis::schelling_diagram(rows, br.upper_min);
  const analysis::DilemmaVerdict v = analysis::dilemma_conditions(d);
  const bool ok = v.sufficient && v.p1 < 0.05 && v.p2 < 0.05 && v.p3b < 0.05 && v.p_overall < 0.05;
  return {ok, "threshold " + fmt(br.upper_min) + ", p1 " + fmt(v.p1) + ", p2 " + fmt(v.p2) +
                  ", p3a " + fmt(v.p3a) + ", p3b " + fmt(v.p3b) + ", p_overall " +
                  fmt(v.p_overall) + ", verdict " + (v.verdict ? "dilemma" : "no dilemma")};
}

// ---- 10. protocol conformance -------------------------------------------------------

struct SessionCheck {
  int views = 0, bad_views = 0;
  int pairs = 0, pairs_one_applied = 0;
  bool finished = false, replay_identical = false;
};

SessionCheck drive_session(Condition condition, const fs::path& log_dir) {
  auto clock = std::make_shared<play::ManualClock>();
  play::ServerOptions o;
  o.manual_ticks = true;
  play::Server server(o, clock);
  play::SessionConfig cfg;
  cfg.plan = {condition};
  cfg.seed = condition == Condition::kAnonymous ? 11 : 12;
  cfg.log_dir = log_dir.string();
  const std::string id = server.create_session(cfg, play::scripted_bots());
  server.start();
  play::Client client("127.0.0.1", server.port());
  client.send({{"type", "join"}, {"name", "driver"}});
  const auto seat_msg = client.receive_type("seat");
  require(seat_msg.has_value(), "driver: no seat");
  const int seat = (*seat_msg)["seat"].get<int>();
  const int expected = condition == Condition::kAnonymous ? 1 : 5;

  SessionCheck out;
  std::vector<std::pair<int, int>> applied;  // (step, action) expected in the log
  Rng rng(cfg.seed);
  auto check_view = [&](const nlohmann::json& m) {
    ++out.views;
    const play::ClientView v = play::protocol::parse_view(m);
    std::set<int> palette(v.avatar_sprites.begin(), v.avatar_sprites.end());
    std::set<int> seen;
    for (std::uint8_t c : v.grid.cells) {
      if (c >= env::kSpriteSelf) seen.insert(c);
    }
    const bool colours_ok = expected == 1 ? palette.size() <= 2 : palette.size() == 5;
    const bool drawn_ok = std::includes(palette.begin(), palette.end(), seen.begin(), seen.end());
    if (static_cast<int>(v.bars.size()) != expected || !colours_ok || !drawn_ok) ++out.bad_views;
  };

  server.service();  // leaves the lobby
  if (auto m = client.receive_type("view")) check_view(*m);
  for (int tick = 0; tick < cfg.params.episode_length; ++tick) {
    const play::Millis now = 100LL * (tick + 1);
    if (tick % 7 == 0) {
      const auto first = static_cast<env::Action>(1 + uniform_index(rng, env::kNumActions - 1));
      const auto second = static_cast<env::Action>(1 + uniform_index(rng, env::kNumActions - 1));
      clock->set(now);
      client.send({{"type", "input"}, {"action", env::action_name(first)}, {"seq", 2 * tick}});
      const auto r1 = client.receive_type("ack");
      clock->set(now + 10);
      client.send({{"type", "input"}, {"action", env::action_name(second)}, {"seq", 2 * tick + 1}});
      const auto r2 = client.receive_type("drop");
      ++out.pairs;
      if (r1 && r2 && (*r1)["seq"] == 2 * tick && (*r2)["seq"] == 2 * tick + 1) {
        applied.emplace_back(tick, static_cast<int>(first));
      }
    }
    server.service();
    if (auto m = client.receive_type("view")) check_view(*m);
  }
  out.finished = client.receive_type("session_end").has_value();
  server.stop();

  const auto logs = server.session(id)->logs();
  if (logs.size() == 1) {
    for (const auto& [step, action] : applied) {
      if (logs[0].steps[step].action[seat] == action) ++out.pairs_one_applied;
    }
    for (const auto& entry : fs::directory_iterator(log_dir)) {
      if (entry.path().extension() != ".jsonl") continue;
      const env::EpisodeLog disk = env::EpisodeLog::load(entry.path().string());
      out.replay_identical = disk.steps == logs[0].steps && env::replay(disk).identical;
    }
  }
  return out;
}

Outcome protocol_conformance() {
  const fs::path dir = fs::temp_directory_path() / "cleanup_acceptance_sessions";
  fs::remove_all(dir);
  std::ostringstream detail;
  bool ok = true;
  for (Condition c : {Condition::kAnonymous, Condition::kIdentifiable}) {
    const SessionCheck s = drive_session(c, dir / to_string(c));
    const bool pass = s.finished && s.views == 2001 && s.bad_views == 0 &&
                      s.pairs_one_applied == s.pairs && s.replay_identical;
    ok &= pass;
    detail << to_string(c) << ": " << s.views << " views, " << s.bad_views
           << " with wrong bars/colours, " << s.pairs_one_applied << "/" << s.pairs
           << " input pairs applied exactly once, replay "
           << (s.replay_identical ? "identical" : "differs");
    if (c == Condition::kAnonymous) detail << "; ";
  }
  fs::remove_all(dir);
  return {ok, detail.str()};
}

struct Criterion {
  int id;
  const char* label;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  bool report = false;
  std::ofstream report_file;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report") {
      report = true;
    } else if (a == "--report-file" && i + 1 < argc) {
      report_file.open(argv[++i]);
      if (!report_file) {
        std::cerr << "cannot write " << argv[i] << "\n";
        return 64;
      }
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--only N[,N...]] [--report] [--report-file PATH]\n";
      return 64;
    }
  }
  const std::vector<Criterion> criteria{
      {1, "PRIMARY", "environment laws", environment_laws},
      {2, "PRIMARY", "replay determinism", replay_determinism},
      {3, "PRIMARY", "gradient checks", gradient_checks},
      {4, "PRIMARY", "v-trace on-policy equivalence", vtrace_on_policy},
      {5, "PRIMARY", "metric oracles", metric_oracles},
      {6, "PRIMARY", "statistics oracles", statistics_oracles},
      {7, "PRIMARY", "directional replication (toy scale)", directional_replication},
      {8, "PRIMARY", "coordination signature (toy scale)", coordination_signature},
      {9, "PRIMARY", "social dilemma on scripted mixtures", scripted_dilemma},
      {10, "SECONDARY", "protocol conformance", protocol_conformance},
  };
  int failed = 0, errors = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    failed += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] [" << c.label << "] " << c.name
         << " -- " << o.detail;
    std::cout << line.str() << std::endl;
    if (report_file) report_file << line.str() << std::endl;
  }
  const std::string summary =
      failed ? std::to_string(failed) + " criteria failed" : "all criteria passed";
  std::cout << summary << std::endl;
  if (report_file) report_file << summary << std::endl;
  if (report) return errors;
  return failed;
}
