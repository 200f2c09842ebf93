#include "cleanup/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cleanup::analysis {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

// Continued fraction for the incomplete beta, modified Lentz.
double beta_cf(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

// Upper tail of the t distribution, P(T > t).
double student_t_sf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0 ? tail : 1.0 - tail;
}

double t_p_value(double t, double df, Sided sided) {
  if (std::isnan(t)) return 1.0;
  switch (sided) {
    case Sided::kGreater: return student_t_sf(t, df);
    case Sided::kLess: return student_t_sf(-t, df);
    case Sided::kTwoSided: return std::min(1.0, 2.0 * student_t_sf(std::abs(t), df));
  }
  return 1.0;
}

// Type-7 sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& s, double q) {
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

// ---- distributions ------------------------------------------------------------

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete_beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double gamma_p(double a, double x) {
  require(a > 0.0, "gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x >= a + 1.0) return 1.0 - gamma_q(a, x);
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q(double a, double x) {
  require(a > 0.0, "gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p(a, x);
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double student_t_cdf(double t, double df) { return 1.0 - student_t_sf(t, df); }

double student_t_quantile(double p, double df) {
  require(p > 0.0 && p < 1.0, "student_t_quantile: p must be in (0, 1)");
  if (p == 0.5) return 0.0;
  // The upper tail is decreasing in t; bracket then bisect.
  const double target = 1.0 - p;
  double lo = -1.0, hi = 1.0;
  while (student_t_sf(lo, df) < target) lo *= 2.0;
  while (student_t_sf(hi, df) > target) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 4 * kEps * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_sf(mid, df) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

double f_sf(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    const double pi2 = M_PI * M_PI;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double j = 2.0 * k - 1.0;
      cdf += std::exp(-j * j * pi2 / (8.0 * x * x));
    }
    return 1.0 - std::sqrt(2.0 * M_PI) / x * cdf;
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

// ---- tests --------------------------------------------------------------------

TestResult welch_t_test(std::span<const double> a, std::span<const double> b, Sided sided) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateData("welch_t_test: each sample needs >= 2 values");
  const double va = variance_of(a) / static_cast<double>(a.size());
  const double vb = variance_of(b) / static_cast<double>(b.size());
  if (va + vb <= 0.0) throw DegenerateData("welch_t_test: both samples have zero variance");
  TestResult r;
  r.statistic = (mean_of(a) - mean_of(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = t_p_value(r.statistic, r.df, sided);
  return r;
}

TestResult paired_t_test(std::span<const double> x, std::span<const double> y, Sided sided) {
  if (x.size() != y.size()) throw DegenerateData("paired_t_test: samples differ in length");
  if (x.size() < 2) throw DegenerateData("paired_t_test: need >= 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  TestResult r;
  r.df = static_cast<double>(d.size() - 1);
  const double m = mean_of(d);
  const double v = variance_of(d);
  if (v <= 0.0) {
    if (m != 0.0) throw DegenerateData("paired_t_test: constant nonzero differences");
    r.statistic = 0.0;
    r.p = sided == Sided::kTwoSided ? 1.0 : 0.5;
    return r;
  }
  r.statistic = m / std::sqrt(v / static_cast<double>(d.size()));
  r.p = t_p_value(r.statistic, r.df, sided);
  return r;
}

TestResult fisher_combine(std::span<const double> p) {
  require(!p.empty(), "fisher_combine: no p-values");
  TestResult r;
  for (double v : p) {
    require(v >= 0.0 && v <= 1.0, "fisher_combine: p-value outside [0, 1]");
    r.statistic += -2.0 * std::log(v);
  }
  r.df = 2.0 * static_cast<double>(p.size());
  r.p = std::isinf(r.statistic) ? 0.0 : chi2_sf(r.statistic, r.df);
  return r;
}

TestResult ks_uniform(std::span<const double> samples) {
  require(!samples.empty(), "ks_uniform: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  TestResult r;
  r.statistic = d;
  r.df = n;
  const double sn = std::sqrt(n);
  r.p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

// ---- regression ---------------------------------------------------------------

RegressionResult ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::vector<std::string> names) {
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(x.cols()) + 1;
  if (x.rows() != n) throw DegenerateData("ols: design and response differ in length");
  if (n <= p) throw DegenerateData("ols: no residual degrees of freedom");
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = x;
  names.insert(names.begin(), "intercept");
  names.resize(p);
  for (int j = 0; j < p; ++j) {
    if (names[j].empty()) names[j] = "x" + std::to_string(j);
  }

  RegressionResult r;
  r.names = names;
  r.n = n;
  r.df_residual = n - p;
  const bool constant_y = (y.array() == y(0)).all();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) throw DegenerateData("ols: rank-deficient design");

  Eigen::VectorXd beta;
  if (constant_y) {
    beta = Eigen::VectorXd::Zero(p);
    beta(0) = y(0);
  } else {
    beta = qr.solve(y);
  }
  const Eigen::VectorXd resid = y - design * beta;
  r.rss = constant_y ? 0.0 : resid.squaredNorm();
  const double sigma2 = r.rss / r.df_residual;
  r.sigma = std::sqrt(sigma2);
  const double tss = (y.array() - y.mean()).square().sum();
  r.r_squared = tss > 0.0 ? 1.0 - r.rss / tss : 0.0;

  // (X'X)^-1 = P R^-1 R^-T P'.
  const Eigen::MatrixXd rmat = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      rmat.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * (rinv * rinv.transpose()) * perm.transpose();
  const double tcrit = student_t_quantile(0.975, r.df_residual);
  for (int j = 0; j < p; ++j) {
    const double b = beta(j);
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    double t, pv;
    if (se > 0.0) {
      t = b / se;
      pv = t_p_value(t, r.df_residual, Sided::kTwoSided);
    } else if (b == 0.0 || constant_y) {
      t = 0.0;
      pv = 1.0;
    } else {
      t = std::copysign(std::numeric_limits<double>::infinity(), b);
      pv = 0.0;
    }
    r.coefficients.push_back(b);
    r.std_errors.push_back(se);
    r.t_values.push_back(t);
    r.p_values.push_back(pv);
    r.ci_low.push_back(b - tcrit * se);
    r.ci_high.push_back(b + tcrit * se);
  }
  return r;
}

RegressionResult simple_regression(std::span<const double> x, std::span<const double> y,
                                   const std::string& name) {
  if (x.size() != y.size()) throw DegenerateData("simple_regression: length mismatch");
  if (x.size() < 3) throw DegenerateData("simple_regression: need >= 3 observations");
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    throw DegenerateData("simple_regression: predictor '" + name + "' has zero variance");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  return ols(Eigen::MatrixXd(xv), Eigen::VectorXd(yv), {name});
}

// ---- canonical public-goods game ----------------------------------------------

PublicGoodsPayoffs canonical_pg_payoffs(int n, double endowment, double multiplier,
                                        std::span<const double> contributions) {
  require(n >= 1 && static_cast<int>(contributions.size()) == n,
          "canonical_pg_payoffs: one contribution per player required");
  double sum = 0.0;
  for (double c : contributions) {
    require(c >= 0.0 && c <= endowment, "canonical_pg_payoffs: contribution outside [0, e]");
    sum += c;
  }
  PublicGoodsPayoffs out;
  out.total = n * endowment + (multiplier - 1.0) * sum;
  for (double c : contributions) out.individual.push_back(endowment - c + multiplier / n * sum);
  return out;
}

// ---- social-dilemma analysis --------------------------------------------------

JenksBreak jenks_breaks(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  if (s.size() < 2 || s.front() == s.back()) {
    throw DegenerateData("jenks_breaks: need at least two distinct values");
  }
  const double shift = mean_of(s);
  const std::size_t n = s.size();
  std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = s[i] - shift;
    pre[i + 1] = pre[i] + v;
    pre2[i + 1] = pre2[i] + v * v;
  }
  auto ss = [&](std::size_t lo, std::size_t hi) {
    const double k = static_cast<double>(hi - lo);
    const double sum = pre[hi] - pre[lo];
    return std::max(0.0, (pre2[hi] - pre2[lo]) - sum * sum / k);
  };
  JenksBreak best;
  best.within_ss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    if (s[k - 1] == s[k]) continue;
    const double total = ss(0, k) + ss(k, n);
    // Totals equal up to rounding count as ties and keep the lower cutpoint.
    if (std::isinf(best.within_ss) ||
        total < best.within_ss - 1e-12 * std::max(1.0, best.within_ss)) {
      best = {s[k - 1], s[k], total};
    }
  }
  return best;
}

double SchellingCell::mean() const {
  return samples.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(samples);
}

std::pair<double, double> SchellingCell::ci() const {
  const double m = mean();
  if (samples.size() < 2) return {m, m};
  const double half = student_t_quantile(0.975, static_cast<double>(samples.size() - 1)) *
                      std::sqrt(variance_of(samples) / static_cast<double>(samples.size()));
  return {m - half, m + half};
}

SchellingDiagram schelling_diagram(std::span<const metrics::EpisodeMetrics> episodes,
                                   double threshold) {
  SchellingDiagram d;
  d.threshold = threshold;
  for (const metrics::EpisodeMetrics& e : episodes) {
    const int n = static_cast<int>(e.contributions.size());
    if (static_cast<int>(e.apples.size()) != n) {
      throw DegenerateData("schelling_diagram: episode lacks per-player apple counts");
    }
    if (d.players == 0) {
      d.players = n;
      d.cooperator.resize(n + 1);
      d.defector.resize(n + 1);
    } else if (n != d.players) {
      throw DegenerateData("schelling_diagram: episodes differ in group size");
    }
    int cooperators = 0;
    for (int c : e.contributions) cooperators += c >= threshold ? 1 : 0;
    for (int j = 0; j < n; ++j) {
      auto& cells = e.contributions[j] >= threshold ? d.cooperator : d.defector;
      cells[cooperators].samples.push_back(e.apples[j]);
    }
  }
  return d;
}

namespace {

// One-sided Welch p for mean(a) > mean(b). With zero variance on both sides
// the comparison is exact: 0 when a > b, 1 when a < b, 0.5 on a tie.
double greater_p(const SchellingCell& a, const SchellingCell& b) {
  try {
    return welch_t_test(a.samples, b.samples, Sided::kGreater).p;
  } catch (const DegenerateData&) {
    const double ma = a.mean(), mb = b.mean();
    return ma > mb ? 0.0 : ma < mb ? 1.0 : 0.5;
  }
}

}  // namespace

DilemmaVerdict dilemma_conditions(const SchellingDiagram& diagram, double alpha) {
  DilemmaVerdict v;
  const int n = diagram.players;
  if (n < 2) return v;
  const SchellingCell& rc_all = diagram.cooperator[n];
  const SchellingCell& rd_none = diagram.defector[0];
  const SchellingCell& rc_lone = diagram.cooperator[1];
  const SchellingCell& rd_lone = diagram.defector[n - 1];
  for (const SchellingCell* c : {&rc_all, &rd_none, &rc_lone, &rd_lone}) {
    if (c->count() < 2) return v;
  }
  v.sufficient = true;
  v.p1 = greater_p(rc_all, rd_none);
  v.p2 = greater_p(rc_all, rc_lone);
  v.p3a = greater_p(rd_none, rc_lone);
  v.p3b = greater_p(rd_lone, rc_all);
  const double p3[2] = {v.p3a, v.p3b};
  v.p3 = fisher_combine(p3).p;
  v.p_overall = std::max({v.p1, v.p2, v.p3});
  v.verdict = v.p_overall < alpha;
  return v;
}

DilemmaRegressions dilemma_regressions(std::span<const metrics::EpisodeMetrics> episodes) {
  std::vector<double> xi, yi, xg, yg;
  for (const metrics::EpisodeMetrics& e : episodes) {
    const int n = static_cast<int>(e.contributions.size());
    if (n == 0 || static_cast<int>(e.apples.size()) != n) {
      throw DegenerateData("dilemma_regressions: episode lacks per-player data");
    }
    const double cbar =
        std::accumulate(e.contributions.begin(), e.contributions.end(), 0.0) / n;
    const double abar = std::accumulate(e.apples.begin(), e.apples.end(), 0.0) / n;
    for (int j = 0; j < n; ++j) {
      xi.push_back(e.contributions[j] - cbar);
      yi.push_back(e.apples[j]);
    }
    xg.push_back(cbar);
    yg.push_back(abar);
  }
  return {simple_regression(xi, yi, "relative_contribution"),
          simple_regression(xg, yg, "mean_contribution")};
}

// ---- condition effects --------------------------------------------------------

AnovaResult condition_anova(std::span<const PanelRow> rows) {
  std::map<int, std::array<int, 2>> cells;
  for (const PanelRow& r : rows) {
    if (r.condition != 0 && r.condition != 1) {
      throw DegenerateData("condition_anova: condition must be 0 or 1");
    }
    ++cells[r.group][r.condition];
  }
  if (cells.size() < 2) throw DegenerateData("condition_anova: need at least two groups");
  const int per_cell = cells.begin()->second[0];
  for (const auto& [g, c] : cells) {
    if (c[0] == 0 || c[0] != per_cell || c[1] != per_cell) {
      throw DegenerateData("condition_anova: unbalanced panel");
    }
  }
  std::map<int, int> column;
  for (const auto& [g, c] : cells) column.emplace(g, static_cast<int>(column.size()));
  const int groups = static_cast<int>(cells.size());
  const int n = static_cast<int>(rows.size());
  // Group dummies drop the first group, whose effect is the intercept.
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, groups);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    full(i, 0) = rows[i].condition;
    const int g = column[rows[i].group];
    if (g > 0) full(i, g) = 1.0;
    y(i) = rows[i].y;
  }
  const Eigen::MatrixXd restricted = full.rightCols(groups - 1);
  const RegressionResult rf = ols(full, y);
  const RegressionResult rr = ols(restricted, y);
  AnovaResult a;
  a.df2 = n - groups - 1;
  a.effect = rf.coefficients[1];
  // Sums of squares at rounding level are treated as exact zeros.
  const double tol = 1e-24 * std::max(1.0, y.squaredNorm());
  const double gain = rr.rss - rf.rss;
  if (gain <= tol) {
    a.f = 0.0;
    a.p = 1.0;
  } else if (rf.rss <= tol) {
    a.f = std::numeric_limits<double>::infinity();
    a.p = 0.0;
  } else {
    a.f = gain / (rf.rss / a.df2);
    a.p = f_sf(a.f, 1.0, a.df2);
  }
  return a;
}

RegressionResult performance_regression(std::span<const double> predictor,
                                        std::span<const double> collective_return,
                                        const std::string& name) {
  return simple_regression(predictor, collective_return, name);
}

MediationResult mediation(std::span<const double> condition, std::span<const double> mediator,
                          std::span<const double> outcome, int bootstrap_n, std::uint64_t seed) {
  const std::size_t n = condition.size();
  if (mediator.size() != n || outcome.size() != n) {
    throw DegenerateData("mediation: columns differ in length");
  }
  if (n < 4) throw DegenerateData("mediation: need >= 4 complete cases");
  require(bootstrap_n >= 1, "mediation: bootstrap_n must be positive");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(condition)) throw DegenerateData("mediation: condition does not vary");
  if (constant(mediator)) throw DegenerateData("mediation: degenerate mediator");

  struct Paths {
    double a, b, c, c_prime;
  };
  auto fit = [](const std::vector<double>& xs, const std::vector<double>& ms,
                const std::vector<double>& ys, RegressionResult* total,
                RegressionResult* direct) -> Paths {
    const Eigen::Index k = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd x1(k, 1), x2(k, 2);
    Eigen::VectorXd m(k), y(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      x1(i, 0) = xs[i];
      x2(i, 0) = xs[i];
      x2(i, 1) = ms[i];
      m(i) = ms[i];
      y(i) = ys[i];
    }
    const RegressionResult ra = ols(x1, m, {"condition"});
    const RegressionResult rb = ols(x2, y, {"condition", "mediator"});
    const RegressionResult rc = ols(x1, y, {"condition"});
    if (total) *total = rc;
    if (direct) *direct = rb;
    return {ra.coefficients[1], rb.coefficients[2], rc.coefficients[1], rb.coefficients[1]};
  };

  const std::vector<double> xs(condition.begin(), condition.end());
  const std::vector<double> ms(mediator.begin(), mediator.end());
  const std::vector<double> ys(outcome.begin(), outcome.end());
  RegressionResult total, direct;
  const Paths point = fit(xs, ms, ys, &total, &direct);

  MediationResult r;
  r.a = point.a;
  r.b = point.b;
  r.ab = point.a * point.b;
  r.c = point.c;
  r.c_prime = point.c_prime;
  r.c_p = total.p_values[1];
  r.c_prime_p = direct.p_values[1];

  std::vector<double> ab, c, cp;
  std::vector<double> bx(n), bm(n), by(n);
  for (int k = 0; k < bootstrap_n; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = uniform_index(rng, n);
      bx[i] = xs[j];
      bm[i] = ms[j];
      by[i] = ys[j];
    }
    try {
      const Paths p = fit(bx, bm, by, nullptr, nullptr);
      ab.push_back(p.a * p.b);
      c.push_back(p.c);
      cp.push_back(p.c_prime);
    } catch (const DegenerateData&) {
      // Resamples without variation in condition or mediator are skipped.
    }
  }
  if (ab.empty()) throw DegenerateData("mediation: every bootstrap resample was degenerate");
  r.bootstrap_n = static_cast<int>(ab.size());
  std::sort(ab.begin(), ab.end());
  std::sort(c.begin(), c.end());
  std::sort(cp.begin(), cp.end());
  r.ab_ci_low = quantile_sorted(ab, 0.025);
  r.ab_ci_high = quantile_sorted(ab, 0.975);
  r.c_ci_low = quantile_sorted(c, 0.025);
  r.c_ci_high = quantile_sorted(c, 0.975);
  r.c_prime_ci_low = quantile_sorted(cp, 0.025);
  r.c_prime_ci_high = quantile_sorted(cp, 0.975);
  const double total_draws = static_cast<double>(ab.size());
  const double below = static_cast<double>(std::count_if(ab.begin(), ab.end(), [](double v) { return v <= 0.0; }));
  const double above = static_cast<double>(std::count_if(ab.begin(), ab.end(), [](double v) { return v >= 0.0; }));
  r.ab_p = std::min(1.0, 2.0 * std::min(below, above) / total_draws);
  return r;
}

}  // namespace cleanup::analysis
