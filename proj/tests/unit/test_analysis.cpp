#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"

#include "cleanup/analysis.hpp"

using namespace cleanup;
using namespace cleanup::analysis;

namespace {

std::vector<double> normals(Rng& rng, int n, double mean, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * standard_normal(rng);
  return v;
}

// Exhaustive two-class split of sorted values with direct two-pass sums.
std::pair<double, double> jenks_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto ss = [&](std::size_t lo, std::size_t hi) {
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m += v[i];
    m /= static_cast<double>(hi - lo);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += (v[i] - m) * (v[i] - m);
    return s;
  };
  double best = INFINITY, cut = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k - 1] == v[k]) continue;
    const double s = ss(0, k) + ss(k, v.size());
    if (std::isinf(best) || s < best - 1e-12 * std::max(1.0, best)) {
      best = s;
      cut = v[k];
    }
  }
  return {cut, best};
}

metrics::EpisodeMetrics episode(std::vector<int> contributions, std::vector<int> apples) {
  metrics::EpisodeMetrics m;
  m.contributions = std::move(contributions);
  m.apples = std::move(apples);
  return m;
}

}  // namespace

TEST_CASE("special functions agree with Boost.Math") {
  Rng rng(1);
  for (int k = 0; k < 400; ++k) {
    const double a = uniform(rng, 0.1, 60.0), b = uniform(rng, 0.1, 60.0), x = uniform01(rng);
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) <= 1e-12);
    const double s = uniform(rng, 0.1, 80.0), y = uniform(rng, 0.0, 150.0);
    CHECK(std::abs(gamma_p(s, y) - boost::math::gamma_p(s, y)) <= 1e-12);
    CHECK(std::abs(gamma_q(s, y) - boost::math::gamma_q(s, y)) <= 1e-12);
  }
  for (int k = 0; k < 200; ++k) {
    const double df = uniform(rng, 1.0, 200.0), t = uniform(rng, -8.0, 8.0);
    boost::math::students_t dist(df);
    CHECK(std::abs(student_t_cdf(t, df) - boost::math::cdf(dist, t)) <= 1e-12);
    const double p = uniform(rng, 0.001, 0.999);
    CHECK(std::abs(student_t_quantile(p, df) - boost::math::quantile(dist, p)) <= 1e-9);
    const double x = uniform(rng, 0.0, 60.0);
    CHECK(std::abs(chi2_sf(x, df) -
                   boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x))) <=
          1e-12);
    const double d1 = uniform(rng, 1.0, 10.0), f = uniform(rng, 0.0, 20.0);
    CHECK(std::abs(f_sf(f, d1, df) -
                   boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, df), f))) <=
          1e-12);
  }
}

TEST_CASE("published table values") {
  CHECK(student_t_quantile(0.975, 10) == doctest::Approx(2.228138851986).epsilon(1e-10));
  CHECK(student_t_quantile(0.95, 1) == doctest::Approx(6.313751514675).epsilon(1e-10));
  CHECK(chi2_sf(3.841458820694, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(kolmogorov_sf(1.3580986393) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("Fisher combination of two p = 0.05") {
  const std::vector<double> p{0.05, 0.05};
  const TestResult r = fisher_combine(p);
  CHECK(r.statistic == doctest::Approx(11.9829).epsilon(1e-4));
  CHECK(r.df == 4);
  CHECK(r.p == doctest::Approx(0.0175).epsilon(1e-2));
  // Monotone decreasing in each input.
  const std::vector<double> q{0.04, 0.05};
  CHECK(fisher_combine(q).statistic > r.statistic);
}

TEST_CASE("t tests") {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  const TestResult paired = paired_t_test(x, y);
  CHECK(paired.statistic == doctest::Approx(-2.0 / (1.0 / std::sqrt(3.0))));
  CHECK(paired.df == 2);
  const TestResult same = paired_t_test(x, x);
  CHECK(same.statistic == 0.0);
  CHECK(same.p == 1.0);

  Rng rng(2);
  const auto a = normals(rng, 30, 5.0, 1.0), b = normals(rng, 30, 0.0, 1.0);
  CHECK(welch_t_test(a, b, Sided::kGreater).p < 1e-6);
  const TestResult two = welch_t_test(a, b), less = welch_t_test(a, b, Sided::kLess),
                   greater = welch_t_test(a, b, Sided::kGreater);
  CHECK(two.p == doctest::Approx(2 * std::min(less.p, greater.p)));
  CHECK(less.p + greater.p == doctest::Approx(1.0));
  const std::vector<double> flat{1, 1, 1};
  CHECK_THROWS_AS(welch_t_test(flat, flat), DegenerateData);
}

TEST_CASE("OLS equals the normal equations") {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const int n = 20 + static_cast<int>(uniform_index(rng, 80)), p = 1 + static_cast<int>(uniform_index(rng, 4));
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
    const Eigen::VectorXd beta = (d.transpose() * d).inverse() * (d.transpose() * y);
    for (int j = 0; j <= p; ++j) {
      CHECK(std::abs(r.coefficients[j] - beta(j)) <= 1e-10);
      CHECK(r.ci_low[j] <= r.coefficients[j]);
      CHECK(r.ci_high[j] >= r.coefficients[j]);
      CHECK(r.p_values[j] >= 0.0);
      CHECK(r.p_values[j] <= 1.0);
    }
  }
  Eigen::MatrixXd collinear(10, 2);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    collinear(i, 0) = i;
    collinear(i, 1) = 2 * i;
    y(i) = i;
  }
  CHECK_THROWS_AS(ols(collinear, y), DegenerateData);
}

TEST_CASE("simple regression planted slopes") {
  std::vector<double> x, y, flat;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(2.0 * i + 1.0);
    flat.push_back(4.0);
  }
  const RegressionResult exact = simple_regression(x, y);
  CHECK(exact.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(exact.p_values[1] < 1e-12);
  const RegressionResult constant = simple_regression(x, flat);
  CHECK(constant.coefficients[1] == 0.0);
  CHECK(constant.p_values[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(simple_regression(flat, y), DegenerateData);

  Rng rng(55);
  std::vector<double> xs, ys, zs;
  for (int i = 0; i < 600; ++i) {
    xs.push_back(uniform(rng, -50, 50));
    ys.push_back(-0.97 * xs.back() + 10.0 * standard_normal(rng));
    zs.push_back(1030.3 * xs.back() / 100.0 + 50.0 * standard_normal(rng));
  }
  const RegressionResult r = simple_regression(xs, ys);
  CHECK(r.ci_low[1] <= -0.97);
  CHECK(r.ci_high[1] >= -0.97);
  std::vector<double> scaled;
  for (double v : xs) scaled.push_back(v / 100.0);
  const RegressionResult perf = performance_regression(scaled, zs, "turn_taking");
  CHECK(perf.ci_low[1] <= 1030.3);
  CHECK(perf.ci_high[1] >= 1030.3);
  std::vector<double> neg;
  for (double v : zs) neg.push_back(-v);
  CHECK(performance_regression(scaled, neg, "turn_taking").coefficients[1] < 0.0);
}

TEST_CASE("canonical public goods payoffs") {
  const std::vector<double> none(4, 0.0), all(4, 20.0);
  const PublicGoodsPayoffs z = canonical_pg_payoffs(4, 20, 1.6, none);
  CHECK(z.total == 80.0);
  for (double u : z.individual) CHECK(u == 20.0);
  const PublicGoodsPayoffs f = canonical_pg_payoffs(4, 20, 1.6, all);
  for (double u : f.individual) CHECK(u == doctest::Approx(32.0));
  CHECK(f.total == doctest::Approx(128.0));
}

TEST_CASE("jenks breaks") {
  const std::vector<double> a{1, 2, 2, 10, 11};
  CHECK(jenks_breaks(a).lower_max == 2.0);
  CHECK(jenks_breaks(a).upper_min == 10.0);
  const std::vector<double> b{0, 0, 0, 1, 1, 1};
  CHECK(jenks_breaks(b).upper_min == 1.0);
  CHECK_THROWS_AS(jenks_breaks(std::vector<double>{3, 3, 3}), DegenerateData);

  Rng rng(6);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> v(2 + uniform_index(rng, 49));
    for (double& x : v) x = static_cast<double>(uniform_index(rng, 40));
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) continue;
    const auto [cut, ss] = jenks_oracle(v);
    const JenksBreak got = jenks_breaks(v);
    CHECK(std::abs(got.within_ss - ss) <= 1e-9 * std::max(1.0, ss));
    CHECK(got.upper_min == cut);
  }

  // Bimodal contributions with a gap around 76.
  std::vector<double> bimodal;
  for (int i = 0; i < 300; ++i) bimodal.push_back(std::max(0.0, 30 + 10 * standard_normal(rng)));
  for (int i = 0; i < 300; ++i) bimodal.push_back(150 + 20 * standard_normal(rng));
  const JenksBreak br = jenks_breaks(bimodal);
  CHECK(br.lower_max < 76.0);
  CHECK(br.upper_min > 76.0);
}

TEST_CASE("schelling diagram from a hand-built table") {
  const std::vector<metrics::EpisodeMetrics> table{
      episode({10, 0, 0}, {1, 5, 7}),
      episode({10, 10, 0}, {2, 4, 9}),
      episode({0, 0, 0}, {3, 3, 0}),
  };
  const SchellingDiagram d = schelling_diagram(table, 5.0);
  CHECK(d.players == 3);
  CHECK(d.cooperator[1].samples == std::vector<double>{1});
  CHECK(d.defector[1].mean() == doctest::Approx(6.0));
  CHECK(d.cooperator[2].mean() == doctest::Approx(3.0));
  CHECK(d.defector[2].samples == std::vector<double>{9});
  CHECK(d.defector[0].mean() == doctest::Approx(2.0));
  CHECK(d.cooperator[0].count() == 0);
  CHECK(d.cooperator[3].count() == 0);
  CHECK_FALSE(dilemma_conditions(d).sufficient);
}

TEST_CASE("dilemma conditions on planted payoffs") {
  Rng rng(8);
  const int n = 5;
  // Typical pattern: cooperation pays collectively, greed pays individually,
  // fear is absent (a lone cooperator does better than universal defection).
  auto rc = [](int i) { return 10.0 + 8.0 * i; };
  auto rd = [](int i) { return 5.0 + 12.0 * i; };
  std::vector<metrics::EpisodeMetrics> table;
  for (int e = 0; e < 240; ++e) {
    const int coop = e % (n + 1);
    metrics::EpisodeMetrics m;
    for (int j = 0; j < n; ++j) {
      const bool c = j < coop;
      m.contributions.push_back(c ? 100 : 0);
      const double mean = c ? rc(coop) : rd(coop);
      m.apples.push_back(std::max(0, static_cast<int>(std::lround(mean + 3.0 * standard_normal(rng)))));
    }
    table.push_back(m);
  }
  const SchellingDiagram d = schelling_diagram(table, 50.0);
  const DilemmaVerdict v = dilemma_conditions(d);
  CHECK(v.sufficient);
  CHECK(v.p1 < 0.05);
  CHECK(v.p2 < 0.05);
  CHECK(v.p3a > 0.5);
  CHECK(v.p3b < 0.05);
  CHECK(v.p_overall == std::max({v.p1, v.p2, v.p3}));
  CHECK(v.verdict);

  // Identical distributions everywhere: no structure, no verdict.
  std::vector<metrics::EpisodeMetrics> null_table;
  for (int e = 0; e < 240; ++e) {
    const int coop = e % (n + 1);
    metrics::EpisodeMetrics m;
    for (int j = 0; j < n; ++j) {
      m.contributions.push_back(j < coop ? 100 : 0);
      m.apples.push_back(static_cast<int>(std::lround(50 + 5 * standard_normal(rng))));
    }
    null_table.push_back(m);
  }
  CHECK_FALSE(dilemma_conditions(schelling_diagram(null_table, 50.0)).verdict);
}

TEST_CASE("dilemma regressions separate individual and group slopes") {
  Rng rng(10);
  std::vector<metrics::EpisodeMetrics> table;
  for (int e = 0; e < 120; ++e) {
    metrics::EpisodeMetrics m;
    double total = 0.0;
    for (int j = 0; j < 5; ++j) {
      m.contributions.push_back(static_cast<int>(uniform_index(rng, 200)));
      total += m.contributions.back();
    }
    const double mean = total / 5;
    for (int j = 0; j < 5; ++j) {
      const double y = 0.5 * mean - 0.8 * (m.contributions[j] - mean) + 5 * standard_normal(rng);
      m.apples.push_back(static_cast<int>(std::lround(y + 100)));
    }
    table.push_back(m);
  }
  const DilemmaRegressions r = dilemma_regressions(table);
  CHECK(r.individual.coefficients[1] < 0.0);
  CHECK(r.individual.p_values[1] < 1e-6);
  CHECK(r.group.coefficients[1] > 0.0);
}

TEST_CASE("condition ANOVA") {
  Rng rng(12);
  std::vector<PanelRow> rows;
  for (int g = 0; g < 24; ++g) {
    const double mu = uniform(rng, -10, 10);
    for (int c = 0; c < 2; ++c) {
      for (int r = 0; r < 3; ++r) rows.push_back({g, c, mu + 20.0 * c + standard_normal(rng)});
    }
  }
  const AnovaResult strong = condition_anova(rows);
  CHECK(strong.p < 1e-6);
  CHECK(strong.df2 == static_cast<int>(rows.size()) - 24 - 1);
  CHECK(strong.effect == doctest::Approx(20.0).epsilon(0.05));

  std::vector<PanelRow> flat;
  for (int g = 0; g < 5; ++g) {
    for (int c = 0; c < 2; ++c) flat.push_back({g, c, 3.0 * g});
  }
  CHECK(condition_anova(flat).f == doctest::Approx(0.0));

  rows.pop_back();
  CHECK_THROWS_AS(condition_anova(rows), DegenerateData);
}

TEST_CASE("ANOVA p-values are uniform under permuted condition labels") {
  Rng rng(14);
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
  CHECK(ks_uniform(ps).p > 0.01);
}

TEST_CASE("mediation recovers planted paths") {
  Rng rng(16);
  const int n = 48;
  std::vector<double> x(n), m(n), y(n), indep(n);
  for (int i = 0; i < n; ++i) {
    x[i] = i % 2;
    m[i] = 0.3 * x[i] + 0.1 * standard_normal(rng);
    y[i] = 1000.0 * m[i] + 10.0 * standard_normal(rng);
    indep[i] = standard_normal(rng);
  }
  const MediationResult full = mediation(x, m, y, 2000, 3);
  CHECK(full.c_prime_ci_low <= 0.0);
  CHECK(full.c_prime_ci_high >= 0.0);
  CHECK(full.ab == doctest::Approx(full.c).epsilon(0.1));
  CHECK(full.ab_ci_low <= full.ab);
  CHECK(full.ab_ci_high >= full.ab);
  CHECK(full.ab_p < 0.01);

  const MediationResult null = mediation(x, indep, y, 2000, 3);
  CHECK(null.ab_ci_low <= 0.0);
  CHECK(null.ab_ci_high >= 0.0);

  // Bootstrap draws are keyed by resample index, so results are reproducible.
  const MediationResult again = mediation(x, m, y, 2000, 3);
  CHECK(again.ab_ci_low == full.ab_ci_low);
  CHECK_THROWS_AS(mediation(x, std::vector<double>(n, 1.0), y, 100), DegenerateData);
}
