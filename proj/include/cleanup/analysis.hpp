#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cleanup/metrics.hpp"

namespace cleanup::analysis {

// Raised when data cannot support the requested statistic (rank-deficient
// design, zero variance, unbalanced panel, missing cells).
class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- distributions ------------------------------------------------------------

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized lower and upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double normal_cdf(double z);
double student_t_cdf(double t, double df);
// Quantile of the t distribution, p in (0, 1).
double student_t_quantile(double p, double df);
double chi2_sf(double x, double df);
double f_sf(double f, double df1, double df2);
// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_sf(double x);

// ---- tests --------------------------------------------------------------------

// kGreater: alternative mean(a) > mean(b) (or mean(x - y) > 0 for paired).
enum class Sided : std::uint8_t { kTwoSided, kGreater, kLess };

struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p = 1.0;
};

TestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                        Sided sided = Sided::kTwoSided);
TestResult paired_t_test(std::span<const double> x, std::span<const double> y,
                         Sided sided = Sided::kTwoSided);

// Fisher's method: chi2 = -2 sum ln p with 2k degrees of freedom.
TestResult fisher_combine(std::span<const double> p);

// One-sample Kolmogorov-Smirnov test against U(0, 1).
TestResult ks_uniform(std::span<const double> samples);

// ---- regression ---------------------------------------------------------------

struct RegressionResult {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> ci_low, ci_high;  // 95%
  std::vector<double> t_values;
  std::vector<double> p_values;  // two-sided
  int n = 0;
  int df_residual = 0;
  double rss = 0.0;
  double sigma = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares by column-pivoted QR. `x` excludes the intercept,
// which is added as the first coefficient. Throws DegenerateData when the
// design is rank-deficient or leaves no residual degrees of freedom.
RegressionResult ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::vector<std::string> names = {});
RegressionResult simple_regression(std::span<const double> x, std::span<const double> y,
                                   const std::string& name = "x");

// ---- canonical public-goods game ----------------------------------------------

struct PublicGoodsPayoffs {
  double total = 0.0;
  std::vector<double> individual;
};

PublicGoodsPayoffs canonical_pg_payoffs(int n, double endowment, double multiplier,
                                        std::span<const double> contributions);

// ---- social-dilemma analysis --------------------------------------------------

struct JenksBreak {
  double lower_max = 0.0;  // largest value of the lower class
  double upper_min = 0.0;  // smallest value of the upper class; cooperate iff >= this
  double within_ss = 0.0;
};

// Two-class natural breaks over sorted values, minimizing the summed
// within-class squared deviation; ties resolve to the lowest cutpoint.
JenksBreak jenks_breaks(std::span<const double> values);

struct SchellingCell {
  std::vector<double> samples;
  int count() const { return static_cast<int>(samples.size()); }
  double mean() const;
  // 95% t-interval; equal to the mean for fewer than two samples.
  std::pair<double, double> ci() const;
};

struct SchellingDiagram {
  int players = 0;
  double threshold = 0.0;
  std::vector<SchellingCell> cooperator;  // index: number of cooperators in the group
  std::vector<SchellingCell> defector;
};

// Classifies each player as a cooperator iff its contribution >= threshold
// and collects apple consumption by the group's cooperator count.
SchellingDiagram schelling_diagram(std::span<const metrics::EpisodeMetrics> episodes,
                                   double threshold);

struct DilemmaVerdict {
  bool sufficient = false;  // false: a required cell was empty
  double p1 = 1.0;   // R_c(N) > R_d(0)
  double p2 = 1.0;   // R_c(N) > R_c(1)
  double p3a = 1.0;  // R_d(0) > R_c(1)
  double p3b = 1.0;  // R_d(N-1) > R_c(N)
  double p3 = 1.0;   // Fisher combination of p3a and p3b
  double p_overall = 1.0;
  bool verdict = false;
};

// Cells are indexed by the total number of cooperators, so a lone
// cooperator sits in cell 1.
DilemmaVerdict dilemma_conditions(const SchellingDiagram& diagram, double alpha = 0.05);

struct DilemmaRegressions {
  RegressionResult individual;  // apples_j ~ (c_j - mean c)
  RegressionResult group;       // mean apples ~ mean c
};

DilemmaRegressions dilemma_regressions(std::span<const metrics::EpisodeMetrics> episodes);

// ---- condition effects --------------------------------------------------------

struct PanelRow {
  int group = 0;
  int condition = 0;  // 0 or 1
  double y = 0.0;
};

struct AnovaResult {
  double f = 0.0;
  int df1 = 1;
  int df2 = 0;
  double p = 1.0;
  double effect = 0.0;  // condition coefficient
};

// Condition F-test with group fixed effects. Every group must appear in both
// conditions with the same number of rows per cell.
AnovaResult condition_anova(std::span<const PanelRow> rows);

RegressionResult performance_regression(std::span<const double> predictor,
                                        std::span<const double> collective_return,
                                        const std::string& name);

struct MediationResult {
  double a = 0.0;       // condition -> mediator
  double b = 0.0;       // mediator -> outcome | condition
  double ab = 0.0;      // indirect effect
  double c = 0.0;       // total effect
  double c_prime = 0.0; // direct effect
  double ab_ci_low = 0.0, ab_ci_high = 0.0;  // percentile bootstrap
  double c_ci_low = 0.0, c_ci_high = 0.0;
  double c_prime_ci_low = 0.0, c_prime_ci_high = 0.0;
  double ab_p = 1.0;  // two-sided bootstrap p
  double c_p = 1.0, c_prime_p = 1.0;
  int bootstrap_n = 0;
};

// Product-of-coefficients mediation. Resample k draws from its own stream
// derive_seed(seed, k), so resamples are order independent.
MediationResult mediation(std::span<const double> condition, std::span<const double> mediator,
                          std::span<const double> outcome, int bootstrap_n = 10000,
                          std::uint64_t seed = 1);

}  // namespace cleanup::analysis
