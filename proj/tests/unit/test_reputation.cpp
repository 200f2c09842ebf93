#include "doctest.h"

#include <cmath>

#include "cleanup/reputation.hpp"

using namespace cleanup;
using namespace cleanup::reputation;

namespace {

ContributionTraces traces_at(std::vector<int> steps_on, int horizon) {
  ContributionTraces t(static_cast<int>(steps_on.size()), kDefaultLambda);
  std::vector<int> q(steps_on.size());
  for (int s = 0; s < horizon; ++s) {
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = s < steps_on[j] ? 1 : 0;
    t.update(q);
  }
  return t;
}

}  // namespace

TEST_CASE("traces approach the ceiling under constant contribution") {
  ContributionTraces t = traces_at({1000, 0}, 1000);
  CHECK(t[0] == doctest::Approx(trace_ceiling(kDefaultLambda)).epsilon(1e-9));
  CHECK(t[1] == 0.0);
  CHECK(trace_ceiling(kDefaultLambda) == doctest::Approx(100.0 / 3.0));
  // Geometric partial sum after k contributing steps.
  ContributionTraces u = traces_at({10}, 10);
  CHECK(u[0] == doctest::Approx((1 - std::pow(kDefaultLambda, 10)) / (1 - kDefaultLambda)));
}

TEST_CASE("the intrinsic penalty is a two-sided hinge around the group mean") {
  const MotivationParams m{2.5, 0.2, kDefaultLambda};
  CHECK(intrinsic_reward(5.0, 5.0, m) == 0.0);
  CHECK(intrinsic_reward(3.0, 5.0, m) == doctest::Approx(-5.0));
  CHECK(intrinsic_reward(7.0, 5.0, m) == doctest::Approx(-0.4));
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const MotivationParams s = sample_motivation(rng);
    CHECK(s.alpha >= 2.4);
    CHECK(s.alpha <= 3.0);
    CHECK(s.beta >= 0.16);
    CHECK(s.beta <= 0.20);
  }
}

TEST_CASE("identifiable observations are exact") {
  const ContributionTraces t = traces_at({5, 20, 0, 100, 3}, 100);
  Rng rng(1);
  const SocialObservation o = social_observation(t, 2, Condition::kIdentifiable, 0.5, rng);
  for (int j = 0; j < 5; ++j) CHECK(o.readings[j] == t[j]);
  CHECK(o.observed_mean() == doctest::Approx(t.mean()));
}

TEST_CASE("anonymous peer noise has the configured variance and spares self") {
  // Every trace near half the ceiling, so clamping never binds.
  const ContributionTraces mid = traces_at({23, 23, 23}, 23);
  const double sigma = 0.05;
  const double sd = sigma * trace_ceiling(kDefaultLambda);
  Rng rng(17);
  const int n = 40000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const SocialObservation o = social_observation(mid, 0, Condition::kAnonymous, sigma, rng);
    CHECK(o.readings[0] == mid[0]);
    const double e = o.readings[1] - mid[1];
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 * sd / std::sqrt(n));
  CHECK(var == doctest::Approx(sd * sd).epsilon(0.10));
}

TEST_CASE("anonymous readings are clamped to the trace range") {
  // A peer at zero reads as max(0, N(0, sd^2)), whose mean is sd / sqrt(2 pi).
  ContributionTraces t(2, kDefaultLambda);
  const double sd = 0.5 * trace_ceiling(kDefaultLambda);
  Rng rng(23);
  const int n = 40000;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const SocialObservation o = social_observation(t, 0, Condition::kAnonymous, 0.5, rng);
    CHECK(o.readings[1] >= 0.0);
    CHECK(o.readings[1] <= trace_ceiling(kDefaultLambda));
    sum += o.readings[1];
  }
  CHECK(sum / n == doctest::Approx(sd / std::sqrt(2.0 * M_PI)).epsilon(0.03));
}

TEST_CASE("a visibility mask zeroes peers out of view") {
  const ContributionTraces t = traces_at({50, 50, 50}, 50);
  Rng rng(2);
  const bool vis[] = {false, true, false};
  const SocialObservation o = social_observation(t, 0, Condition::kIdentifiable, 0.5, rng,
                                                 std::span<const bool>(vis, 3));
  CHECK(o.readings[0] == t[0]);
  CHECK(o.readings[1] == t[1]);
  CHECK(o.readings[2] == 0.0);
  CHECK(o.observed_mean(false) == doctest::Approx(t[1] / 2));
}
