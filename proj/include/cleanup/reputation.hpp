#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cleanup/common.hpp"
#include "cleanup/env.hpp"

namespace cleanup::reputation {

inline constexpr double kDefaultLambda = 0.97;

struct MotivationParams {
  double alpha = 2.7;   // weight on falling behind the group
  double beta = 0.18;   // weight on getting ahead of the group
  double lambda = kDefaultLambda;
  bool operator==(const MotivationParams&) const = default;
};

// Largest value a trace can take when every step contributes.
inline double trace_ceiling(double lambda) { return 1.0 / (1.0 - lambda); }

inline double update_trace(double c_prev, int q, double lambda) {
  return lambda * c_prev + static_cast<double>(q);
}

// Two-sided hinge penalty; never positive, zero only at c_self == c_bar.
inline double intrinsic_reward(double c_self, double c_bar, const MotivationParams& m) {
  const double deficit = c_bar - c_self;
  if (deficit > 0.0) return -m.alpha * deficit;
  return m.beta * deficit;
}

// alpha ~ U(2.4, 3.0), beta ~ U(0.16, 0.20), lambda fixed.
MotivationParams sample_motivation(Rng& rng);

// Exponentially smoothed contribution counts for one group.
class ContributionTraces {
 public:
  ContributionTraces() = default;
  ContributionTraces(int players, double lambda) : lambda_(lambda), c_(players, 0.0) {}

  // q[j] is 1 when player j contributed this step.
  void update(std::span<const int> q);
  void reset() { std::fill(c_.begin(), c_.end(), 0.0); }

  double lambda() const { return lambda_; }
  int size() const { return static_cast<int>(c_.size()); }
  double operator[](int j) const { return c_[j]; }
  std::span<const double> values() const { return c_; }
  double mean() const;

 private:
  double lambda_ = kDefaultLambda;
  std::vector<double> c_;
};

struct SocialObservation {
  std::vector<double> readings;  // one slot per group member, in seat order
  int self_index = 0;
  Condition condition = Condition::kIdentifiable;
  double noise_sigma = 0.0;

  // Group-average estimate an agent forms from what it observes.
  double observed_mean(bool include_self = true) const;
};

// Identifiable: exact traces. Anonymous: the self entry is exact, every
// peer entry gets i.i.d. zero-mean Gaussian noise with standard deviation
// noise_sigma * trace_ceiling(lambda), clamped to [0, trace_ceiling].
// An optional visibility mask zeroes peers that are out of view.
SocialObservation social_observation(const ContributionTraces& traces, int self_index,
                                     Condition condition, double noise_sigma, Rng& rng,
                                     std::optional<std::span<const bool>> visible = std::nullopt);

}  // namespace cleanup::reputation
