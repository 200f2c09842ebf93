#include "cleanup/reputation.hpp"

#include <algorithm>
#include <numeric>

namespace cleanup::reputation {

MotivationParams sample_motivation(Rng& rng) {
  MotivationParams m;
  m.alpha = uniform(rng, 2.4, 3.0);
  m.beta = uniform(rng, 0.16, 0.20);
  m.lambda = kDefaultLambda;
  return m;
}

void ContributionTraces::update(std::span<const int> q) {
  require(q.size() == c_.size(), "ContributionTraces::update: size mismatch");
  for (std::size_t j = 0; j < c_.size(); ++j) c_[j] = update_trace(c_[j], q[j], lambda_);
}

double ContributionTraces::mean() const {
  if (c_.empty()) return 0.0;
  return std::accumulate(c_.begin(), c_.end(), 0.0) / static_cast<double>(c_.size());
}

double SocialObservation::observed_mean(bool include_self) const {
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j < static_cast<int>(readings.size()); ++j) {
    if (!include_self && j == self_index) continue;
    sum += readings[j];
    ++count;
  }
  return count ? sum / count : 0.0;
}

SocialObservation social_observation(const ContributionTraces& traces, int self_index,
                                     Condition condition, double noise_sigma, Rng& rng,
                                     std::optional<std::span<const bool>> visible) {
  require(self_index >= 0 && self_index < traces.size(),
          "social_observation: self index out of range");
  require(noise_sigma >= 0.0, "social_observation: negative noise scale");
  SocialObservation obs;
  obs.self_index = self_index;
  obs.condition = condition;
  obs.noise_sigma = noise_sigma;
  obs.readings.assign(traces.values().begin(), traces.values().end());
  const double ceiling = trace_ceiling(traces.lambda());
  if (condition == Condition::kAnonymous && noise_sigma > 0.0) {
    const double sd = noise_sigma * ceiling;
    for (int j = 0; j < traces.size(); ++j) {
      if (j == self_index) continue;
      obs.readings[j] = std::clamp(obs.readings[j] + sd * standard_normal(rng), 0.0, ceiling);
    }
  }
  if (visible) {
    require(visible->size() == obs.readings.size(), "social_observation: mask size mismatch");
    for (int j = 0; j < traces.size(); ++j) {
      if (j != self_index && !(*visible)[j]) obs.readings[j] = 0.0;
    }
  }
  return obs;
}

}  // namespace cleanup::reputation
