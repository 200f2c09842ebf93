#include <cmath>

#include "doctest.h"

#include "cleanup/learner.hpp"

using namespace cleanup;
using namespace cleanup::learner;

TEST_CASE("a2c head gradients match central differences with frozen targets") {
  Rng rng(5);
  const int steps = 7, actions = 9;
  std::vector<double> logits(steps * actions), values(steps);
  for (double& z : logits) z = uniform(rng, -2, 2);
  for (double& v : values) v = uniform(rng, -1, 1);
  std::vector<int> taken(steps);
  for (int& a : taken) a = static_cast<int>(uniform_index(rng, actions));
  VTraceOutputs vt;
  vt.vs.resize(steps);
  vt.pg_advantages.resize(steps);
  for (int t = 0; t < steps; ++t) {
    vt.vs[t] = uniform(rng, -1, 1);
    vt.pg_advantages[t] = uniform(rng, -1, 1);
  }
  LossConfig cfg;
  cfg.entropy_cost = 0.1;
  std::vector<double> dl(logits.size()), dv(values.size()), sl(logits.size()), sv(values.size());
  a2c_loss<double>(steps, actions, logits, values, taken, vt, cfg, dl, dv);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto lp = logits, lm = logits;
    lp[i] += h;
    lm[i] -= h;
    const double up = a2c_loss<double>(steps, actions, lp, values, taken, vt, cfg, sl, sv).total();
    const double dn = a2c_loss<double>(steps, actions, lm, values, taken, vt, cfg, sl, sv).total();
    CHECK(dl[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto vp = values, vm = values;
    vp[i] += h;
    vm[i] -= h;
    const double up = a2c_loss<double>(steps, actions, logits, vp, taken, vt, cfg, sl, sv).total();
    const double dn = a2c_loss<double>(steps, actions, logits, vm, taken, vt, cfg, sl, sv).total();
    CHECK(dv[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
  }
}
