#include "cleanup/learner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

namespace cleanup::learner {

VTraceOutputs vtrace(std::span<const double> behavior_log_probs,
                     std::span<const double> target_log_probs,
                     std::span<const double> rewards, std::span<const double> discounts,
                     std::span<const double> values, double bootstrap_value,
                     const VTraceConfig& config) {
  const std::size_t n = rewards.size();
  require(behavior_log_probs.size() == n && target_log_probs.size() == n &&
              discounts.size() == n && values.size() == n,
          "vtrace: misaligned inputs");
  require(config.gamma > 0.0 && config.gamma < 1.0, "vtrace: gamma must lie in (0, 1)");
  VTraceOutputs out;
  out.vs.resize(n);
  out.pg_advantages.resize(n);
  out.rho.resize(n);
  out.c.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double ratio = std::exp(target_log_probs[t] - behavior_log_probs[t]);
    out.rho[t] = std::min(config.rho_bar, ratio);
    out.c[t] = std::min(config.c_bar, ratio);
  }
  // Backward recursion on v_s - V(x_s).
  double next_value = bootstrap_value;
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = out.rho[i] * (rewards[i] + discounts[i] * next_value - values[i]);
    acc = delta + discounts[i] * out.c[i] * acc;
    out.vs[i] = values[i] + acc;
    next_value = values[i];
  }
  for (std::size_t t = 0; t < n; ++t) {
    const double vs_next = t + 1 < n ? out.vs[t + 1] : bootstrap_value;
    out.pg_advantages[t] = out.rho[t] * (rewards[t] + discounts[t] * vs_next - values[t]);
  }
  return out;
}

void Trajectory::validate(const nets::NetConfig& config) const {
  const std::size_t rows = static_cast<std::size_t>(steps) + (bootstrap ? 1 : 0);
  require(steps > 0, "Trajectory: empty");
  require(visual.size() == rows * config.visual_size(), "Trajectory: visual size mismatch");
  require(social.size() == rows * config.social, "Trajectory: social size mismatch");
  const auto n = static_cast<std::size_t>(steps);
  require(actions.size() == n && behavior_log_prob.size() == n && reward_ext.size() == n &&
              reward_int.size() == n,
          "Trajectory: per-step arrays misaligned");
  require(terminal || bootstrap, "Trajectory: non-terminal segment needs a bootstrap row");
  require(static_cast<int>(initial_state.h.size()) == config.lstm,
          "Trajectory: recurrent state size mismatch");
  for (int a : actions) require(a >= 0 && a < config.actions, "Trajectory: action out of range");
}

VTraceOutputs vtrace_targets(const Trajectory& traj, std::span<const double> target_log_probs,
                             std::span<const double> values, double bootstrap_value,
                             const VTraceConfig& config) {
  const int n = traj.steps;
  std::vector<double> behavior(n), rewards(n), discounts(n, config.gamma);
  for (int t = 0; t < n; ++t) {
    behavior[t] = traj.behavior_log_prob[t];
    rewards[t] = traj.reward(t);
  }
  if (traj.terminal) {
    discounts[n - 1] = 0.0;
    bootstrap_value = 0.0;
  }
  return vtrace(behavior, target_log_probs, rewards, discounts, values, bootstrap_value, config);
}

template <typename T>
LossTerms a2c_loss(int steps, int actions, std::span<const T> logits, std::span<const T> values,
                   std::span<const int> taken, const VTraceOutputs& vt, const LossConfig& config,
                   std::span<T> dlogits, std::span<T> dvalues) {
  const auto rows = static_cast<std::size_t>(steps);
  require(logits.size() == rows * actions && values.size() == rows && taken.size() == rows &&
              dlogits.size() == rows * actions && dvalues.size() == rows &&
              vt.vs.size() == rows && vt.pg_advantages.size() == rows,
          "a2c_loss: misaligned inputs");
  LossTerms terms;
  std::vector<double> z(actions), lp(actions);
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < actions; ++k) z[k] = logits[t * actions + k];
    nets::log_softmax<double>(z, lp);
    double h = 0.0;
    for (int k = 0; k < actions; ++k) h -= std::exp(lp[k]) * lp[k];
    const double adv = vt.pg_advantages[t];
    const int a = taken[t];
    terms.policy -= lp[a] * adv;
    terms.entropy -= config.entropy_cost * h;
    terms.mean_entropy += h;
    for (int k = 0; k < actions; ++k) {
      const double p = std::exp(lp[k]);
      const double pg = -adv * ((k == a ? 1.0 : 0.0) - p);
      const double ent = config.entropy_cost * p * (lp[k] + h);
      dlogits[t * actions + k] = static_cast<T>(pg + ent);
    }
    const double err = vt.vs[t] - static_cast<double>(values[t]);
    terms.baseline += config.baseline_cost * err * err;
    dvalues[t] = static_cast<T>(-2.0 * config.baseline_cost * err);
  }
  if (steps > 0) terms.mean_entropy /= steps;
  return terms;
}

template LossTerms a2c_loss(int, int, std::span<const float>, std::span<const float>,
                            std::span<const int>, const VTraceOutputs&, const LossConfig&,
                            std::span<float>, std::span<float>);
template LossTerms a2c_loss(int, int, std::span<const double>, std::span<const double>,
                            std::span<const int>, const VTraceOutputs&, const LossConfig&,
                            std::span<double>, std::span<double>);

void write_update_record(std::ostream& out, const UpdateRecord& r) {
  nlohmann::json j = {{"agent_id", r.agent_id},
                      {"update_index", r.update_index},
                      {"loss_total", r.loss.total()},
                      {"loss_policy", r.loss.policy},
                      {"loss_baseline", r.loss.baseline},
                      {"loss_entropy", r.loss.entropy},
                      {"entropy", r.loss.mean_entropy},
                      {"mean_r_e", r.mean_reward_ext},
                      {"mean_r_i", r.mean_reward_int},
                      {"mean_rho", r.mean_rho},
                      {"steps_consumed", r.steps_consumed}};
  out << j.dump() << '\n';
}

Learner::Learner(int agent_id, nets::NetworkParams<float> params,
                 const nets::RmsPropConfig& rmsprop, const VTraceConfig& vtrace,
                 const LossConfig& loss)
    : agent_id_(agent_id),
      params_(std::move(params)),
      grads_(params_.config()),
      opt_(rmsprop, params_.size()),
      vtrace_(vtrace),
      loss_(loss),
      pass_(params_.config()) {}

UpdateRecord Learner::update(std::span<const Trajectory> batch) {
  const nets::NetConfig& cfg = params_.config();
  require(!batch.empty(), "Learner::update: empty batch");
  const int b_count = static_cast<int>(batch.size());
  int max_rows = 0;
  for (const Trajectory& tr : batch) {
    require(tr.agent_id == agent_id_, "Learner::update: trajectory of another agent");
    tr.validate(cfg);
    max_rows = std::max(max_rows, tr.steps + (tr.bootstrap ? 1 : 0));
  }

  seq_.resize(cfg, b_count, max_rows);
  const auto vis = static_cast<std::size_t>(cfg.visual_size());
  const auto soc = static_cast<std::size_t>(cfg.social);
  for (int b = 0; b < b_count; ++b) {
    const Trajectory& tr = batch[b];
    const int rows = tr.steps + (tr.bootstrap ? 1 : 0);
    for (int s = 0; s < rows; ++s) {
      const std::size_t n = static_cast<std::size_t>(s) * b_count + b;
      std::copy_n(tr.visual.data() + s * vis, vis, seq_.visual.data() + n * vis);
      std::copy_n(tr.social.data() + s * soc, soc, seq_.social.data() + n * soc);
    }
    std::copy(tr.initial_state.h.begin(), tr.initial_state.h.end(),
              seq_.initial_h.begin() + static_cast<std::ptrdiff_t>(b) * cfg.lstm);
    std::copy(tr.initial_state.c.begin(), tr.initial_state.c.end(),
              seq_.initial_c.begin() + static_cast<std::ptrdiff_t>(b) * cfg.lstm);
  }
  pass_.forward(params_, seq_);
  const auto logits = pass_.logits();
  const auto values = pass_.values();

  const int a_count = cfg.actions;
  dlogits_.assign(static_cast<std::size_t>(seq_.rows()) * a_count, 0.0f);
  dvalues_.assign(seq_.rows(), 0.0f);

  UpdateRecord rec;
  rec.agent_id = agent_id_;
  std::size_t total_steps = 0;
  AlignedVector<float> tl, tv, dl, dv;
  std::vector<double> target_lp, vals, lp(a_count);
  std::vector<double> z(a_count);
  for (int b = 0; b < b_count; ++b) {
    const Trajectory& tr = batch[b];
    const int n = tr.steps;
    tl.resize(static_cast<std::size_t>(n) * a_count);
    tv.resize(n);
    target_lp.resize(n);
    vals.resize(n);
    for (int s = 0; s < n; ++s) {
      const std::size_t row = static_cast<std::size_t>(s) * b_count + b;
      std::copy_n(logits.data() + row * a_count, a_count, tl.data() + s * a_count);
      tv[s] = values[row];
      vals[s] = values[row];
      for (int k = 0; k < a_count; ++k) z[k] = tl[s * a_count + k];
      nets::log_softmax<double>(z, lp);
      target_lp[s] = lp[tr.actions[s]];
    }
    double bootstrap = 0.0;
    if (!tr.terminal) bootstrap = values[static_cast<std::size_t>(n) * b_count + b];

    VTraceOutputs vt;
    if (loss_.reward_scale == 1.0) {
      vt = vtrace_targets(tr, target_lp, vals, bootstrap, vtrace_);
    } else {
      Trajectory scaled = tr;
      for (int s = 0; s < n; ++s) {
        scaled.reward_ext[s] *= static_cast<float>(loss_.reward_scale);
        scaled.reward_int[s] *= static_cast<float>(loss_.reward_scale);
      }
      vt = vtrace_targets(scaled, target_lp, vals, bootstrap, vtrace_);
    }

    dl.resize(tl.size());
    dv.resize(n);
    const LossTerms t = a2c_loss<float>(n, a_count, tl, tv, tr.actions, vt, loss_, dl, dv);
    for (int s = 0; s < n; ++s) {
      const std::size_t row = static_cast<std::size_t>(s) * b_count + b;
      std::copy_n(dl.data() + s * a_count, a_count, dlogits_.data() + row * a_count);
      dvalues_[row] = dv[s];
      rec.mean_reward_ext += tr.reward_ext[s];
      rec.mean_reward_int += tr.reward_int[s];
      rec.mean_rho += vt.rho[s];
    }
    rec.loss.policy += t.policy;
    rec.loss.baseline += t.baseline;
    rec.loss.entropy += t.entropy;
    rec.loss.mean_entropy += t.mean_entropy * n;
    total_steps += n;
  }
  grads_.set_zero();
  pass_.backward(params_, dlogits_, dvalues_, grads_);
  nets::rmsprop_update(params_, grads_, opt_);

  ++updates_;
  steps_consumed_ += total_steps;
  const double denom = static_cast<double>(total_steps);
  rec.mean_reward_ext /= denom;
  rec.mean_reward_int /= denom;
  rec.mean_rho /= denom;
  rec.loss.mean_entropy /= denom;
  rec.update_index = updates_;
  rec.steps_consumed = steps_consumed_;
  return rec;
}

}  // namespace cleanup::learner
