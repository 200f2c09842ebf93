#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cleanup/nets.hpp"

namespace cleanup::learner {

struct VTraceConfig {
  double gamma = 0.99;
  double rho_bar = 1.0;  // truncation of the importance weight in the TD term
  double c_bar = 1.0;    // truncation of the trace-cutting coefficient
};

struct VTraceOutputs {
  std::vector<double> vs;             // value targets
  std::vector<double> pg_advantages;  // rho_t * (r_t + gamma_t v_{t+1} - V(x_t))
  std::vector<double> rho;            // truncated importance weights
  std::vector<double> c;              // truncated trace coefficients
};

// Per-step inputs of the V-Trace recursion. `discounts[t]` is gamma times
// (1 - terminal_t); `bootstrap_value` is V(x_T) for the state after the last
// step, ignored when that step is terminal.
VTraceOutputs vtrace(std::span<const double> behavior_log_probs,
                     std::span<const double> target_log_probs,
                     std::span<const double> rewards, std::span<const double> discounts,
                     std::span<const double> values, double bootstrap_value,
                     const VTraceConfig& config = {});

// One agent's segment of experience; at most one unroll long, fully inside
// one episode. Observations are stored row-wise; when `bootstrap` is true a
// final extra observation row holds the state after the last step.
struct Trajectory {
  int agent_id = -1;
  int steps = 0;
  std::vector<float> visual;  // (steps + bootstrap) x visual_size
  std::vector<float> social;  // (steps + bootstrap) x social
  std::vector<int> actions;
  std::vector<float> behavior_log_prob;
  std::vector<float> reward_ext;
  std::vector<float> reward_int;
  bool terminal = false;      // last step ends the episode; bootstrap value 0
  bool bootstrap = false;     // an observation row follows the last step
  nets::RecurrentState<float> initial_state;

  float reward(int t) const { return reward_ext[t] + reward_int[t]; }
  void validate(const nets::NetConfig& config) const;
};

VTraceOutputs vtrace_targets(const Trajectory& traj, std::span<const double> target_log_probs,
                             std::span<const double> values, double bootstrap_value,
                             const VTraceConfig& config = {});

struct LossConfig {
  double entropy_cost = 0.00154;
  double baseline_cost = 0.5;
  double reward_scale = 1.0;  // applied to r_e + r_i before the recursion
};

struct LossTerms {
  double policy = 0.0;    // -sum log pi(a_t) * advantage_t
  double baseline = 0.0;  // baseline_cost * sum (v_s - V)^2
  double entropy = 0.0;   // -entropy_cost * sum H(pi_t)
  double total() const { return policy + baseline + entropy; }
  double mean_entropy = 0.0;
};

// Loss over `steps` rows and its gradient w.r.t. logits and values;
// advantages and targets are constants.
template <typename T>
LossTerms a2c_loss(int steps, int actions, std::span<const T> logits, std::span<const T> values,
                   std::span<const int> taken, const VTraceOutputs& vt, const LossConfig& config,
                   std::span<T> dlogits, std::span<T> dvalues);

struct UpdateRecord {
  int agent_id = 0;
  std::uint64_t update_index = 0;
  LossTerms loss;
  double mean_reward_ext = 0.0;
  double mean_reward_int = 0.0;
  double mean_rho = 0.0;
  std::uint64_t steps_consumed = 0;
};

void write_update_record(std::ostream& out, const UpdateRecord& r);

// Exclusive owner of one agent's parameters and optimizer state.
class Learner {
 public:
  Learner(int agent_id, nets::NetworkParams<float> params, const nets::RmsPropConfig& rmsprop,
          const VTraceConfig& vtrace, const LossConfig& loss);

  int agent_id() const { return agent_id_; }
  const nets::NetworkParams<float>& params() const { return params_; }
  nets::NetworkParams<float>& mutable_params() { return params_; }
  nets::OptState<float>& opt() { return opt_; }
  const nets::OptState<float>& opt() const { return opt_; }
  std::uint64_t steps_consumed() const { return steps_consumed_; }
  std::uint64_t updates() const { return updates_; }
  void restore_counters(std::uint64_t steps, std::uint64_t updates) {
    steps_consumed_ = steps;
    updates_ = updates;
  }

  // One RMSProp step on a batch of trajectories.
  UpdateRecord update(std::span<const Trajectory> batch);

 private:
  int agent_id_;
  nets::NetworkParams<float> params_;
  nets::NetworkParams<float> grads_;
  nets::OptState<float> opt_;
  VTraceConfig vtrace_;
  LossConfig loss_;
  nets::UnrollPass<float> pass_;
  nets::SequenceBatch<float> seq_;
  AlignedVector<float> dlogits_, dvalues_;
  std::uint64_t steps_consumed_ = 0;
  std::uint64_t updates_ = 0;
};

}  // namespace cleanup::learner
