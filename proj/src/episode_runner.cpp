#include <algorithm>
#include <numeric>

#include "cleanup/orchestrator.hpp"

namespace cleanup::orch {

double EpisodeResult::collective_return() const {
  return std::accumulate(return_ext.begin(), return_ext.end(), 0.0);
}

int EpisodeResult::contribution_level() const {
  return std::accumulate(clean_steps.begin(), clean_steps.end(), 0);
}

void network_social_input(const reputation::SocialObservation& obs, double ceiling,
                          std::span<float> out) {
  const int n = static_cast<int>(obs.readings.size());
  require(static_cast<int>(out.size()) == n, "network_social_input: size mismatch");
  const double scale = 1.0 / ceiling;
  out[0] = static_cast<float>(obs.readings[obs.self_index] * scale);
  int k = 1;
  for (int j = 0; j < n; ++j) {
    if (j != obs.self_index) out[k++] = static_cast<float>(obs.readings[j] * scale);
  }
}

EpisodeRunner::EpisodeRunner(const ExperimentConfig& config)
    : config_(config), net_(config.network()), evaluator_(net_) {}

namespace {

constexpr int kMaxGroup = 16;

// Whether seat j is inside seat i's view window.
bool in_view(const env::EnvState& s, int i, int j, int window) {
  const int half = window / 2;
  const env::Pos a = s.avatars[i].pos, b = s.avatars[j].pos;
  return std::abs(a.x - b.x) <= half && std::abs(a.y - b.y) <= half;
}

}  // namespace

EpisodeResult EpisodeRunner::run(std::span<const Seat> seats, const EpisodeOptions& options) {
  const int n = config_.group_size;
  require(static_cast<int>(seats.size()) == n, "EpisodeRunner::run: wrong number of seats");
  require(n <= kMaxGroup, "EpisodeRunner::run: group too large");
  for (const Seat& s : seats) {
    require(s.params != nullptr && s.params->config() == net_,
            "EpisodeRunner::run: seat parameters do not match the network shape");
  }
  env::EnvParams params = config_.env;
  params.start_polluted = options.start_polluted;
  const int horizon = params.episode_length;
  const int vis = net_.visual_size();
  const int soc = net_.social;
  const double lambda = seats[0].motivation.lambda;
  const double ceiling = reputation::trace_ceiling(lambda);
  const Condition cond = config_.condition;
  const ReputationConfig& rep = config_.reputation;

  env::EnvState state = env::reset(params, options.seed);
  Rng action_rng(derive_seed(options.seed, 0xac71));
  Rng social_rng(derive_seed(options.seed, 0x50c1));

  EpisodeResult result;
  result.trajectories.resize(n);
  result.return_ext.assign(n, 0.0);
  result.return_int.assign(n, 0.0);
  result.clean_steps.assign(n, 0);
  if (options.record_log) {
    result.log = env::EpisodeLog::begin(state, params, options.seed, cond);
    result.log->header.group_id = options.group_id;
    result.log->header.episode_index = options.episode_index;
    result.log->header.source = options.source;
    for (const Seat& s : seats) result.log->header.agent_ids.push_back(s.agent_id);
  }

  reputation::ContributionTraces traces(n, lambda);
  std::vector<nets::RecurrentState<float>> rstate(n, nets::RecurrentState<float>(net_.lstm));
  std::vector<float> visual(static_cast<std::size_t>(n) * vis);
  std::vector<float> social(static_cast<std::size_t>(n) * soc);
  std::vector<reputation::SocialObservation> obs(n);

  auto observe = [&] {
    for (int i = 0; i < n; ++i) {
      const env::ViewGrid view =
          env::render_observation(state, params, i, cond, config_.window, config_.rotate_view);
      env::encode_one_hot(view, net_.channels,
                          std::span<float>(visual.data() + static_cast<std::size_t>(i) * vis, vis));
      if (rep.visibility_mask) {
        bool mask[kMaxGroup];
        for (int j = 0; j < n; ++j) mask[j] = j == i || in_view(state, i, j, config_.window);
        obs[i] = reputation::social_observation(traces, i, cond, rep.noise_sigma, social_rng,
                                                std::span<const bool>(mask, n));
      } else {
        obs[i] = reputation::social_observation(traces, i, cond, rep.noise_sigma, social_rng);
      }
      network_social_input(obs[i], ceiling,
                           std::span<float>(social.data() + static_cast<std::size_t>(i) * soc, soc));
    }
  };

  auto open_segment = [&](int i) {
    learner::Trajectory& tr = result.trajectories[i].emplace_back();
    tr.agent_id = seats[i].agent_id;
    tr.initial_state = rstate[i];
    const std::size_t cap = static_cast<std::size_t>(config_.unroll) + 1;
    tr.visual.reserve(cap * vis);
    tr.social.reserve(cap * soc);
    tr.actions.reserve(cap);
    tr.behavior_log_prob.reserve(cap);
    tr.reward_ext.reserve(cap);
    tr.reward_int.reserve(cap);
  };
  auto push_obs = [&](learner::Trajectory& tr, int i) {
    const float* v = visual.data() + static_cast<std::size_t>(i) * vis;
    const float* s = social.data() + static_cast<std::size_t>(i) * soc;
    tr.visual.insert(tr.visual.end(), v, v + vis);
    tr.social.insert(tr.social.end(), s, s + soc);
  };

  observe();
  if (options.record_trajectories) {
    for (int i = 0; i < n; ++i) open_segment(i);
  }
  std::vector<env::Action> joint(n);
  std::vector<int> q(n);
  std::vector<double> r_int(n);
  float logits[env::kNumActions];
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      float value = 0.0f;
      evaluator_.step(*seats[i].params,
                      std::span<const float>(visual.data() + static_cast<std::size_t>(i) * vis, vis),
                      std::span<const float>(social.data() + static_cast<std::size_t>(i) * soc, soc),
                      rstate[i], std::span<float>(logits, env::kNumActions), value);
      const nets::ActionSample a =
          nets::sample_action<float>(std::span<const float>(logits, env::kNumActions), action_rng);
      joint[i] = static_cast<env::Action>(a.action);
      if (options.record_trajectories) {
        learner::Trajectory& tr = result.trajectories[i].back();
        push_obs(tr, i);
        tr.actions.push_back(a.action);
        tr.behavior_log_prob.push_back(static_cast<float>(a.log_prob));
      }
    }
    const env::StepEvents ev = env::step(state, joint, params);
    for (int i = 0; i < n; ++i) q[i] = ev.contributed(i) ? 1 : 0;
    traces.update(q);
    observe();
    for (int i = 0; i < n; ++i) {
      if (!rep.enabled) {
        r_int[i] = 0.0;
        continue;
      }
      double c_bar;
      if (rep.mean == ReputationMean::kTrue) {
        if (rep.include_self) {
          c_bar = traces.mean();
        } else {
          double sum = 0.0;
          for (int j = 0; j < n; ++j) sum += j == i ? 0.0 : traces[j];
          c_bar = n > 1 ? sum / (n - 1) : 0.0;
        }
      } else {
        c_bar = obs[i].observed_mean(rep.include_self);
      }
      r_int[i] = reputation::intrinsic_reward(traces[i], c_bar, seats[i].motivation);
    }
    for (int i = 0; i < n; ++i) {
      result.return_ext[i] += ev.reward[i];
      result.return_int[i] += r_int[i];
      result.clean_steps[i] += q[i];
    }
    if (result.log) result.log->append(state, joint, ev, r_int);

    if (options.record_trajectories) {
      const bool last = t + 1 == horizon;
      for (int i = 0; i < n; ++i) {
        learner::Trajectory& tr = result.trajectories[i].back();
        tr.reward_ext.push_back(static_cast<float>(ev.reward[i]));
        tr.reward_int.push_back(static_cast<float>(r_int[i]));
        ++tr.steps;
        if (last) {
          tr.terminal = true;
        } else if (tr.steps == config_.unroll) {
          tr.bootstrap = true;
          push_obs(tr, i);
          open_segment(i);
        }
      }
    }
  }
  return result;
}

}  // namespace cleanup::orch
