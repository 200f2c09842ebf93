#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cleanup/play.hpp"

namespace cleanup::play {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagEpisode = 0x5e55;
constexpr std::uint64_t kTagBots = 0xb075;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
      << ms << 'Z';
  return out.str();
}

}  // namespace

Millis SteadyClock::now() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(InputResult r) {
  switch (r) {
    case InputResult::kAccepted: return "accepted";
    case InputResult::kDroppedRate: return "rate";
    case InputResult::kDroppedPending: return "pending";
  }
  return "?";
}

InputResult InputBuffer::submit(env::Action action, Millis now) {
  if (last_accept_ && now - *last_accept_ < kInputWindowMs) return InputResult::kDroppedRate;
  if (pending_) return InputResult::kDroppedPending;
  pending_ = action;
  last_accept_ = now;
  return InputResult::kAccepted;
}

env::Action InputBuffer::take() {
  const env::Action a = pending_.value_or(env::Action::kNoop);
  pending_.reset();
  return a;
}

void InputBuffer::reset() {
  pending_.reset();
  last_accept_.reset();
}

// ---- configuration ------------------------------------------------------------

void SessionConfig::validate() const {
  if (plan.empty()) throw ConfigError("session plan has no episodes");
  if (window < 1 || window % 2 == 0) throw ConfigError("session window must be odd and positive");
  if (params.num_players < 1) throw ConfigError("session needs at least one seat");
  if (min_humans < 0 || min_humans > params.num_players) {
    throw ConfigError("min_humans must lie in [0, num_players]");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (params.episode_length < 1) throw ConfigError("episode_length must be positive");
}

json to_json(const SessionConfig& c) {
  json plan = json::array();
  for (Condition k : c.plan) plan.push_back(to_string(k));
  return {{"env", c.params},         {"plan", plan},       {"window", c.window},
          {"rotate_view", c.rotate_view}, {"min_humans", c.min_humans},
          {"auto_start", c.auto_start},   {"strict", c.strict}, {"seed", c.seed},
          {"log_dir", c.log_dir},         {"lambda", c.lambda}};
}

SessionConfig session_config_from_json(const json& j) {
  SessionConfig c;
  json e = j.value("env", json::object());
  if (!e.contains("profile")) e["profile"] = "human";
  c.params = e.get<env::EnvParams>();
  if (j.contains("plan")) {
    c.plan.clear();
    for (const auto& k : j.at("plan")) c.plan.push_back(condition_from_string(k.get<std::string>()));
  }
  c.window = j.value("window", c.window);
  c.rotate_view = j.value("rotate_view", c.rotate_view);
  c.min_humans = j.value("min_humans", c.min_humans);
  c.auto_start = j.value("auto_start", c.auto_start);
  c.strict = j.value("strict", c.strict);
  c.seed = j.value("seed", c.seed);
  c.log_dir = j.value("log_dir", c.log_dir);
  c.lambda = j.value("lambda", c.lambda);
  c.validate();
  return c;
}

SessionConfig load_session_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open session config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("session config " + path + ": " + e.what());
  }
  return session_config_from_json(j.contains("session") ? j.at("session") : j);
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kLobby: return "lobby";
    case SessionState::kRunning: return "running";
    case SessionState::kFinished: return "finished";
  }
  return "?";
}

std::string_view to_string(SeatKind k) {
  switch (k) {
    case SeatKind::kOpen: return "open";
    case SeatKind::kHuman: return "human";
    case SeatKind::kBot: return "bot";
    case SeatKind::kAbsent: return "absent";
  }
  return "?";
}

// ---- session ------------------------------------------------------------------

Session::Session(std::string id, SessionConfig config, BotFactory bots)
    : id_(std::move(id)), config_(std::move(config)), bot_factory_(std::move(bots)) {
  config_.validate();
  const int n = config_.params.num_players;
  seats_.resize(n);
  bots_.resize(n);
  inputs_.resize(n);
  cumulative_.assign(n, 0.0);
  traces_ = reputation::ContributionTraces(n, config_.lambda);
  bot_rng_ = Rng(derive_seed(config_.seed, kTagBots));
  created_at_ = utc_now();
}

SessionState Session::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

int Session::joined() const {
  std::lock_guard lock(mu_);
  int k = 0;
  for (const auto& s : seats_) k += s.kind == SeatKind::kHuman;
  return k;
}

std::vector<SeatInfo> Session::seats() const {
  std::lock_guard lock(mu_);
  return seats_;
}

int Session::join(const std::string& name) {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::kLobby) throw SessionError("session " + id_ + " is not accepting players");
  for (int i = 0; i < static_cast<int>(seats_.size()); ++i) {
    if (seats_[i].kind != SeatKind::kOpen) continue;
    seats_[i].kind = SeatKind::kHuman;
    seats_[i].name = name;
    return i;
  }
  throw SessionError("session " + id_ + " is full");
}

void Session::leave(int seat) {
  std::lock_guard lock(mu_);
  if (seat < 0 || seat >= static_cast<int>(seats_.size())) return;
  if (seats_[seat].kind != SeatKind::kHuman) return;
  if (state_ == SessionState::kLobby) {
    seats_[seat] = SeatInfo{};
  } else {
    seats_[seat].kind = SeatKind::kAbsent;
    inputs_[seat].reset();
  }
}

bool Session::ready_to_start() const {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::kLobby || !config_.auto_start) return false;
  int humans = 0;
  for (const auto& s : seats_) humans += s.kind == SeatKind::kHuman;
  if (config_.strict) return humans == static_cast<int>(seats_.size());
  return humans >= config_.min_humans && humans > 0;
}

TickResult Session::start() {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::kLobby) throw SessionError("session " + id_ + " already started");
  const int n = static_cast<int>(seats_.size());
  for (int i = 0; i < n; ++i) {
    if (seats_[i].kind != SeatKind::kOpen) continue;
    if (config_.strict) throw SessionError("strict session " + id_ + " needs every seat filled");
    if (bot_factory_) bots_[i] = bot_factory_(i);
    if (bots_[i]) {
      seats_[i].kind = SeatKind::kBot;
      seats_[i].name = bots_[i]->describe();
      seats_[i].agent_id = bots_[i]->agent_id();
    } else {
      seats_[i].kind = SeatKind::kAbsent;
    }
  }
  state_ = SessionState::kRunning;
  started_at_ = utc_now();
  begin_episode();
  TickResult r;
  r.views = render_views();
  return r;
}

void Session::begin_episode() {
  params_ = config_.params;
  const Condition cond = config_.plan[episode_];
  const std::uint64_t seed = derive_seed(config_.seed ^ fnv1a(id_), kTagEpisode + episode_);
  env_ = env::reset(params_, seed);
  log_ = env::EpisodeLog::begin(env_, params_, seed, cond);
  log_.header.source = "session";
  log_.header.group_id = 0;
  log_.header.episode_index = episode_;
  log_.header.task_order = episode_;
  for (const auto& s : seats_) log_.header.agent_ids.push_back(s.agent_id);
  traces_.reset();
  for (auto& in : inputs_) in.reset();
  for (auto& b : bots_) {
    if (b) b->begin_episode(params_, cond);
  }
  episode_times_.emplace_back(utc_now(), std::string());
}

InputResult Session::submit(int seat, env::Action action, Millis now) {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::kRunning) throw SessionError("session " + id_ + " is not running");
  if (seat < 0 || seat >= static_cast<int>(seats_.size()) || seats_[seat].kind != SeatKind::kHuman) {
    throw SessionError("seat " + std::to_string(seat) + " is not held by a player");
  }
  return inputs_[seat].submit(action, now);
}

TickResult Session::tick() {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::kRunning) throw SessionError("session " + id_ + " is not running");
  const int n = static_cast<int>(seats_.size());
  const Condition cond = config_.plan[episode_];
  std::vector<env::Action> joint(n, env::Action::kNoop);
  for (int i = 0; i < n; ++i) {
    switch (seats_[i].kind) {
      case SeatKind::kHuman:
        joint[i] = inputs_[i].take();
        break;
      case SeatKind::kBot:
        joint[i] = bots_[i]->act(BotContext{env_, params_, traces_, cond, i, bot_rng_});
        break;
      case SeatKind::kOpen:
      case SeatKind::kAbsent:
        break;
    }
  }
  const env::StepEvents ev = env::step(env_, joint, params_);
  std::vector<int> q(n);
  for (int i = 0; i < n; ++i) q[i] = ev.contributed(i) ? 1 : 0;
  traces_.update(q);
  log_.append(env_, joint, ev);

  TickResult r;
  r.views = render_views();
  if (!log_.complete()) return r;

  EpisodeSummary summary;
  summary.episode = episode_;
  summary.condition = cond;
  summary.scores = env_.score;
  for (int i = 0; i < n; ++i) cumulative_[i] += env_.score[i];
  if (!config_.log_dir.empty()) {
    fs::create_directories(config_.log_dir);
    std::ostringstream name;
    name << id_ << "_episode_" << std::setw(2) << std::setfill('0') << episode_ << ".jsonl";
    summary.log_file = (fs::path(config_.log_dir) / name.str()).string();
    log_.save(summary.log_file);
  }
  episode_times_.back().second = utc_now();
  finished_.push_back(std::move(log_));
  summaries_.push_back(summary);
  r.episode_end = summary;
  ++episode_;
  if (episode_ < static_cast<int>(config_.plan.size())) {
    begin_episode();
  } else {
    state_ = SessionState::kFinished;
    finished_at_ = utc_now();
    r.session_finished = true;
    if (!config_.log_dir.empty()) write_manifest();
  }
  return r;
}

std::vector<ClientView> Session::render_views() const {
  std::vector<ClientView> out;
  for (int i = 0; i < static_cast<int>(seats_.size()); ++i) {
    if (seats_[i].kind == SeatKind::kHuman) out.push_back(render_view(i));
  }
  return out;
}

ClientView Session::render_view(int seat) const {
  const int n = static_cast<int>(seats_.size());
  const Condition cond = config_.plan[episode_];
  ClientView v;
  v.seat = seat;
  v.episode = episode_;
  v.tick = env_.step;
  v.steps_left = params_.episode_length - env_.step;
  v.condition = cond;
  v.grid = env::render_observation(env_, params_, seat, cond, config_.window, config_.rotate_view);
  if (cond == Condition::kIdentifiable) {
    // Every player keeps one colour for everyone, self included.
    for (auto& c : v.grid.cells) {
      if (c == env::kSpriteSelf) c = static_cast<std::uint8_t>(env::kSpritePlayerBase + seat);
    }
    for (int j = 0; j < n; ++j) v.avatar_sprites.push_back(env::kSpritePlayerBase + j);
    for (int j = 0; j < n; ++j) {
      v.bars.push_back(traces_[j]);
      v.bar_seats.push_back(j);
    }
  } else {
    v.avatar_sprites = {env::kSpriteSelf, env::kSpriteOther};
    v.bars.push_back(traces_[seat]);
    v.bar_seats.push_back(seat);
  }
  v.score = env_.score[seat];
  v.cumulative = cumulative_[seat] + env_.score[seat];
  v.tickets_left = params_.ticket_budget < 0
                       ? -1
                       : std::max(0, params_.ticket_budget - env_.tickets_used[seat]);
  v.bar_max = reputation::trace_ceiling(config_.lambda);
  return v;
}

std::vector<env::EpisodeLog> Session::logs() const {
  std::lock_guard lock(mu_);
  return finished_;
}

json Session::manifest() const {
  std::lock_guard lock(mu_);
  return manifest_locked();
}

json Session::manifest_locked() const {
  json participants = json::array();
  for (int i = 0; i < static_cast<int>(seats_.size()); ++i) {
    participants.push_back({{"seat", i},
                            {"kind", to_string(seats_[i].kind)},
                            {"name", seats_[i].name},
                            {"agent_id", seats_[i].agent_id}});
  }
  json episodes = json::array();
  for (std::size_t e = 0; e < summaries_.size(); ++e) {
    episodes.push_back({{"episode", summaries_[e].episode},
                        {"condition", to_string(summaries_[e].condition)},
                        {"log", fs::path(summaries_[e].log_file).filename().string()},
                        {"started", episode_times_[e].first},
                        {"ended", episode_times_[e].second},
                        {"scores", summaries_[e].scores}});
  }
  return {{"format", "cleanup-session-manifest"},
          {"version", 1},
          {"session", id_},
          {"state", to_string(state_)},
          {"created", created_at_},
          {"started", started_at_},
          {"finished", finished_at_},
          {"config", to_json(config_)},
          {"participants", participants},
          {"episodes", episodes}};
}

void Session::write_manifest() const {
  std::ofstream out(fs::path(config_.log_dir) / (id_ + "_manifest.json"));
  out << manifest_locked().dump(2) << '\n';
}

}  // namespace cleanup::play
