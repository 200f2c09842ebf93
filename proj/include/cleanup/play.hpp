#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleanup/episode_log.hpp"
#include "cleanup/json_io.hpp"
#include "cleanup/orchestrator.hpp"
#include "cleanup/reputation.hpp"
#include "cleanup/scripted.hpp"

namespace cleanup::play {

using json = nlohmann::json;

using Millis = std::int64_t;

inline constexpr Millis kInputWindowMs = 100;
inline constexpr int kHumanViewSize = 27;

// ---- time ---------------------------------------------------------------------

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  Millis now() const override;
};

// Time that only moves when told to; for tests and scripted drivers.
class ManualClock final : public Clock {
 public:
  Millis now() const override { return t_.load(); }
  void set(Millis t) { t_.store(t); }
  void advance(Millis d) { t_.fetch_add(d); }

 private:
  std::atomic<Millis> t_{0};
};

// ---- input --------------------------------------------------------------------

enum class InputResult : std::uint8_t { kAccepted, kDroppedRate, kDroppedPending };

inline bool accepted(InputResult r) { return r == InputResult::kAccepted; }
std::string_view to_string(InputResult r);

// Holds at most one action. An input is accepted only when nothing is
// pending and at least kInputWindowMs have passed since the last accepted
// input; everything else is dropped.
class InputBuffer {
 public:
  InputResult submit(env::Action action, Millis now);
  // The pending action, or no-op when there is none; clears the slot.
  env::Action take();
  bool pending() const { return pending_.has_value(); }
  void reset();

 private:
  std::optional<env::Action> pending_;
  std::optional<Millis> last_accept_;
};

// ---- bots ---------------------------------------------------------------------

struct BotContext {
  const env::EnvState& state;
  const env::EnvParams& params;
  const reputation::ContributionTraces& traces;
  Condition condition;
  int seat;
  Rng& rng;
};

// Fills a seat no human took.
class Bot {
 public:
  virtual ~Bot() = default;
  virtual void begin_episode(const env::EnvParams& params, Condition condition) = 0;
  virtual env::Action act(const BotContext& context) = 0;
  virtual std::string describe() const = 0;
  virtual int agent_id() const { return -1; }
};

class ScriptedBot final : public Bot {
 public:
  explicit ScriptedBot(scripted::Role role) : role_(role) {}
  void begin_episode(const env::EnvParams& params, Condition condition) override;
  env::Action act(const BotContext& context) override;
  std::string describe() const override;

 private:
  scripted::Role role_;
  std::optional<scripted::ScriptedPolicy> policy_;
};

// A frozen trained agent; observes exactly what it observed in evaluation.
class AgentBot final : public Bot {
 public:
  AgentBot(std::shared_ptr<const orch::PopulationCheckpoint> checkpoint, int agent);
  void begin_episode(const env::EnvParams& params, Condition condition) override;
  env::Action act(const BotContext& context) override;
  std::string describe() const override;
  int agent_id() const override { return agent_; }

 private:
  std::shared_ptr<const orch::PopulationCheckpoint> checkpoint_;
  int agent_;
  nets::NetConfig net_;
  nets::PolicyEvaluator<float> evaluator_;
  nets::RecurrentState<float> state_;
  std::vector<float> visual_, social_;
};

// Creates the bot for a seat; may return nullptr to leave the seat idle.
using BotFactory = std::function<std::unique_ptr<Bot>(int seat)>;

BotFactory scripted_bots(scripted::Role role = scripted::Role::kCooperator);
// Seats are filled with distinct agents drawn from the checkpoint.
BotFactory checkpoint_bots(std::shared_ptr<const orch::PopulationCheckpoint> checkpoint,
                           std::uint64_t seed);

// Plan-file bot description: {"kind": "none"} leaves open seats idle,
// {"kind": "scripted", "role": "cooperator"|"defector"|"random"} and
// {"kind": "checkpoint", "path": dir, "seed": n}. Relative paths resolve
// against `base_dir`.
BotFactory bots_from_json(const json& desc, const std::string& base_dir = {});

// ---- sessions -----------------------------------------------------------------

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionConfig {
  env::EnvParams params = env::EnvParams::human_defaults();
  std::vector<Condition> plan{Condition::kIdentifiable};  // one entry per episode
  int window = kHumanViewSize;
  bool rotate_view = false;
  int min_humans = 1;      // auto-start threshold
  bool auto_start = true;  // start as soon as min_humans have joined
  bool strict = false;     // strict replication: every seat must be human
  std::uint64_t seed = 1;
  std::string log_dir;     // episode logs and manifest; empty keeps them in memory
  double lambda = reputation::kDefaultLambda;

  void validate() const;
};

// Session plan file: episode conditions plus session settings.
SessionConfig load_session_config(const std::string& path);
json to_json(const SessionConfig& config);
SessionConfig session_config_from_json(const json& j);

enum class SessionState : std::uint8_t { kLobby, kRunning, kFinished };
std::string_view to_string(SessionState s);

enum class SeatKind : std::uint8_t { kOpen, kHuman, kBot, kAbsent };
std::string_view to_string(SeatKind k);

struct SeatInfo {
  SeatKind kind = SeatKind::kOpen;
  std::string name;
  int agent_id = -1;
};

// What one participant sees after a tick.
struct ClientView {
  int seat = 0;
  int episode = 0;
  int tick = 0;  // steps taken in the current episode
  int steps_left = 0;
  Condition condition = Condition::kIdentifiable;
  env::ViewGrid grid;                // sprite classes, see env::Sprite
  std::vector<int> avatar_sprites;   // sprite classes that can denote avatars
  double score = 0.0;                // this episode
  double cumulative = 0.0;           // over the session
  int tickets_left = -1;             // -1: unlimited
  std::vector<double> bars;          // contribution traces: self only when anonymous
  std::vector<int> bar_seats;        // seat of each bar
  double bar_max = 0.0;              // trace ceiling
};

struct EpisodeSummary {
  int episode = 0;
  Condition condition = Condition::kIdentifiable;
  std::vector<double> scores;
  std::string log_file;  // empty when not written
};

struct TickResult {
  std::vector<ClientView> views;             // one per human seat
  std::optional<EpisodeSummary> episode_end; // set on the tick that ends an episode
  bool session_finished = false;
};

// One sequential owner of a game; every public member is safe to call from
// connection handlers concurrently with the ticking thread.
class Session {
 public:
  Session(std::string id, SessionConfig config, BotFactory bots = {});

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  SessionState state() const;
  int joined() const;
  std::vector<SeatInfo> seats() const;

  // Takes the lowest open seat; throws SessionError when none is open or
  // the session is past its lobby.
  int join(const std::string& name);
  // A departed human's seat plays no-ops from now on.
  void leave(int seat);
  // Leaves the lobby: open seats get bots (or stay idle in strict mode, which
  // requires a full table). Returns the initial views.
  TickResult start();
  bool ready_to_start() const;

  InputResult submit(int seat, env::Action action, Millis now);

  // Applies buffered inputs and bot actions, advances the game one step and
  // renders the views. Ends the episode at its horizon and moves to the next
  // planned one; throws SessionError unless running.
  TickResult tick();

  // Logs of finished episodes in plan order.
  std::vector<env::EpisodeLog> logs() const;
  json manifest() const;

 private:
  void begin_episode();
  std::vector<ClientView> render_views() const;
  ClientView render_view(int seat) const;
  json manifest_locked() const;
  void write_manifest() const;

  mutable std::mutex mu_;
  std::string id_;
  SessionConfig config_;
  BotFactory bot_factory_;
  SessionState state_ = SessionState::kLobby;
  std::vector<SeatInfo> seats_;
  std::vector<std::unique_ptr<Bot>> bots_;
  std::vector<InputBuffer> inputs_;
  int episode_ = 0;
  env::EnvState env_;
  env::EnvParams params_;
  env::EpisodeLog log_;
  reputation::ContributionTraces traces_;
  Rng bot_rng_;
  std::vector<double> cumulative_;
  std::vector<env::EpisodeLog> finished_;
  std::vector<EpisodeSummary> summaries_;
  std::string created_at_, started_at_, finished_at_;
  std::vector<std::pair<std::string, std::string>> episode_times_;  // start, end
};

}  // namespace cleanup::play
