#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cleanup/play.hpp"

namespace cleanup::play {

// ---- wire format ----------------------------------------------------------------
//
// Each message is a JSON object preceded by its byte length in ASCII decimal
// and a newline: "42\n{...}". See docs/protocol.md.

namespace protocol {

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxFrame = 1 << 20;

std::string encode(const json& message);

// Incremental frame parser for a byte stream.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  // The next complete message, if any. Throws ParseError on a malformed
  // length prefix, an oversized frame or a payload that is not an object.
  std::optional<json> next();

 private:
  std::string buffer_;
};

json view_message(const ClientView& view);
ClientView parse_view(const json& message);
json episode_end_message(const EpisodeSummary& summary, int seat, double cumulative);

// Accepts an action name ("forward") or index (1).
std::optional<env::Action> parse_action(const json& value);

}  // namespace protocol

// ---- server ---------------------------------------------------------------------

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;               // 0 picks a free port
  bool manual_ticks = false;  // true: ticks only happen through service()
  Millis tick_ms = 100;
};

// Hosts any number of sessions over TCP. Connection handlers only decode
// messages, buffer inputs and write replies; one ticking thread owns game
// progress (or the caller, in manual mode).
class Server {
 public:
  explicit Server(ServerOptions options, std::shared_ptr<Clock> clock = nullptr);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::string create_session(SessionConfig config, BotFactory bots = {});
  std::shared_ptr<Session> session(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  void start();
  void stop();
  int port() const { return port_; }

  // Starts lobbies that are ready (sending initial views) and advances every
  // running session by one tick. Called by the ticking thread, or directly
  // in manual mode.
  void service();

  // Blocks until every session has finished or the server stops.
  void wait_finished();
  // Steady-clock times of the ticks in real-time mode.
  std::vector<Millis> tick_times() const;

 private:
  struct Connection;

  void accept_loop();
  void tick_loop();
  void read_loop(std::shared_ptr<Connection> c);
  void handle(const std::shared_ptr<Connection>& c, const json& message);
  void dispatch(const std::string& session, const TickResult& result);
  bool send(const std::shared_ptr<Connection>& c, const json& message);
  std::shared_ptr<Connection> seat_connection(const std::string& session, int seat) const;
  bool all_finished() const;

  ServerOptions options_;
  std::shared_ptr<Clock> clock_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_, tick_thread_;

  mutable std::mutex mu_;  // sessions, connections, seat map
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_session_ = 1;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> readers_;
  std::map<std::pair<std::string, int>, std::shared_ptr<Connection>> seats_;

  std::mutex service_mu_;  // serializes service()
  mutable std::mutex ticks_mu_;
  std::vector<Millis> tick_times_;
};

// ---- client ---------------------------------------------------------------------

// Blocking client used by the headless driver and tests.
class Client {
 public:
  Client(const std::string& host, int port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void send(const json& message);
  // Waits up to `timeout_ms` for the next message; nullopt on timeout or
  // when the server closed the connection.
  std::optional<json> receive(int timeout_ms = 5000);
  // Receives until a message of the given type arrives (others are kept and
  // returned by later receive calls).
  std::optional<json> receive_type(const std::string& type, int timeout_ms = 5000);
  void close();

 private:
  int fd_ = -1;
  protocol::FrameDecoder decoder_;
  std::vector<json> held_;
};

}  // namespace cleanup::play
