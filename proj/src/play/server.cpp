#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "cleanup/play_server.hpp"

namespace cleanup::play {

namespace {

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t k = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(k));
  }
  return true;
}

json error_message(const std::string& reason) { return {{"type", "error"}, {"reason", reason}}; }

Millis steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

struct Server::Connection {
  int fd = -1;
  std::mutex write_mu;
  std::string session;
  int seat = -1;
  std::atomic<bool> open{true};
};

Server::Server(ServerOptions options, std::shared_ptr<Clock> clock)
    : options_(std::move(options)),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()) {
  if (options_.tick_ms < 1) throw ConfigError("tick_ms must be positive");
}

Server::~Server() { stop(); }

std::string Server::create_session(SessionConfig config, BotFactory bots) {
  std::lock_guard lock(mu_);
  const std::string id = "s" + std::to_string(next_session_++);
  sessions_.emplace(id, std::make_shared<Session>(id, std::move(config), std::move(bots)));
  return id;
}

std::shared_ptr<Session> Server::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> Server::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

void Server::start() {
  if (running_) return;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(options_.port);
  if (::getaddrinfo(options_.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    throw ConfigError("cannot resolve " + options_.host);
  }
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int bound = ::bind(listen_fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (listen_fd_ < 0 || bound != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    throw ConfigError("cannot listen on " + options_.host + ":" + port + ": " + why);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  if (!options_.manual_ticks) tick_thread_ = std::thread([this] { tick_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  if (tick_thread_.joinable()) tick_thread_.join();
  std::vector<std::thread> readers;
  {
    std::lock_guard lock(mu_);
    for (const auto& c : connections_) ::shutdown(c->fd, SHUT_RDWR);
    readers.swap(readers_);
  }
  for (auto& t : readers) t.join();
  std::lock_guard lock(mu_);
  for (const auto& c : connections_) ::close(c->fd);
  connections_.clear();
  seats_.clear();
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto c = std::make_shared<Connection>();
    c->fd = fd;
    std::lock_guard lock(mu_);
    connections_.push_back(c);
    readers_.emplace_back([this, c] { read_loop(c); });
  }
}

void Server::tick_loop() {
  using namespace std::chrono;
  auto next = steady_clock::now();
  while (running_) {
    next += milliseconds(options_.tick_ms);
    std::this_thread::sleep_until(next);
    if (!running_) break;
    {
      std::lock_guard lock(ticks_mu_);
      tick_times_.push_back(steady_ms());
    }
    service();
  }
}

std::vector<Millis> Server::tick_times() const {
  std::lock_guard lock(ticks_mu_);
  return tick_times_;
}

void Server::service() {
  std::lock_guard serial(service_mu_);
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) sessions.push_back(s);
  }
  for (const auto& s : sessions) {
    switch (s->state()) {
      case SessionState::kLobby:
        if (s->ready_to_start()) dispatch(s->id(), s->start());
        break;
      case SessionState::kRunning:
        dispatch(s->id(), s->tick());
        break;
      case SessionState::kFinished:
        break;
    }
  }
}

bool Server::all_finished() const {
  std::lock_guard lock(mu_);
  for (const auto& [id, s] : sessions_) {
    if (s->state() != SessionState::kFinished) return false;
  }
  return true;
}

void Server::wait_finished() {
  while (running_ && !all_finished()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
}

std::shared_ptr<Server::Connection> Server::seat_connection(const std::string& session,
                                                            int seat) const {
  std::lock_guard lock(mu_);
  const auto it = seats_.find({session, seat});
  return it == seats_.end() ? nullptr : it->second;
}

bool Server::send(const std::shared_ptr<Connection>& c, const json& message) {
  if (!c || !c->open) return false;
  const std::string frame = protocol::encode(message);
  std::lock_guard lock(c->write_mu);
  if (!write_all(c->fd, frame)) {
    c->open = false;
    return false;
  }
  return true;
}

void Server::dispatch(const std::string& session, const TickResult& result) {
  for (const ClientView& v : result.views) {
    json m = protocol::view_message(v);
    m["session"] = session;
    send(seat_connection(session, v.seat), m);
  }
  if (result.episode_end) {
    for (const ClientView& v : result.views) {
      json m = protocol::episode_end_message(*result.episode_end, v.seat, v.cumulative);
      m["session"] = session;
      send(seat_connection(session, v.seat), m);
    }
  }
  if (result.session_finished) {
    for (const ClientView& v : result.views) {
      send(seat_connection(session, v.seat), {{"type", "session_end"}, {"session", session}});
    }
  }
}

void Server::read_loop(std::shared_ptr<Connection> c) {
  protocol::FrameDecoder decoder;
  char buf[4096];
  while (running_ && c->open) {
    const ssize_t k = ::recv(c->fd, buf, sizeof buf, 0);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) break;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(k)));
    try {
      while (auto m = decoder.next()) handle(c, *m);
    } catch (const ParseError& e) {
      send(c, error_message(e.what()));
      break;
    }
  }
  c->open = false;
  if (!c->session.empty()) {
    if (auto s = session(c->session)) s->leave(c->seat);
    std::lock_guard lock(mu_);
    seats_.erase({c->session, c->seat});
  }
}

void Server::handle(const std::shared_ptr<Connection>& c, const json& m) {
  const std::string type = m.at("type").get<std::string>();
  try {
    if (type == "ping") {
      send(c, {{"type", "pong"}});
    } else if (type == "join") {
      if (!c->session.empty()) throw SessionError("already seated");
      std::shared_ptr<Session> s;
      if (m.contains("session")) {
        s = session(m.at("session").get<std::string>());
        if (!s) throw SessionError("no such session");
      } else {
        std::lock_guard lock(mu_);
        for (const auto& [id, candidate] : sessions_) {
          if (candidate->state() == SessionState::kLobby) {
            s = candidate;
            break;
          }
        }
        if (!s) throw SessionError("no session is accepting players");
      }
      const int seat = s->join(m.value("name", std::string("player")));
      {
        std::lock_guard lock(mu_);
        c->session = s->id();
        c->seat = seat;
        seats_[{s->id(), seat}] = c;
      }
      const SessionConfig& cfg = s->config();
      json plan = json::array();
      for (Condition k : cfg.plan) plan.push_back(to_string(k));
      send(c, {{"type", "seat"},
               {"version", protocol::kVersion},
               {"session", s->id()},
               {"seat", seat},
               {"players", cfg.params.num_players},
               {"episode_length", cfg.params.episode_length},
               {"window", cfg.window},
               {"tick_ms", options_.tick_ms},
               {"input_window_ms", kInputWindowMs},
               {"plan", plan}});
    } else if (type == "start") {
      auto s = session(c->session);
      if (!s) throw SessionError("not seated");
      std::lock_guard serial(service_mu_);
      dispatch(s->id(), s->start());
    } else if (type == "input") {
      auto s = session(c->session);
      if (!s) throw SessionError("not seated");
      const auto action = protocol::parse_action(m.value("action", json()));
      if (!action) throw SessionError("unknown action");
      const InputResult r = s->submit(c->seat, *action, clock_->now());
      json reply = {{"type", accepted(r) ? "ack" : "drop"}, {"seq", m.value("seq", json())}};
      if (!accepted(r)) reply["reason"] = to_string(r);
      send(c, reply);
    } else if (type == "leave") {
      c->open = false;
      ::shutdown(c->fd, SHUT_RDWR);
    } else {
      throw SessionError("unknown message type '" + type + "'");
    }
  } catch (const SessionError& e) {
    json reply = error_message(e.what());
    if (m.contains("seq")) reply["seq"] = m.at("seq");
    send(c, reply);
  }
}

// ---- client ---------------------------------------------------------------------

Client::Client(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw ConfigError("cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int ok = fd_ >= 0 ? ::connect(fd_, res->ai_addr, res->ai_addrlen) : -1;
  ::freeaddrinfo(res);
  if (ok != 0) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw ConfigError("cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Client::send(const json& message) {
  if (fd_ < 0 || !write_all(fd_, protocol::encode(message))) {
    throw ConfigError("client: connection closed");
  }
}

std::optional<json> Client::receive(int timeout_ms) {
  if (!held_.empty()) {
    json m = std::move(held_.front());
    held_.erase(held_.begin());
    return m;
  }
  const Millis deadline = steady_ms() + timeout_ms;
  char buf[65536];
  while (true) {
    if (auto m = decoder_.next()) return m;
    if (fd_ < 0) return std::nullopt;
    const Millis left = deadline - steady_ms();
    if (left <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(left)) <= 0) continue;
    const ssize_t k = ::recv(fd_, buf, sizeof buf, 0);
    if (k <= 0) {
      close();
      continue;
    }
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(k)));
  }
}

std::optional<json> Client::receive_type(const std::string& type, int timeout_ms) {
  for (std::size_t k = 0; k < held_.size(); ++k) {
    if (held_[k].at("type") == type) {
      json m = std::move(held_[k]);
      held_.erase(held_.begin() + static_cast<std::ptrdiff_t>(k));
      return m;
    }
  }
  const Millis deadline = steady_ms() + timeout_ms;
  std::vector<json> skipped;
  std::optional<json> found;
  while (!found) {
    const Millis left = deadline - steady_ms();
    if (left <= 0) break;
    // Read straight from the stream so held messages are not revisited.
    std::vector<json> saved;
    saved.swap(held_);
    auto m = receive(static_cast<int>(left));
    held_.swap(saved);
    if (!m) break;
    if (m->at("type") == type) {
      found = std::move(m);
    } else {
      skipped.push_back(std::move(*m));
    }
  }
  held_.insert(held_.end(), std::make_move_iterator(skipped.begin()),
               std::make_move_iterator(skipped.end()));
  return found;
}

}  // namespace cleanup::play
