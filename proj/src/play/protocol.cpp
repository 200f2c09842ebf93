#include <charconv>

#include "cleanup/play_server.hpp"

namespace cleanup::play::protocol {

std::string encode(const json& message) {
  const std::string body = message.dump();
  return std::to_string(body.size()) + "\n" + body;
}

std::optional<json> FrameDecoder::next() {
  const std::size_t nl = buffer_.find('\n');
  if (nl == std::string::npos) {
    if (buffer_.size() > 20) throw ParseError("protocol: length prefix too long");
    return std::nullopt;
  }
  std::size_t length = 0;
  const auto [end, ec] = std::from_chars(buffer_.data(), buffer_.data() + nl, length);
  if (ec != std::errc() || end != buffer_.data() + nl || nl == 0) {
    throw ParseError("protocol: malformed length prefix");
  }
  if (length > kMaxFrame) throw ParseError("protocol: frame exceeds the size limit");
  if (buffer_.size() < nl + 1 + length) return std::nullopt;
  json message;
  try {
    message = json::parse(buffer_.begin() + static_cast<std::ptrdiff_t>(nl + 1),
                          buffer_.begin() + static_cast<std::ptrdiff_t>(nl + 1 + length));
  } catch (const json::exception& e) {
    throw ParseError(std::string("protocol: bad payload: ") + e.what());
  }
  buffer_.erase(0, nl + 1 + length);
  if (!message.is_object() || !message.contains("type") || !message.at("type").is_string()) {
    throw ParseError("protocol: message must be an object with a string 'type'");
  }
  return message;
}

json view_message(const ClientView& v) {
  json grid = json::array();
  for (std::uint8_t c : v.grid.cells) grid.push_back(static_cast<int>(c));
  return {{"type", "view"},
          {"seat", v.seat},
          {"episode", v.episode},
          {"tick", v.tick},
          {"steps_left", v.steps_left},
          {"condition", to_string(v.condition)},
          {"size", v.grid.size},
          {"grid", std::move(grid)},
          {"avatar_sprites", v.avatar_sprites},
          {"score", v.score},
          {"cumulative", v.cumulative},
          {"tickets", v.tickets_left},
          {"bars", v.bars},
          {"bar_seats", v.bar_seats},
          {"bar_max", v.bar_max}};
}

ClientView parse_view(const json& m) {
  try {
    if (m.at("type") != "view") throw ParseError("protocol: not a view message");
    ClientView v;
    v.seat = m.at("seat").get<int>();
    v.episode = m.at("episode").get<int>();
    v.tick = m.at("tick").get<int>();
    v.steps_left = m.at("steps_left").get<int>();
    v.condition = condition_from_string(m.at("condition").get<std::string>());
    v.grid.size = m.at("size").get<int>();
    for (int c : m.at("grid")) v.grid.cells.push_back(static_cast<std::uint8_t>(c));
    if (static_cast<int>(v.grid.cells.size()) != v.grid.size * v.grid.size) {
      throw ParseError("protocol: view grid does not match its size");
    }
    v.avatar_sprites = m.at("avatar_sprites").get<std::vector<int>>();
    v.score = m.at("score").get<double>();
    v.cumulative = m.at("cumulative").get<double>();
    v.tickets_left = m.at("tickets").get<int>();
    v.bars = m.at("bars").get<std::vector<double>>();
    v.bar_seats = m.at("bar_seats").get<std::vector<int>>();
    v.bar_max = m.at("bar_max").get<double>();
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("protocol: bad view: ") + e.what());
  }
}

json episode_end_message(const EpisodeSummary& s, int seat, double cumulative) {
  return {{"type", "episode_end"},
          {"episode", s.episode},
          {"condition", to_string(s.condition)},
          {"seat", seat},
          {"score", s.scores.at(seat)},
          {"cumulative", cumulative}};
}

std::optional<env::Action> parse_action(const json& value) {
  if (value.is_number_integer()) {
    const int a = value.get<int>();
    if (a < 0 || a >= env::kNumActions) return std::nullopt;
    return static_cast<env::Action>(a);
  }
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    for (int a = 0; a < env::kNumActions; ++a) {
      if (env::action_name(static_cast<env::Action>(a)) == s) return static_cast<env::Action>(a);
    }
  }
  return std::nullopt;
}

}  // namespace cleanup::play::protocol
