#include "cleanup/episode_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "cleanup/json_io.hpp"

namespace cleanup::env {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "cleanup-episode-log";

json pos_json(Pos p) { return json::array({p.x, p.y}); }
Pos pos_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

EpisodeLog EpisodeLog::begin(const EnvState& initial, const EnvParams& params,
                             std::uint64_t seed, Condition condition) {
  EpisodeLog log;
  log.header.seed = seed;
  log.header.condition = condition;
  log.header.params = params;
  log.header.initial = initial.avatars;
  log.steps.reserve(params.episode_length);
  return log;
}

void EpisodeLog::append(const EnvState& after, std::span<const Action> joint_action,
                        const StepEvents& events, std::span<const double> intrinsic) {
  StepRecord r;
  r.step = after.step - 1;
  const int n = after.num_players();
  r.pos.reserve(n);
  r.facing.reserve(n);
  for (const Avatar& a : after.avatars) {
    r.pos.push_back(a.pos);
    r.facing.push_back(a.facing);
  }
  for (Action a : joint_action) r.action.push_back(static_cast<int>(a));
  r.reward = events.reward;
  r.cleaned = events.cleaned;
  r.apples = events.apples_eaten;
  r.tickets = events.tickets;
  r.pollution_fraction = after.pollution_fraction(header.params.map);
  r.intrinsic.assign(intrinsic.begin(), intrinsic.end());
  steps.push_back(std::move(r));
}

void EpisodeLog::write(std::ostream& out) const {
  json h;
  h["format"] = kFormat;
  h["version"] = header.version;
  h["seed"] = header.seed;
  h["condition"] = to_string(header.condition);
  h["params"] = header.params;
  h["group_id"] = header.group_id;
  h["episode_index"] = header.episode_index;
  h["agent_ids"] = header.agent_ids;
  json init = json::array();
  for (const Avatar& a : header.initial) {
    init.push_back({{"pos", pos_json(a.pos)}, {"facing", static_cast<int>(a.facing)}});
  }
  h["initial"] = init;
  h["source"] = header.source;
  h["task_order"] = header.task_order;
  out << h.dump() << '\n';
  for (const StepRecord& r : steps) {
    json j;
    j["step"] = r.step;
    json pos = json::array();
    json facing = json::array();
    for (std::size_t i = 0; i < r.pos.size(); ++i) {
      pos.push_back(pos_json(r.pos[i]));
      facing.push_back(static_cast<int>(r.facing[i]));
    }
    j["pos"] = pos;
    j["facing"] = facing;
    j["action"] = r.action;
    j["reward"] = r.reward;
    j["cleaned"] = r.cleaned;
    j["apples"] = r.apples;
    json t = json::array();
    for (auto [s, d] : r.tickets) t.push_back(json::array({s, d}));
    j["tickets"] = t;
    j["F"] = r.pollution_fraction;
    if (!r.intrinsic.empty()) j["r_int"] = r.intrinsic;
    out << j.dump() << '\n';
  }
}

void EpisodeLog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write episode log '" + path + "'");
  write(out);
  if (!out) throw ConfigError("write failed for episode log '" + path + "'");
}

EpisodeLog EpisodeLog::read(std::istream& in) {
  EpisodeLog log;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("episode log: empty input");
  try {
    const json h = json::parse(line);
    if (h.value("format", std::string()) != kFormat) {
      throw ParseError("episode log: bad format tag");
    }
    log.header.version = h.at("version").get<int>();
    if (log.header.version != kEpisodeLogVersion) {
      throw ParseError("episode log: unsupported version " +
                       std::to_string(log.header.version));
    }
    log.header.seed = h.at("seed").get<std::uint64_t>();
    log.header.condition = condition_from_string(h.at("condition").get<std::string>());
    log.header.params = h.at("params").get<EnvParams>();
    log.header.group_id = h.value("group_id", 0);
    log.header.episode_index = h.value("episode_index", 0);
    log.header.agent_ids = h.value("agent_ids", std::vector<int>{});
    for (const json& a : h.at("initial")) {
      log.header.initial.push_back(
          {pos_from(a.at("pos")), static_cast<Facing>(a.at("facing").get<int>()), 0});
    }
    log.header.source = h.value("source", std::string());
    log.header.task_order = h.value("task_order", 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("episode log header: ") + e.what());
  }
  const int n = log.header.params.num_players;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepRecord r;
    try {
      const json j = json::parse(line);
      r.step = j.at("step").get<int>();
      for (const json& p : j.at("pos")) r.pos.push_back(pos_from(p));
      for (const json& f : j.at("facing")) r.facing.push_back(static_cast<Facing>(f.get<int>()));
      r.action = j.at("action").get<std::vector<int>>();
      r.reward = j.at("reward").get<std::vector<double>>();
      r.cleaned = j.at("cleaned").get<std::vector<int>>();
      r.apples = j.at("apples").get<std::vector<int>>();
      for (const json& t : j.at("tickets")) {
        r.tickets.emplace_back(t.at(0).get<int>(), t.at(1).get<int>());
      }
      r.pollution_fraction = j.at("F").get<double>();
      if (j.contains("r_int")) r.intrinsic = j.at("r_int").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError("episode log line " + std::to_string(expected + 2) + ": " + e.what());
    }
    if (r.step != expected) {
      throw ParseError("episode log: expected step " + std::to_string(expected) + ", found " +
                       std::to_string(r.step));
    }
    const auto sz = static_cast<std::size_t>(n);
    if (r.pos.size() != sz || r.facing.size() != sz || r.action.size() != sz ||
        r.reward.size() != sz || r.cleaned.size() != sz || r.apples.size() != sz) {
      throw ParseError("episode log: per-player field length mismatch at step " +
                       std::to_string(r.step));
    }
    log.steps.push_back(std::move(r));
    ++expected;
  }
  return log;
}

EpisodeLog EpisodeLog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open episode log '" + path + "'");
  return read(in);
}

ReplayResult replay(const EpisodeLog& log) {
  ReplayResult result;
  const EnvParams& params = log.header.params;
  EnvState s = reset(params, log.header.seed);
  result.identical = s.avatars == log.header.initial;
  if (!result.identical) result.first_mismatch = 0;
  EpisodeLog shadow = EpisodeLog::begin(s, params, log.header.seed, log.header.condition);
  std::vector<Action> joint(params.num_players);
  for (const StepRecord& r : log.steps) {
    for (int i = 0; i < params.num_players; ++i) joint[i] = static_cast<Action>(r.action[i]);
    const StepEvents ev = step(s, joint, params);
    shadow.append(s, joint, ev, r.intrinsic);
    if (result.identical && !(shadow.steps.back() == r)) {
      result.identical = false;
      result.first_mismatch = r.step;
    }
    if (s.step >= params.episode_length) break;
  }
  result.final_scores = s.score;
  result.final_state = std::move(s);
  return result;
}

}  // namespace cleanup::env
