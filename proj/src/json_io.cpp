#include "cleanup/json_io.hpp"

namespace cleanup::env {

void to_json(nlohmann::json& j, const EnvParams& p) {
  j = nlohmann::json{
      {"pr_apple", p.pr_apple},
      {"pr_pollution", p.pr_pollution},
      {"h_abundance", p.h_abundance},
      {"h_depletion", p.h_depletion},
      {"episode_length", p.episode_length},
      {"ticket_cost", p.ticket_cost},
      {"ticket_penalty", p.ticket_penalty},
      {"apples_per_point", p.apples_per_point},
      {"start_polluted", p.start_polluted},
      {"num_players", p.num_players},
      {"beam_length", p.beam_length},
      {"beam_width", p.beam_width},
      {"ticket_freeze_steps", p.ticket_freeze_steps},
      {"ticket_budget", p.ticket_budget},
      {"map", p.map.serialize()},
  };
}

void from_json(const nlohmann::json& j, EnvParams& p) {
  const std::string profile = j.value("profile", std::string("agent"));
  if (profile == "agent") {
    p = EnvParams::agent_defaults();
  } else if (profile == "human") {
    p = EnvParams::human_defaults();
  } else {
    throw ConfigError("unknown env profile '" + profile + "'");
  }
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("pr_apple", p.pr_apple);
  get("pr_pollution", p.pr_pollution);
  get("h_abundance", p.h_abundance);
  get("h_depletion", p.h_depletion);
  get("episode_length", p.episode_length);
  get("ticket_cost", p.ticket_cost);
  get("ticket_penalty", p.ticket_penalty);
  get("apples_per_point", p.apples_per_point);
  get("start_polluted", p.start_polluted);
  get("num_players", p.num_players);
  get("beam_length", p.beam_length);
  get("beam_width", p.beam_width);
  get("ticket_freeze_steps", p.ticket_freeze_steps);
  get("ticket_budget", p.ticket_budget);
  if (j.contains("map")) {
    p.map = TileMap::parse(j.at("map").get<std::string>());
  } else if (j.contains("map_name")) {
    p.map = TileMap::builtin(j.at("map_name").get<std::string>());
  } else if (j.contains("map_file")) {
    p.map = TileMap::load(j.at("map_file").get<std::string>());
  }
}

}  // namespace cleanup::env
