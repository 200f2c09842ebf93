#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "cleanup/episode_log.hpp"
#include "cleanup/orchestrator.hpp"
#include "cleanup/pipeline.hpp"
#include "cleanup/play_server.hpp"

using namespace cleanup;

namespace {

// One text frame: terrain, '*' pollution, '@' apples, avatars as seat digits.
void write_frame(std::ostream& out, const env::EnvState& s, const env::EnvParams& params) {
  const env::TileMap& map = params.map;
  out << "step " << s.step << "  pollution " << s.pollution_fraction(map) << "  scores";
  for (double v : s.score) out << ' ' << v;
  out << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const env::Pos p{x, y};
      const int c = map.index(p);
      const int a = s.avatar_at(p);
      char ch = '.';
      if (a >= 0) {
        ch = static_cast<char>('0' + a % 10);
      } else if (s.polluted[c]) {
        ch = '*';
      } else if (s.apple[c]) {
        ch = '@';
      } else {
        switch (map.at(p)) {
          case env::Terrain::kWall: ch = 'W'; break;
          case env::Terrain::kRiver: ch = 'R'; break;
          case env::Terrain::kOrchard: ch = 'O'; break;
          case env::Terrain::kFloor: ch = '.'; break;
        }
      }
      out << ch;
    }
    out << '\n';
  }
  out << '\n';
}

int replay_command(const std::string& path, const std::string& frames) {
  const env::EpisodeLog log = env::EpisodeLog::load(path);
  const env::ReplayResult r = env::replay(log);
  std::cout << "steps " << log.steps.size() << " of " << log.header.params.episode_length
            << (log.complete() ? "" : " (truncated)") << '\n';
  std::cout << "final scores";
  for (double v : r.final_scores) std::cout << ' ' << v;
  std::cout << '\n';
  if (!frames.empty()) {
    std::ofstream out(frames);
    if (!out) throw ConfigError("cannot write " + frames);
    env::EnvState s = env::reset(log.header.params, log.header.seed);
    write_frame(out, s, log.header.params);
    std::vector<env::Action> joint(log.num_players());
    for (const auto& rec : log.steps) {
      for (int i = 0; i < log.num_players(); ++i) joint[i] = static_cast<env::Action>(rec.action[i]);
      env::step(s, joint, log.header.params);
      write_frame(out, s, log.header.params);
    }
  }
  if (r.identical) {
    std::cout << "replay identical\n";
    return 0;
  }
  std::cout << "replay differs at step " << r.first_mismatch << '\n';
  return 2;
}

// Plan file: {"session": {...}, "bots": {...}, "sessions": n, "tick_ms": ms}.
int serve_command(const std::string& path, int port, const std::string& host) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const std::string base = std::filesystem::path(path).parent_path().string();
  play::SessionConfig session =
      play::session_config_from_json(j.contains("session") ? j.at("session") : j);
  if (!session.log_dir.empty() && std::filesystem::path(session.log_dir).is_relative()) {
    session.log_dir = (std::filesystem::path(base) / session.log_dir).string();
  }
  const nlohmann::json bots = j.value("bots", nlohmann::json{{"kind", "scripted"}});
  play::ServerOptions options;
  options.host = host;
  options.port = port;
  options.tick_ms = j.value("tick_ms", options.tick_ms);
  play::Server server(options);
  const int sessions = j.value("sessions", 1);
  if (sessions < 1) throw ConfigError("sessions must be at least 1");
  for (int k = 0; k < sessions; ++k) {
    play::SessionConfig c = session;
    c.seed = derive_seed(session.seed, static_cast<std::uint64_t>(k));
    server.create_session(std::move(c), play::bots_from_json(bots, base));
  }
  server.start();
  std::cout << "listening on " << host << ':' << server.port() << std::endl;
  server.wait_finished();
  server.stop();
  for (const std::string& id : server.session_ids()) {
    std::cout << server.session(id)->manifest().dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clean Up public-goods game: training, evaluation, analysis and play"};
  app.require_subcommand(1);

  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "Train a population");
  train->add_option("--config", train_config, "Experiment config (JSON)")->required();
  train->add_option("--out", train_out, "Output checkpoint directory")->required();

  std::string eval_ckpt, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained population");
  eval->add_option("--checkpoint", eval_ckpt, "Population checkpoint directory")->required();
  eval->add_option("--out", eval_out, "Episode log directory")->required();

  std::string logs_dir, analyze_out;
  pipeline::AnalysisOptions analysis_options;
  metrics::MetricsConfig metrics_config;
  auto* analyze = app.add_subcommand("analyze", "Compute metrics and statistics from logs");
  analyze->add_option("--logs", logs_dir, "Directory of episode logs and/or metrics CSVs")
      ->required();
  analyze->add_option("--out", analyze_out, "Report directory")->required();
  analyze->add_option("--bootstrap", analysis_options.bootstrap_n, "Mediation resamples");
  analyze->add_option("--seed", analysis_options.seed, "Bootstrap seed");
  analyze->add_option("--mediator", analysis_options.mediator, "Mediating metric")
      ->check(CLI::IsMember({"turn_taking", "consistency", "territoriality"}));
  analyze->add_option("--clean-window", metrics_config.clean_window,
                      "Steps after a river entry within which cleaning makes it a turn");

  std::string replay_log, replay_frames;
  auto* replay = app.add_subcommand("replay", "Re-simulate an episode log and verify it");
  replay->add_option("--log", replay_log, "Episode log (JSONL)")->required();
  replay->add_option("--frames", replay_frames, "Write text frames of every step to this file");

  std::string serve_config, serve_host = "127.0.0.1";
  int serve_port = 0;
  auto* serve = app.add_subcommand("serve", "Host human play sessions over TCP");
  serve->add_option("--config", serve_config, "Session plan (JSON)")->required();
  serve->add_option("--port", serve_port, "TCP port (0 picks a free one)");
  serve->add_option("--host", serve_host, "Address to bind");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) {
      const orch::ExperimentConfig cfg = orch::load_config(train_config);
      const auto t0 = std::chrono::steady_clock::now();
      orch::TrainingOptions opts;
      opts.out_dir = train_out;
      std::uint64_t last = 0;
      opts.progress = [&](const orch::TrainingProgress& p) {
        if (p.episodes < last + 50) return;
        last = p.episodes;
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "episodes " << p.episodes << "  min_steps " << p.min_steps << "  return "
                  << p.collective_return << "  contribution " << p.contribution_level << "  "
                  << s << " s\n";
      };
      orch::run_training(cfg, opts);
    } else if (*eval) {
      const auto ckpt = orch::PopulationCheckpoint::load(eval_ckpt);
      orch::run_evaluation(ckpt, eval_out);
    } else if (*analyze) {
      const auto rows = pipeline::collect(logs_dir, metrics_config);
      if (rows.empty()) throw ConfigError("no episode logs or metrics CSVs under " + logs_dir);
      const auto report = pipeline::analyze(rows, analysis_options);
      pipeline::write_report(report, rows, analyze_out);
      std::ifstream text(analyze_out + "/report.txt");
      std::cout << text.rdbuf();
    } else if (*replay) {
      return replay_command(replay_log, replay_frames);
    } else if (*serve) {
      return serve_command(serve_config, serve_port, serve_host);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
