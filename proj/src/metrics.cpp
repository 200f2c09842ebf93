#include "cleanup/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cleanup::metrics {

namespace {

constexpr const char* kCsvHeader = "# cleanup-metrics v1";
constexpr const char* kCsvColumns =
    "run,group_id,episode_index,condition,task_order,collective_return,contribution_level,"
    "territoriality,turn_taking,consistency,contributions,returns,apples,intrinsic";
constexpr const char* kNa = "NA";

bool in_river(const env::TileMap& map, env::Pos p) {
  return map.in_bounds(p) && map.at(p) == env::Terrain::kRiver;
}

}  // namespace

std::optional<double> territoriality_from_presence(
    const std::vector<std::vector<bool>>& presence) {
  if (presence.empty()) return std::nullopt;
  const std::size_t locations = presence[0].size();
  for (const auto& row : presence) {
    require(row.size() == locations, "territoriality: ragged presence matrix");
  }
  int visited = 0;
  long members_at_locations = 0;
  for (std::size_t l = 0; l < locations; ++l) {
    int here = 0;
    for (const auto& row : presence) here += row[l] ? 1 : 0;
    if (here > 0) {
      ++visited;
      members_at_locations += here;
    }
  }
  if (visited == 0) return std::nullopt;
  int gamma = 0;
  for (const auto& row : presence) {
    gamma += std::any_of(row.begin(), row.end(), [](bool b) { return b; }) ? 1 : 0;
  }
  const double alpha = static_cast<double>(members_at_locations) / visited;
  const double beta = gamma / alpha;
  return beta / std::min(gamma, visited);
}

std::vector<std::vector<bool>> river_presence(const env::EpisodeLog& log) {
  const env::TileMap& map = log.header.params.map;
  const int n = log.num_players();
  const std::vector<int>& river = map.river_cells();
  std::vector<int> column(map.cell_count(), -1);
  for (std::size_t k = 0; k < river.size(); ++k) column[river[k]] = static_cast<int>(k);
  std::vector<std::vector<bool>> presence(n, std::vector<bool>(river.size(), false));
  auto mark = [&](int i, env::Pos p) {
    if (in_river(map, p)) presence[i][column[map.index(p)]] = true;
  };
  for (int i = 0; i < n && i < static_cast<int>(log.header.initial.size()); ++i) {
    mark(i, log.header.initial[i].pos);
  }
  for (const env::StepRecord& r : log.steps) {
    for (int i = 0; i < n; ++i) mark(i, r.pos[i]);
  }
  return presence;
}

std::optional<double> territoriality(const env::EpisodeLog& log) {
  return territoriality_from_presence(river_presence(log));
}

double recency_value(int gap) {
  switch (gap) {
    case 0: return 1.0;
    case 1: return 0.75;
    case 2: return 0.5;
    case 3: return 0.25;
    default: return 0.0;
  }
}

std::optional<double> turn_taking_score(std::span<const int> turns) {
  if (turns.empty()) return std::nullopt;
  std::vector<std::pair<int, std::size_t>> last;  // (member, position of last turn)
  double total = 0.0;
  for (std::size_t k = 0; k < turns.size(); ++k) {
    auto it = std::find_if(last.begin(), last.end(),
                           [&](const auto& e) { return e.first == turns[k]; });
    if (it == last.end()) {
      total += recency_value(-1);
      last.emplace_back(turns[k], k);
    } else {
      total += recency_value(static_cast<int>(k - it->second - 1));
      it->second = k;
    }
  }
  return 1.0 - total / static_cast<double>(turns.size());
}

std::vector<int> river_turns(const env::EpisodeLog& log, int clean_window) {
  require(clean_window >= 1, "river_turns: clean_window must be positive");
  const env::TileMap& map = log.header.params.map;
  const int n = log.num_players();
  const int steps = static_cast<int>(log.steps.size());
  std::vector<bool> inside(n, false);
  for (int i = 0; i < n && i < static_cast<int>(log.header.initial.size()); ++i) {
    inside[i] = in_river(map, log.header.initial[i].pos);
  }
  std::vector<int> turns;
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < n; ++i) {
      const bool now = in_river(map, log.steps[t].pos[i]);
      if (now && !inside[i]) {
        const int end = std::min(steps, t + clean_window);
        for (int u = t; u < end; ++u) {
          if (log.steps[u].cleaned[i] > 0) {
            turns.push_back(i);
            break;
          }
        }
      }
      inside[i] = now;
    }
  }
  return turns;
}

std::optional<double> turn_taking(const env::EpisodeLog& log, int clean_window) {
  const std::vector<int> turns = river_turns(log, clean_window);
  return turn_taking_score(turns);
}

std::optional<double> gini_pairwise(std::span<const double> c) {
  const std::size_t t = c.size();
  if (t == 0) return std::nullopt;
  const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(t);
  if (mean <= 0.0) return std::nullopt;
  double sum = 0.0;
  for (double a : c) {
    for (double b : c) sum += std::abs(a - b);
  }
  return sum / (2.0 * static_cast<double>(t) * static_cast<double>(t) * mean);
}

std::optional<double> gini(std::span<const double> c) {
  const std::size_t t = c.size();
  if (t == 0) return std::nullopt;
  std::vector<double> x(c.begin(), c.end());
  std::sort(x.begin(), x.end());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total <= 0.0) return std::nullopt;
  double weighted = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    weighted += (2.0 * static_cast<double>(i) - static_cast<double>(t) + 1.0) * x[i];
  }
  return weighted / (static_cast<double>(t) * total);
}

std::vector<double> contribution_bins(const env::EpisodeLog& log, int bins) {
  require(bins >= 1, "contribution_bins: bins must be positive");
  const int steps = static_cast<int>(log.steps.size());
  const int width = std::max(1, steps / bins);
  std::vector<double> out(bins, 0.0);
  for (int t = 0; t < steps; ++t) {
    int count = 0;
    for (int c : log.steps[t].cleaned) count += c > 0 ? 1 : 0;
    out[std::min(t / width, bins - 1)] += count;
  }
  return out;
}

std::optional<double> temporal_consistency(const env::EpisodeLog& log, int bins) {
  const std::vector<double> c = contribution_bins(log, bins);
  const std::optional<double> g = gini(c);
  if (!g) return std::nullopt;
  return 1.0 - *g;
}

EpisodeMetrics summarize(const env::EpisodeLog& log, const MetricsConfig& config,
                         const std::string& run) {
  if (!log.complete()) {
    throw ParseError("summarize: episode log is truncated (" + std::to_string(log.steps.size()) +
                     " of " + std::to_string(log.header.params.episode_length) + " steps)");
  }
  const int n = log.num_players();
  EpisodeMetrics m;
  m.run = run;
  m.group_id = log.header.group_id;
  m.episode_index = log.header.episode_index;
  m.condition = log.header.condition;
  m.task_order = log.header.task_order;
  m.contributions.assign(n, 0);
  m.returns.assign(n, 0.0);
  m.apples.assign(n, 0);
  const bool has_intrinsic = !log.steps.empty() && !log.steps[0].intrinsic.empty();
  if (has_intrinsic) m.intrinsic.assign(n, 0.0);
  for (const env::StepRecord& r : log.steps) {
    for (int i = 0; i < n; ++i) {
      m.contributions[i] += r.cleaned[i] > 0 ? 1 : 0;
      m.returns[i] += r.reward[i];
      m.apples[i] += r.apples[i];
      if (has_intrinsic) m.intrinsic[i] += r.intrinsic[i];
    }
  }
  m.collective_return = std::accumulate(m.returns.begin(), m.returns.end(), 0.0);
  m.contribution_level = std::accumulate(m.contributions.begin(), m.contributions.end(), 0);
  m.territoriality = territoriality(log);
  m.turn_taking = turn_taking(log, config.clean_window);
  m.consistency = temporal_consistency(log, config.bins);
  return m;
}

// ---- CSV ----------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string(kNa);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("metrics csv: bad number '" + s + "'");
  }
  if (used != s.size()) throw ParseError("metrics csv: bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("metrics csv: bad integer '" + s + "'");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s == kNa) return std::nullopt;
  return parse_double(s);
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  if (s.empty()) return out;
  for (const std::string& part : split(s, ';')) {
    if constexpr (std::is_floating_point_v<T>) {
      out.push_back(parse_double(part));
    } else {
      out.push_back(parse_int(part));
    }
  }
  return out;
}

}  // namespace

void write_csv(std::ostream& out, std::span<const EpisodeMetrics> rows) {
  out << kCsvHeader << '\n' << kCsvColumns << '\n';
  for (const EpisodeMetrics& m : rows) {
    if (m.run.find_first_of(",\n\r") != std::string::npos) {
      throw ConfigError("metrics csv: run label must not contain commas or newlines");
    }
    out << m.run << ',' << m.group_id << ',' << m.episode_index << ',' << to_string(m.condition)
        << ',' << m.task_order << ',' << format_double(m.collective_return) << ','
        << m.contribution_level << ',' << format_optional(m.territoriality) << ','
        << format_optional(m.turn_taking) << ',' << format_optional(m.consistency) << ','
        << join(m.contributions) << ',' << join(m.returns) << ',' << join(m.apples) << ','
        << join(m.intrinsic) << '\n';
  }
}

std::vector<EpisodeMetrics> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ParseError("metrics csv: missing '" + std::string(kCsvHeader) + "' header");
  }
  if (!std::getline(in, line) || line != kCsvColumns) {
    throw ParseError("metrics csv: unexpected column line");
  }
  std::vector<EpisodeMetrics> rows;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 14) {
      throw ParseError("metrics csv: line " + std::to_string(line_no) + " has " +
                       std::to_string(f.size()) + " fields, expected 14");
    }
    EpisodeMetrics m;
    m.run = f[0];
    m.group_id = parse_int(f[1]);
    m.episode_index = parse_int(f[2]);
    try {
      m.condition = condition_from_string(f[3]);
    } catch (const std::exception& e) {
      throw ParseError(std::string("metrics csv: ") + e.what());
    }
    m.task_order = parse_int(f[4]);
    m.collective_return = parse_double(f[5]);
    m.contribution_level = parse_int(f[6]);
    m.territoriality = parse_optional(f[7]);
    m.turn_taking = parse_optional(f[8]);
    m.consistency = parse_optional(f[9]);
    m.contributions = parse_list<int>(f[10]);
    m.returns = parse_list<double>(f[11]);
    m.apples = parse_list<int>(f[12]);
    m.intrinsic = parse_list<double>(f[13]);
    rows.push_back(std::move(m));
  }
  return rows;
}

}  // namespace cleanup::metrics
