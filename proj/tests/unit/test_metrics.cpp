#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "cleanup/metrics.hpp"

using namespace cleanup;
using namespace cleanup::metrics;

namespace {

std::vector<std::vector<bool>> grid(int members, int locations, bool value) {
  return std::vector<std::vector<bool>>(members, std::vector<bool>(locations, value));
}

// A two-player log on a one-row map "RR.O": cells 0 and 1 are river.
env::EpisodeLog corridor_log(const std::vector<std::vector<int>>& xs,
                             const std::vector<std::vector<int>>& cleaned) {
  env::EpisodeLog log;
  log.header.params.map = env::TileMap::parse("cleanup-map v1\nRR.O\n");
  log.header.params.num_players = static_cast<int>(xs[0].size());
  log.header.params.episode_length = static_cast<int>(xs.size()) - 1;
  for (int x : xs[0]) log.header.initial.push_back({{x, 0}, env::Facing::kNorth, 0});
  for (std::size_t t = 1; t < xs.size(); ++t) {
    env::StepRecord r;
    r.step = static_cast<int>(t) - 1;
    for (std::size_t i = 0; i < xs[t].size(); ++i) {
      r.pos.push_back({xs[t][i], 0});
      r.facing.push_back(env::Facing::kNorth);
      r.action.push_back(0);
      r.reward.push_back(0.0);
      r.cleaned.push_back(cleaned[t - 1][i]);
      r.apples.push_back(0);
    }
    log.steps.push_back(r);
  }
  return log;
}

}  // namespace

TEST_CASE("territoriality matches the worked examples") {
  // Disjoint: 5 members, 10 locations, each location visited by one member.
  auto disjoint = grid(5, 10, false);
  for (int l = 0; l < 10; ++l) disjoint[l % 5][l] = true;
  CHECK(*territoriality_from_presence(disjoint) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*territoriality_from_presence(grid(5, 10, true)) == doctest::Approx(0.2).epsilon(1e-15));
  auto single = grid(1, 10, false);
  single[0][3] = single[0][7] = true;
  CHECK(*territoriality_from_presence(single) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(territoriality_from_presence(grid(5, 10, false)).has_value());
}

TEST_CASE("territoriality equals the set-enumeration oracle and stays in range") {
  Rng rng(101);
  int defined = 0;
  for (int k = 0; k < 300; ++k) {
    const env::EpisodeLog log = oracle::random_small_log(rng);
    const auto got = territoriality(log);
    const auto want = oracle::territoriality(oracle::presence(log));
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    ++defined;
    CHECK(std::abs(*got - *want) <= 1e-12);
    CHECK(*got <= 1.0 + 1e-12);
    CHECK(*got > 0.0);
  }
  CHECK(defined > 200);
}

TEST_CASE("turn taking reproduces the hand-scored examples") {
  CHECK(*turn_taking_score(std::vector<int>{0, 1, 2, 3, 4, 0, 1, 2, 3, 4}) == 1.0);
  const std::vector<int> abab{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(std::abs(*turn_taking_score(abab) - 0.4) <= 1e-12);
  // A single member: the first turn scores like a 4+ gap, every later one 1.
  for (int n : {1, 2, 10, 1000}) {
    const std::vector<int> solo(n, 3);
    CHECK(std::abs(*turn_taking_score(solo) - 1.0 / n) <= 1e-12);
  }
  CHECK(std::abs(*turn_taking_score(std::vector<int>{0, 1, 1, 2, 0, 3}) -
                 (1.0 - (1.0 + 0.25) / 6.0)) <= 1e-12);
  CHECK_FALSE(turn_taking_score(std::vector<int>{}).has_value());
  CHECK(recency_value(-1) == 0.0);
  CHECK(recency_value(7) == 0.0);
}

TEST_CASE("turn taking agrees with the scan-back oracle and is monotone under repeats") {
  Rng rng(7);
  for (int k = 0; k < 500; ++k) {
    std::vector<int> s(1 + uniform_index(rng, 30));
    for (int& m : s) m = static_cast<int>(uniform_index(rng, 5));
    const double base = *turn_taking_score(s);
    CHECK(std::abs(base - *oracle::turn_taking(s)) <= 1e-12);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    const std::size_t at = uniform_index(rng, s.size());
    std::vector<int> repeated = s;
    repeated.insert(repeated.begin() + static_cast<std::ptrdiff_t>(at) + 1, s[at]);
    CHECK(*turn_taking_score(repeated) <= base + 1e-12);
  }
}

TEST_CASE("river turns require an entry followed by cleaning within the window") {
  // Player 0 enters at step 0 and cleans at step 2; player 1 enters at step 1
  // but never cleans; player 0 leaves and re-enters at step 4, cleaning then.
  const std::vector<std::vector<int>> xs{{2, 3}, {1, 3}, {1, 1}, {1, 1}, {2, 1}, {0, 1}};
  const std::vector<std::vector<int>> cleaned{{0, 0}, {0, 0}, {1, 0}, {0, 0}, {2, 0}};
  const env::EpisodeLog log = corridor_log(xs, cleaned);
  CHECK(river_turns(log, 20) == std::vector<int>{0, 0});
  CHECK(river_turns(log, 2).size() == 1);  // the first entry's clean is 2 steps later
  CHECK(river_turns(log, 1) == std::vector<int>{0});
}

TEST_CASE("gini and consistency") {
  const std::vector<double> equal(10, 3.0);
  CHECK(*gini(equal) == doctest::Approx(0.0));
  std::vector<double> one(10, 0.0);
  one[4] = 17.0;
  CHECK(std::abs(*gini(one) - 0.9) <= 1e-12);
  std::vector<double> two(10, 0.0);
  two[1] = two[8] = 5.0;
  CHECK(std::abs(*gini(two) - 0.8) <= 1e-12);
  CHECK_FALSE(gini(std::vector<double>(10, 0.0)).has_value());

  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> c(1 + uniform_index(rng, 20));
    for (double& v : c) v = uniform01(rng) < 0.3 ? 0.0 : static_cast<double>(uniform_index(rng, 50));
    const auto fast = gini(c), slow = gini_pairwise(c);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) CHECK(std::abs(*fast - *slow) <= 1e-12);
  }
}

TEST_CASE("contribution bins put the remainder in the last bin") {
  Rng rng(9);
  env::EpisodeLog log = oracle::random_small_log(rng);
  log.header.params.episode_length = 0;
  log.steps.clear();
  log.header.params.num_players = 1;
  log.header.initial.resize(1);
  for (int t = 0; t < 23; ++t) {
    env::StepRecord r;
    r.step = t;
    r.pos = {{0, 0}};
    r.facing = {env::Facing::kNorth};
    r.action = {0};
    r.reward = {0.0};
    r.cleaned = {1};
    r.apples = {0};
    log.steps.push_back(r);
  }
  const auto bins = contribution_bins(log, 10);
  CHECK(bins[0] == 2.0);
  CHECK(bins[8] == 2.0);
  CHECK(bins[9] == 5.0);
}

TEST_CASE("summarize totals and additivity") {
  const std::vector<std::vector<int>> xs{{2, 3}, {1, 3}, {1, 2}, {0, 2}};
  const std::vector<std::vector<int>> cleaned{{0, 0}, {3, 0}, {1, 0}};
  env::EpisodeLog log = corridor_log(xs, cleaned);
  log.steps[0].reward = {1.0, -1.0};
  log.steps[2].reward = {0.0, 2.0};
  log.steps[1].apples = {0, 1};
  log.steps[2].apples = {0, 1};
  const EpisodeMetrics m = summarize(log);
  CHECK(m.contribution_level == 2);
  CHECK(m.contributions == std::vector<int>{2, 0});
  CHECK(m.returns == std::vector<double>{1.0, 1.0});
  CHECK(m.collective_return == 2.0);
  CHECK(m.apples == std::vector<int>{0, 2});
  CHECK(m.turn_taking.has_value());

  log.steps.pop_back();
  CHECK_THROWS_AS(summarize(log), ParseError);
}

TEST_CASE("a log where nobody cleans has no contributions and undefined consistency") {
  Rng rng(11);
  env::EpisodeLog log = oracle::random_small_log(rng);
  for (auto& r : log.steps) std::fill(r.cleaned.begin(), r.cleaned.end(), 0);
  const EpisodeMetrics m = summarize(log);
  CHECK(m.contribution_level == 0);
  CHECK_FALSE(m.consistency.has_value());
  CHECK_FALSE(m.turn_taking.has_value());
}

TEST_CASE("metrics are invariant under relabeling players") {
  Rng rng(13);
  for (int k = 0; k < 50; ++k) {
    env::EpisodeLog log = oracle::random_small_log(rng);
    const int n = log.num_players();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    env::EpisodeLog relabeled = log;
    for (int i = 0; i < n; ++i) relabeled.header.initial[perm[i]] = log.header.initial[i];
    for (std::size_t t = 0; t < log.steps.size(); ++t) {
      for (int i = 0; i < n; ++i) {
        relabeled.steps[t].pos[perm[i]] = log.steps[t].pos[i];
        relabeled.steps[t].cleaned[perm[i]] = log.steps[t].cleaned[i];
        relabeled.steps[t].reward[perm[i]] = log.steps[t].reward[i];
      }
    }
    const EpisodeMetrics a = summarize(log), b = summarize(relabeled);
    CHECK(a.territoriality == b.territoriality);
    CHECK(a.consistency == b.consistency);
    CHECK(a.contribution_level == b.contribution_level);
    // Same-step entries are ordered by index, so exact equality of the
    // sequence is not implied; the score is compared only when no two
    // players enter on the same step.
    const auto ta = river_turns(log), tb = river_turns(relabeled);
    CHECK(ta.size() == tb.size());
  }
}

TEST_CASE("csv round trip keeps every field including NA sentinels") {
  Rng rng(17);
  std::vector<EpisodeMetrics> rows;
  for (int k = 0; k < 20; ++k) {
    env::EpisodeLog log = oracle::random_small_log(rng);
    log.header.group_id = k;
    log.header.condition = k % 2 ? Condition::kAnonymous : Condition::kIdentifiable;
    rows.push_back(summarize(log, {}, "run" + std::to_string(k % 3)));
  }
  rows[0].territoriality.reset();
  rows[1].intrinsic = {0.25, -1.5};
  std::stringstream ss;
  write_csv(ss, rows);
  const auto back = read_csv(ss);
  REQUIRE(back.size() == rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) CHECK(back[k] == rows[k]);

  std::stringstream bad("# something else\n");
  CHECK_THROWS_AS(read_csv(bad), ParseError);
}
