#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "cpmoe/resampling.hpp"

using namespace cpmoe;
using fixtures::example;

namespace {

struct Counts {
  std::size_t evol = 0, noevol = 0, synthetic = 0;
};

Counts count(const std::vector<LearningExample>& xs) {
  Counts c;
  for (const auto& x : xs) {
    (x.label == Label::Evol ? c.evol : c.noevol) += 1;
    c.synthetic += x.synthetic;
  }
  return c;
}

std::vector<LearningExample> imbalanced(std::size_t n_noevol, std::size_t n_evol, std::uint64_t seed) {
  return fixtures::blobs(n_evol, n_noevol, 3, 0.5, seed);
}

}  // namespace

TEST_CASE("60/40 then SMOTE on the reference cohort counts") {
  const auto xs = imbalanced(2750, 594, 1);
  CHECK(undersample_target(594, RebalancePlan{}) == 891);
  const auto out = rebalance(xs, RebalancePlan{});
  const auto c = count(out);
  CHECK(c.noevol == 891);
  CHECK(c.evol == 891);
  CHECK(c.synthetic == 891 - 594);
}

TEST_CASE("no undersampling when the majority is already within 60/40") {
  const auto out = rebalance(imbalanced(10, 9, 2), RebalancePlan{});
  const auto c = count(out);
  CHECK(c.noevol == 10);
  CHECK(c.evol == 10);
  CHECK(c.synthetic == 1);
}

TEST_CASE("the minority class may be NoEvol") {
  const auto out = rebalance(imbalanced(50, 200, 3), RebalancePlan{});
  const auto c = count(out);
  CHECK(c.evol == 75);
  CHECK(c.noevol == 75);
  for (const auto& x : out)
    if (x.synthetic) CHECK(x.label == Label::NoEvol);
}

TEST_CASE("SMOTE only synthesizes minority points") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto out = rebalance(imbalanced(300 + seed, 40 + seed, seed), RebalancePlan{.seed = seed});
    for (const auto& x : out)
      if (x.synthetic) CHECK(x.label == Label::Evol);
  }
}

TEST_CASE("random_undersample") {
  const auto xs = imbalanced(100, 20, 4);
  const auto same = random_undersample(xs, 100, 9);
  REQUIRE(same.size() == xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(same[i].features == xs[i].features);

  const auto a = random_undersample(xs, 30, 1);
  const auto b = random_undersample(xs, 30, 2);
  CHECK(count(a).noevol == 30);
  CHECK(count(b).noevol == 30);
  CHECK(count(a).evol == 20);
  std::set<std::vector<double>> sa, sb;
  for (const auto& x : a) sa.insert(x.features);
  for (const auto& x : b) sb.insert(x.features);
  CHECK(sa != sb);
  CHECK(sa.size() == 50);

  CHECK_THROWS_AS(random_undersample(xs, 101, 1), ConfigError);
}

TEST_CASE("SMOTE interpolates along the segment") {
  const std::vector<LearningExample> two{example({0, 0}, Label::Evol), example({1, 1}, Label::Evol)};
  const auto s = smote(two, 3, 1, 5);
  REQUIRE(s.size() == 1);
  CHECK(s[0].features[0] == s[0].features[1]);
  CHECK(s[0].features[0] > 0.0);
  CHECK(s[0].features[0] < 1.0);
  CHECK(s[0].synthetic);
  CHECK(s[0].label == Label::Evol);

  CHECK_THROWS_AS(smote(std::vector<LearningExample>{two[0]}, 3, 1, 5), DataError);
  CHECK(smote(two, 2, 1, 5).empty());
}

TEST_CASE("SMOTE points stay inside the minority convex hull") {
  Rng rng(2024);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  std::uniform_int_distribution<std::size_t> size(3, 25);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LearningExample> minority;
    std::vector<oracles::Point> pts;
    const std::size_t n = size(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const oracles::Point p{coord(rng), coord(rng) * (trial % 4 == 0 ? 0.01 : 1.0)};
      pts.push_back(p);
      minority.push_back(example({p[0], p[1]}, Label::Evol));
    }
    const auto hull = oracles::convex_hull(pts);
    const auto synth = smote(minority, 3 * n, 1 + trial % 6, trial);
    CHECK(synth.size() == 2 * n);
    for (const auto& s : synth) CHECK(oracles::inside_hull(hull, {s.features[0], s.features[1]}, 1e-9));
  }
}

TEST_CASE("resampling is deterministic per seed") {
  const auto xs = imbalanced(400, 70, 6);
  const auto a = rebalance(xs, RebalancePlan{.seed = 3});
  const auto b = rebalance(xs, RebalancePlan{.seed = 3});
  const auto c = rebalance(xs, RebalancePlan{.seed = 4});
  REQUIRE(a.size() == b.size());
  bool same_as_c = a.size() == c.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features == b[i].features);
    if (same_as_c) same_as_c = a[i].features == c[i].features;
  }
  CHECK_FALSE(same_as_c);
}

TEST_CASE("rebalance refuses bad plans and held-out rows") {
  auto xs = imbalanced(40, 10, 7);
  CHECK_THROWS_AS(rebalance(xs, RebalancePlan{.majority_share = 30, .minority_share = 70}), ConfigError);
  CHECK_THROWS_AS(rebalance(xs, RebalancePlan{.smote_k = 0}), ConfigError);
  CHECK_THROWS_AS(rebalance(imbalanced(40, 0, 7), RebalancePlan{}), DataError);
  xs[5].split = SplitTag::Test;
  CHECK_THROWS_AS(rebalance(xs, RebalancePlan{}), InvariantError);
}
