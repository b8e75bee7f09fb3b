#include "cpmoe/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpmoe/audit.hpp"
#include "cpmoe/random.hpp"

namespace cpmoe {
namespace {

struct ClassCounts {
  std::size_t evol = 0, noevol = 0;
  Label majority() const { return evol > noevol ? Label::Evol : Label::NoEvol; }
  std::size_t of(Label l) const { return l == Label::Evol ? evol : noevol; }
};

ClassCounts count(std::span<const LearningExample> examples) {
  ClassCounts c;
  for (const auto& ex : examples) (ex.label == Label::Evol ? c.evol : c.noevol)++;
  return c;
}

}  // namespace

void RebalancePlan::validate() const {
  if (majority_share <= 0 || minority_share <= 0 || majority_share < minority_share)
    throw ConfigError("rebalance: shares must be positive with majority >= minority");
  if (smote_k < 1) throw ConfigError("rebalance: smote_k must be >= 1");
}

std::size_t undersample_target(std::size_t minority_count, const RebalancePlan& plan) {
  const auto maj = static_cast<std::size_t>(plan.majority_share);
  const auto min = static_cast<std::size_t>(plan.minority_share);
  return (minority_count * maj + min - 1) / min;
}

std::vector<LearningExample> random_undersample(std::span<const LearningExample> examples,
                                                std::size_t target_majority_count, std::uint64_t seed) {
  audit::require_fit_input(examples, "random_undersample");
  const auto counts = count(examples);
  const Label majority = counts.majority();
  if (target_majority_count > counts.of(majority))
    throw ConfigError("random_undersample: target " + std::to_string(target_majority_count) + " exceeds the " +
                      std::to_string(counts.of(majority)) + " majority examples");

  std::vector<std::size_t> majority_idx;
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (examples[i].label == majority) majority_idx.push_back(i);
  Rng rng(seed);
  std::shuffle(majority_idx.begin(), majority_idx.end(), rng);
  majority_idx.resize(target_majority_count);

  std::vector<bool> keep(examples.size(), false);
  for (std::size_t i = 0; i < examples.size(); ++i) keep[i] = examples[i].label != majority;
  for (auto i : majority_idx) keep[i] = true;
  std::vector<LearningExample> out;
  out.reserve(counts.of(other(majority)) + target_majority_count);
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (keep[i]) out.push_back(examples[i]);
  return out;
}

std::vector<LearningExample> smote(std::span<const LearningExample> minority, std::size_t target_count, std::size_t k,
                                   std::uint64_t seed) {
  audit::require_fit_input(minority, "smote");
  const std::size_t n = minority.size();
  if (n < 2) throw DataError("smote: need at least 2 minority examples, got " + std::to_string(n));
  if (k < 1) throw ConfigError("smote: k must be >= 1");
  for (const auto& ex : minority)
    if (ex.label != minority.front().label) throw InvariantError("smote: input mixes classes");
  if (target_count <= n) return {};
  k = std::min(k, n - 1);

  const std::size_t d = minority.front().features.size();
  std::vector<double> scale(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, var = 0.0;
    for (const auto& ex : minority) mean += ex.features[j];
    mean /= static_cast<double>(n);
    for (const auto& ex : minority) var += (ex.features[j] - mean) * (ex.features[j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 1e-12) scale[j] = sd;
  }
  auto distance2 = [&](const LearningExample& a, const LearningExample& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = (a.features[j] - b.features[j]) / scale[j];
      s += r * r;
    }
    return s;
  };

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist.emplace_back(distance2(minority[i], minority[j]), j);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t t = 0; t < k; ++t) neighbours[i].push_back(dist[t].second);
  }

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_point(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_neighbour(0, k - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LearningExample> out;
  out.reserve(target_count - n);
  while (n + out.size() < target_count) {
    const auto& x = minority[pick_point(rng)];
    const auto& z = minority[neighbours[static_cast<std::size_t>(&x - minority.data())][pick_neighbour(rng)]];
    double u = 0.0;
    while (u <= 0.0) u = unit(rng);  // open interval (0, 1)
    LearningExample s = x;
    for (std::size_t j = 0; j < d; ++j) s.features[j] = x.features[j] + u * (z.features[j] - x.features[j]);
    s.synthetic = true;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LearningExample> rebalance(std::span<const LearningExample> examples, const RebalancePlan& plan) {
  plan.validate();
  audit::require_fit_input(examples, "rebalance");
  const auto counts = count(examples);
  if (counts.evol == 0 || counts.noevol == 0) throw DataError("rebalance: both classes must be present");
  const Label majority = counts.majority();
  const Label minority = other(majority);
  const std::size_t n_min = counts.of(minority);

  std::vector<LearningExample> out;
  const std::size_t target = undersample_target(n_min, plan);
  if (counts.of(majority) > target)
    out = random_undersample(examples, target, derive_seed(plan.seed, {1u}));
  else
    out.assign(examples.begin(), examples.end());

  std::size_t n_maj = 0;
  std::vector<LearningExample> minority_rows;
  for (const auto& ex : out) {
    if (ex.label == minority)
      minority_rows.push_back(ex);
    else
      ++n_maj;
  }
  auto synthetic = smote(minority_rows, n_maj, plan.smote_k, derive_seed(plan.seed, {2u}));
  for (auto& s : synthetic) {
    if (s.label != minority) throw InvariantError("rebalance: synthetic point of the majority class");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cpmoe
