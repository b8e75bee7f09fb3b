#include "cpmoe/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "cpmoe/random.hpp"

namespace cpmoe {

std::vector<std::size_t> stratified_assign(std::span<const int> strata, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("fold count must be >= 1");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < strata.size(); ++i) members[strata[i]].push_back(i);

  std::vector<std::size_t> fold(strata.size(), 0);
  std::size_t position = 0;
  for (auto& [stratum, idx] : members) {
    Rng rng(derive_seed(seed, {0x5712A7u, static_cast<std::uint64_t>(static_cast<std::int64_t>(stratum))}));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) fold[i] = position++ % k;
  }
  return fold;
}

std::vector<std::size_t> stratified_kfold(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
  std::size_t evol = 0;
  for (auto l : labels) evol += l == Label::Evol;
  const std::size_t noevol = labels.size() - evol;
  if (evol < k || noevol < k)
    throw ConfigError("stratified_kfold: " + std::to_string(k) + " folds need at least " + std::to_string(k) +
                      " examples per class, got " + std::to_string(evol) + " Evol and " + std::to_string(noevol) +
                      " NoEvol");
  std::vector<int> strata;
  strata.reserve(labels.size());
  for (auto l : labels) strata.push_back(static_cast<int>(l));
  return stratified_assign(strata, k, seed);
}

std::vector<Label> labels_of(std::span<const LearningExample> examples) {
  std::vector<Label> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.label);
  return out;
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw DataError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, kept integral so the result is exact.
  std::uint64_t twice_u = 0, neg_below = 0, n_pos = 0, n_neg = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t h = g;
    std::uint64_t pos = 0, neg = 0;
    while (h < order.size() && scores[order[h]] == scores[order[g]]) {
      (labels[order[h]] == Label::Evol ? pos : neg)++;
      ++h;
    }
    twice_u += pos * (2 * neg_below + neg);
    neg_below += neg;
    n_pos += pos;
    n_neg += neg;
    g = h;
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes are required");
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SensSpec sens_spec(std::span<const Label> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size()) throw DataError("sens_spec: length mismatch");
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == Label::Evol)
      (predictions[i] == Label::Evol ? tp : fn)++;
    else
      (predictions[i] == Label::NoEvol ? tn : fp)++;
  }
  SensSpec out;
  if (tp + fn > 0) out.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (tn + fp > 0) out.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return out;
}

}  // namespace cpmoe
