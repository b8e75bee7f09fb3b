#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cpmoe/core.hpp"
#include "cpmoe/random.hpp"

namespace fixtures {

using cpmoe::Label;
using cpmoe::LearningExample;

inline LearningExample example(std::vector<double> x, Label y, cpmoe::SplitTag tag = cpmoe::SplitTag::Unassigned) {
  LearningExample ex;
  ex.features = std::move(x);
  ex.label = y;
  ex.split = tag;
  return ex;
}

/// Isotropic Gaussian blobs: Evol centred at +shift on every axis, NoEvol at -shift.
inline std::vector<LearningExample> blobs(std::size_t n_evol, std::size_t n_noevol, std::size_t dim, double shift,
                                          std::uint64_t seed, double sd = 1.0) {
  cpmoe::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<LearningExample> out;
  for (std::size_t i = 0; i < n_evol + n_noevol; ++i) {
    const bool evol = i < n_evol;
    std::vector<double> x(dim);
    for (auto& v : x) v = (evol ? shift : -shift) + normal(rng);
    out.push_back(example(std::move(x), evol ? Label::Evol : Label::NoEvol));
  }
  return out;
}

/// Exchangeable draws from a fixed noisy logistic model over `dim` features, of which
/// only the first `informative` carry signal. About `evol_rate` of the labels are Evol.
inline std::vector<LearningExample> noisy_linear(std::size_t n, std::size_t dim, std::size_t informative,
                                                 double evol_rate, std::uint64_t seed) {
  cpmoe::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double intercept = std::log(evol_rate / (1.0 - evol_rate)) - 0.6;
  std::vector<LearningExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    double logit = intercept;
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = normal(rng);
      if (j < informative) logit += 1.2 * x[j];
    }
    const bool evol = unit(rng) < 1.0 / (1.0 + std::exp(-logit));
    out.push_back(example(std::move(x), evol ? Label::Evol : Label::NoEvol));
  }
  return out;
}

inline std::vector<Label> labels(const std::vector<LearningExample>& xs) {
  std::vector<Label> out;
  for (const auto& x : xs) out.push_back(x.label);
  return out;
}

}  // namespace fixtures
