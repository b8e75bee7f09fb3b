#include "cpmoe/conformal.hpp"

#include <algorithm>

#include "cpmoe/audit.hpp"
#include "cpmoe/metrics.hpp"
#include "cpmoe/parallel.hpp"
#include "cpmoe/random.hpp"

namespace cpmoe {

double nonconformity(const TrainedModel& model, std::span<const double> x, Label hypothesis) {
  return -static_cast<double>(sign_of(hypothesis)) * decision_score(model, x);
}

double p_value(std::span<const double> calibration, double alpha) {
  if (calibration.empty()) throw InvariantError("p_value: empty calibration list");
  const auto at_least = std::count_if(calibration.begin(), calibration.end(), [&](double a) { return a >= alpha; });
  return static_cast<double>(at_least + 1) / static_cast<double>(calibration.size() + 1);
}

double FoldModel::nonconformity(std::span<const double> x, Label hypothesis) const {
  if (features.empty()) return cpmoe::nonconformity(model, x, hypothesis);
  return cpmoe::nonconformity(model, project(x, features), hypothesis);
}

std::size_t FoldModel::count_at_least(double alpha) const {
  auto it = std::lower_bound(calibration.begin(), calibration.end(), alpha,
                             [](const CalibrationScore& s, double a) { return s.alpha < a; });
  return static_cast<std::size_t>(calibration.end() - it);
}

std::size_t CcpModel::calibration_size() const {
  std::size_t n = 0;
  for (const auto& f : folds) n += f.calibration.size();
  return n;
}

namespace {

std::vector<std::size_t> usable_grid(const SelectionConfig& selection, std::size_t dim) {
  std::vector<std::size_t> grid;
  for (auto k : selection.k_grid)
    if (k >= 1 && k <= dim) grid.push_back(k);
  if (grid.empty()) grid.push_back(dim);
  return grid;
}

}  // namespace

CcpModel ccp_fit(const ClassifierSpec& spec, std::span<const LearningExample> examples, const CcpOptions& options) {
  spec.validate();
  if (options.k < 2) throw ConfigError("cross-conformal k must be >= 2");
  if (options.rebalance) options.rebalance->validate();
  if (examples.empty()) throw DataError("ccp_fit: no training examples");
  audit::require_fit_input(examples, "ccp_fit");

  const std::string window_name(to_string(options.window));
  const auto labels = labels_of(examples);
  for (Label c : {Label::Evol, Label::NoEvol}) {
    const auto n = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
    if (n < options.k)
      throw DataError("window " + window_name + ": class " + std::string(to_string(c)) + " has " +
                      std::to_string(n) + " examples, fewer than k=" + std::to_string(options.k) +
                      " cross-conformal folds; lower k or supply more data");
  }
  const auto fold_of = stratified_kfold(labels, options.k, derive_seed(options.seed, {0xF01D}));

  CcpModel ccp;
  ccp.window = options.window;
  ccp.spec = spec;
  ccp.input_dim = examples.front().features.size();
  ccp.folds.resize(options.k);

  parallel_for(options.k, [&](std::size_t f) {
    std::vector<LearningExample> proper, calibration;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto& dest = fold_of[i] == f ? calibration : proper;
      dest.push_back(examples[i]);
      dest.back().split = fold_of[i] == f ? SplitTag::Calibration : SplitTag::ProperTrain;
    }
    const auto proper_labels = labels_of(proper);
    if (std::count(proper_labels.begin(), proper_labels.end(), Label::Evol) == 0 ||
        std::count(proper_labels.begin(), proper_labels.end(), Label::NoEvol) == 0)
      throw DataError("window " + window_name + ": fold " + std::to_string(f) +
                      " has a single-class proper-training set; try another seed or k");

    // Everything fitted below sees the proper-training rows only.
    if (options.rebalance) {
      RebalancePlan plan = *options.rebalance;
      plan.seed = derive_seed(options.seed, {0x5A3B, plan.seed, f});
      proper = rebalance(proper, plan);
    }

    FoldModel& fm = ccp.folds[f];
    std::span<const LearningExample> fit_rows = proper;
    std::vector<LearningExample> projected;
    if (!options.selection.k_grid.empty() && ccp.input_dim >= 2) {
      const auto ranking = rank_features(proper);
      const auto grid = usable_grid(options.selection, ccp.input_dim);
      fm.features = select_top_k(proper, ranking, grid, options.selection.folds,
                                 derive_seed(options.seed, {0x5E1E, f}), spec)
                        .features;
      projected = project(proper, fm.features);
      fit_rows = projected;
    }
    fm.model = train(spec, fit_rows);

    fm.calibration.reserve(calibration.size());
    for (const auto& ex : calibration) fm.calibration.push_back({fm.nonconformity(ex.features, ex.label), ex.label});
    std::stable_sort(fm.calibration.begin(), fm.calibration.end(),
                     [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  });
  return ccp;
}

PValues ccp_p_values(const CcpModel& ccp, std::span<const double> x) {
  if (ccp.folds.empty()) throw InvariantError("ccp_p_values: model has no folds");
  if (x.size() != ccp.input_dim)
    throw DataError("ccp_p_values: input has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(ccp.input_dim));
  std::size_t evol = 0, noevol = 0;
  for (const auto& f : ccp.folds) {
    // Alphas are antisymmetric in the label, so one score serves both hypotheses.
    const double a_evol = f.nonconformity(x, Label::Evol);
    evol += f.count_at_least(a_evol);
    noevol += f.count_at_least(-a_evol);
  }
  const double denom = static_cast<double>(ccp.calibration_size() + 1);
  return {static_cast<double>(evol + 1) / denom, static_cast<double>(noevol + 1) / denom};
}

ForcedPrediction forced_prediction(const PValues& p) {
  const Label label = p.p_evol >= p.p_noevol ? Label::Evol : Label::NoEvol;
  return {label, std::max(p.p_evol, p.p_noevol), 1.0 - std::min(p.p_evol, p.p_noevol)};
}

LabelSet prediction_region(const PValues& p, double epsilon) {
  return {p.p_evol > epsilon, p.p_noevol > epsilon};
}

}  // namespace cpmoe
