#include "cpmoe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "cpmoe/csv.hpp"
#include "cpmoe/metrics.hpp"
#include "cpmoe/moe.hpp"
#include "cpmoe/random.hpp"

namespace cpmoe {

void EvalConfig::validate() const {
  if (outer_folds < 2) throw ConfigError("outer_folds must be >= 2");
  if (inner_folds < 2) throw ConfigError("inner_folds must be >= 2");
  if (!std::is_sorted(taus.begin(), taus.end())) throw ConfigError("taus must be sorted ascending");
  for (double t : taus)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("taus must lie in [0, 1]");
  for (double e : epsilons)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilons must lie in (0, 1)");
  classifier.validate();
  if (rebalance) rebalance->validate();
  if (!selection.k_grid.empty() && selection.folds < 2) throw ConfigError("selection folds must be >= 2");
}

double MoeRow::misclassification_fraction() const {
  return predictions ? static_cast<double>(misclassifications) / static_cast<double>(predictions) : 0.0;
}

double MoeRow::prediction_fraction() const {
  return total ? static_cast<double>(predictions) / static_cast<double>(total) : 0.0;
}

std::string tau_label(const std::optional<double>& tau) {
  return tau ? csv::fixed(*tau, 2) : std::string("All");
}

namespace {

// One outer-test example as seen by a window expert.
struct Scored {
  std::size_t fold = 0;
  Label truth = Label::NoEvol;
  double p_evol = 0.0;
  PValues p;
  ForcedPrediction forced;
  double standard_score = 0.0;
};

// The expert trace of one outer-test snapshot, repeated for each window it is labeled in.
struct MoePair {
  std::array<ExpertPrediction, kWindowCount> experts;
  std::array<std::optional<Label>, kWindowCount> truths;
};

struct FoldOutput {
  std::array<std::vector<Scored>, kWindowCount> scored;
  std::vector<MoePair> pairs;
  std::vector<FoldSelection> selections;
  std::vector<std::string> warnings;
};

int stratum(const std::array<std::optional<Label>, kWindowCount>& truths) {
  int key = 0;
  for (std::size_t w = 0; w < kWindowCount; ++w) {
    const int code = !truths[w] ? 0 : *truths[w] == Label::Evol ? 2 : 1;
    key = key * 3 + code;
  }
  return key;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return v.empty() ? std::nullopt : std::optional<double>(0.0);
  const double m = *mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

bool both_classes(std::span<const Label> labels) {
  return std::count(labels.begin(), labels.end(), Label::Evol) > 0 &&
         std::count(labels.begin(), labels.end(), Label::NoEvol) > 0;
}

// Per-fold AUC over the rows passing `keep`; folds whose subset lacks a class are skipped.
template <class Score, class Keep>
MetricRow metric_row(const std::vector<Scored>& rows, std::size_t folds, std::optional<double> tau, Score score,
                     Keep keep, Label (*predicted)(const Scored&)) {
  MetricRow row;
  row.tau = tau;
  std::vector<double> aucs;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> s;
    std::vector<Label> l;
    for (const auto& r : rows)
      if (r.fold == f && keep(r)) {
        s.push_back(score(r));
        l.push_back(r.truth);
      }
    if (both_classes(l)) aucs.push_back(auc(s, l));
  }
  row.auc_mean = mean_of(aucs);
  row.auc_sd = sd_of(aucs);
  std::vector<Label> preds, truths;
  for (const auto& r : rows)
    if (keep(r)) {
      preds.push_back(predicted(r));
      truths.push_back(r.truth);
    }
  const auto ss = sens_spec(preds, truths);
  row.sens = ss.sensitivity;
  row.spec = ss.specificity;
  row.coverage = rows.empty() ? 0.0 : static_cast<double>(preds.size()) / static_cast<double>(rows.size());
  return row;
}

Label forced_label(const Scored& r) { return r.forced.label; }
Label standard_label(const Scored& r) { return r.standard_score >= 0.0 ? Label::Evol : Label::NoEvol; }

// A made prediction is right when the asserted window's truth agrees with it.
enum class Verdict { Right, Wrong, Abstain };

Verdict judge(const MoeDecision& d, const std::array<std::optional<Label>, kWindowCount>& truths) {
  if (d.outcome == Outcome::NoPrediction) return Verdict::Abstain;
  const auto truth = truths[index_of(*d.expert)];
  const Label asserted = d.outcome == Outcome::NoEvol ? Label::NoEvol : Label::Evol;
  return truth && *truth == asserted ? Verdict::Right : Verdict::Wrong;
}

MoeRow moe_row(const std::vector<MoePair>& pairs, std::optional<double> tau) {
  MoeRow row;
  row.tau = tau;
  row.total = pairs.size();
  for (const auto& pair : pairs) {
    const auto d = aggregate(pair.experts, tau.value_or(0.0));
    switch (judge(d, pair.truths)) {
      case Verdict::Abstain: continue;
      case Verdict::Right: ++(d.outcome == Outcome::NoEvol ? row.noevol_as_noevol : row.evol_as_evol); break;
      case Verdict::Wrong: ++row.misclassifications; break;
    }
    ++row.predictions;
  }
  return row;
}

FoldOutput run_outer_fold(const SnapshotTable& table, const EvalConfig& config, std::span<const std::size_t> fold_of,
                          std::size_t fold, const std::vector<std::array<std::optional<Label>, kWindowCount>>& truths) {
  FoldOutput out;
  SnapshotTable tagged = table;
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < tagged.rows.size(); ++i) {
    const bool test = fold_of[i] == fold;
    tagged.rows[i].split = test ? SplitTag::Test : SplitTag::Train;
    (test ? test_rows : train_rows).push_back(i);
  }

  const Imputer imputer = Imputer::fit(tagged, train_rows, &out.warnings);
  const auto encoded = imputer.encoded_names();

  std::vector<CcpModel> experts;
  for (const auto& window : kWindows) {
    const std::size_t w = index_of(window.id);
    const auto train_ex = make_examples(tagged, imputer, window.id, train_rows, SplitTag::Train);
    const auto test_ex = make_examples(tagged, imputer, window.id, test_rows, SplitTag::Test);

    std::optional<RebalancePlan> plan = config.rebalance;
    if (plan) plan->seed = derive_seed(config.seed, {0xBA1A, fold, w, plan->seed});
    std::vector<LearningExample> baseline_train;
    if (config.leak_test_into_rebalance) {
      std::vector<LearningExample> leaked = train_ex;
      leaked.insert(leaked.end(), test_ex.begin(), test_ex.end());
      baseline_train = rebalance(leaked, plan.value_or(RebalancePlan{}));
    } else {
      baseline_train = plan ? rebalance(train_ex, *plan) : train_ex;
    }

    CcpOptions opts;
    opts.k = config.inner_folds;
    opts.seed = derive_seed(config.seed, {0xCC9, fold, w});
    opts.rebalance = config.rebalance;
    opts.selection = config.selection;
    opts.window = window.id;
    CcpModel ccp = ccp_fit(config.classifier, train_ex, opts);
    ccp.feature_names = encoded;

    FoldSelection sel{fold, window.id, {}};
    for (const auto& fm : ccp.folds) {
      std::vector<std::string> names;
      if (fm.features.empty()) names = encoded;
      for (auto j : fm.features) names.push_back(encoded[j]);
      sel.features.push_back(std::move(names));
    }
    out.selections.push_back(std::move(sel));

    // Bare classifier on the same rebalanced outer-train, with the same selection step.
    std::vector<std::size_t> base_features;
    std::span<const LearningExample> base_rows = baseline_train;
    std::vector<LearningExample> projected;
    if (!config.selection.k_grid.empty() && encoded.size() >= 2) {
      std::vector<std::size_t> grid;
      for (auto k : config.selection.k_grid)
        if (k >= 1 && k <= encoded.size()) grid.push_back(k);
      if (grid.empty()) grid.push_back(encoded.size());
      base_features = select_top_k(baseline_train, rank_features(baseline_train), grid, config.selection.folds,
                                   derive_seed(config.seed, {0x57D, fold, w}), config.classifier)
                          .features;
      projected = project(baseline_train, base_features);
      base_rows = projected;
    }
    const auto baseline = train(config.classifier, base_rows);

    for (const auto& ex : test_ex) {
      Scored s;
      s.fold = fold;
      s.truth = ex.label;
      s.p = ccp_p_values(ccp, ex.features);
      s.p_evol = s.p.p_evol;
      s.forced = forced_prediction(s.p);
      s.standard_score = base_features.empty() ? decision_score(baseline, ex.features)
                                               : decision_score(baseline, project(ex.features, base_features));
      out.scored[w].push_back(s);
    }
    experts.push_back(std::move(ccp));
  }

  for (auto i : test_rows) {
    const auto x = imputer.transform(tagged.rows[i]);
    const auto prediction = predict_patient(experts, x, 0.0);
    for (std::size_t w = 0; w < kWindowCount; ++w) {
      if (!truths[i][w]) continue;
      out.pairs.push_back({prediction.experts, truths[i]});
    }
  }
  return out;
}

}  // namespace

EvaluationResult evaluate(const SnapshotTable& table, const EvalConfig& config) {
  config.validate();
  if (table.rows.empty()) throw DataError("evaluate: no snapshots");

  EvaluationResult result;
  std::vector<std::array<std::optional<Label>, kWindowCount>> truths(table.rows.size());
  std::vector<int> strata(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (const auto& window : kWindows) {
      const auto label = label_for_window(table.rows[i], window);
      truths[i][index_of(window.id)] = label;
      if (label) ++(*label == Label::Evol ? result.evol_counts : result.noevol_counts)[index_of(window.id)];
    }
    strata[i] = stratum(truths[i]);
  }
  for (const auto& window : kWindows) {
    const std::size_t w = index_of(window.id);
    if (result.evol_counts[w] == 0 || result.noevol_counts[w] == 0)
      throw DataError("window " + std::string(to_string(window.id)) + " lacks " +
                      (result.evol_counts[w] == 0 ? "Evol" : "NoEvol") + " examples");
  }

  // Folds are drawn over snapshots, so a snapshot is test data for every window at once.
  const auto fold_of = stratified_assign(strata, config.outer_folds, derive_seed(config.seed, {0x0E7E}));

  std::array<std::vector<Scored>, kWindowCount> scored;
  std::vector<MoePair> pairs;
  for (std::size_t f = 0; f < config.outer_folds; ++f) {
    auto out = run_outer_fold(table, config, fold_of, f, truths);
    for (std::size_t w = 0; w < kWindowCount; ++w)
      scored[w].insert(scored[w].end(), out.scored[w].begin(), out.scored[w].end());
    pairs.insert(pairs.end(), out.pairs.begin(), out.pairs.end());
    for (auto& s : out.selections) result.selections.push_back(std::move(s));
    for (auto& msg : out.warnings) {
      msg = "outer fold " + std::to_string(f) + ": " + msg;
      result.warnings.push_back(std::move(msg));
    }
  }

  for (const auto& window : kWindows) {
    const std::size_t w = index_of(window.id);
    const auto& rows = scored[w];
    auto& report = result.windows[w];
    report.window = window.id;
    auto p_evol = [](const Scored& r) { return r.p_evol; };
    report.rows.push_back(metric_row(rows, config.outer_folds, std::nullopt, p_evol,
                                     [](const Scored&) { return true; }, forced_label));
    for (double tau : config.taus)
      report.rows.push_back(metric_row(rows, config.outer_folds, tau, p_evol,
                                       [tau](const Scored& r) { return r.forced.credibility >= tau; }, forced_label));

    result.standard[w].window = window.id;
    result.standard[w].rows.push_back(metric_row(rows, config.outer_folds, std::nullopt,
                                                 [](const Scored& r) { return r.standard_score; },
                                                 [](const Scored&) { return true; }, standard_label));

    for (double eps : config.epsilons) {
      ValidityRow v{window.id, eps, 0.0, rows.size()};
      std::size_t errors = 0;
      for (const auto& r : rows) errors += !prediction_region(r.p, eps).contains(r.truth);
      v.error_rate = rows.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(rows.size());
      result.validity.push_back(v);
    }
  }

  result.moe.rows.push_back(moe_row(pairs, std::nullopt));
  for (double tau : config.taus) result.moe.rows.push_back(moe_row(pairs, tau));
  return result;
}

WindowEvaluation evaluate_windows(const SnapshotTable& table, const EvalConfig& config) {
  auto r = evaluate(table, config);
  return {std::move(r.windows), std::move(r.standard)};
}

MoeReport evaluate_moe(const SnapshotTable& table, const EvalConfig& config) {
  return evaluate(table, config).moe;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? csv::fixed(*v, 4) : std::string(); }

}  // namespace

void write_window_report_csv(std::ostream& os, std::span<const WindowReport> reports) {
  csv::write_row(os, {"window", "tau", "auc_mean", "auc_sd", "sens", "spec", "coverage"});
  for (const auto& report : reports)
    for (const auto& row : report.rows)
      csv::write_row(os, {std::string(to_string(report.window)), tau_label(row.tau), cell(row.auc_mean),
                          cell(row.auc_sd), cell(row.sens), cell(row.spec), csv::fixed(row.coverage, 4)});
}

void write_moe_report_csv(std::ostream& os, const MoeReport& report) {
  csv::write_row(os, {"tau", "evol_as_evol", "noevol_as_noevol", "misclassifications", "misclassification_pct",
                      "prediction_pct", "predictions", "total"});
  for (const auto& row : report.rows)
    csv::write_row(os, {tau_label(row.tau), std::to_string(row.evol_as_evol), std::to_string(row.noevol_as_noevol),
                        std::to_string(row.misclassifications), csv::fixed(100.0 * row.misclassification_fraction(), 2),
                        csv::fixed(100.0 * row.prediction_fraction(), 2), std::to_string(row.predictions),
                        std::to_string(row.total)});
}

void write_validity_csv(std::ostream& os, std::span<const ValidityRow> rows) {
  csv::write_row(os, {"window", "epsilon", "error_rate", "n"});
  for (const auto& row : rows)
    csv::write_row(os, {std::string(to_string(row.window)), csv::fixed(row.epsilon, 2), csv::fixed(row.error_rate, 4),
                        std::to_string(row.n)});
}

std::string summary_json(const EvaluationResult& result, const EvalConfig& config) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json j;
  j["config"] = {{"outer_folds", config.outer_folds},
                 {"inner_folds", config.inner_folds},
                 {"taus", config.taus},
                 {"epsilons", config.epsilons},
                 {"seed", config.seed},
                 {"classifier", std::string(to_string(config.classifier.kind))},
                 {"rebalance", config.rebalance.has_value()},
                 {"selection_k_grid", config.selection.k_grid}};
  for (const auto& window : kWindows) {
    const std::size_t w = index_of(window.id);
    ordered_json win;
    win["evol"] = result.evol_counts[w];
    win["noevol"] = result.noevol_counts[w];
    for (const auto& row : result.windows[w].rows)
      win["conformal"].push_back({{"tau", tau_label(row.tau)},
                                  {"auc_mean", opt(row.auc_mean)},
                                  {"auc_sd", opt(row.auc_sd)},
                                  {"sens", opt(row.sens)},
                                  {"spec", opt(row.spec)},
                                  {"coverage", row.coverage}});
    const auto& base = result.standard[w].rows.front();
    win["standard"] = {{"auc_mean", opt(base.auc_mean)}, {"auc_sd", opt(base.auc_sd)},
                       {"sens", opt(base.sens)}, {"spec", opt(base.spec)}};
    j["windows"][std::string(to_string(window.id))] = std::move(win);
  }
  for (const auto& row : result.moe.rows)
    j["moe"].push_back({{"tau", tau_label(row.tau)},
                        {"evol_as_evol", row.evol_as_evol},
                        {"noevol_as_noevol", row.noevol_as_noevol},
                        {"misclassifications", row.misclassifications},
                        {"predictions", row.predictions},
                        {"total", row.total}});
  for (const auto& sel : result.selections)
    j["selected_features"].push_back(
        {{"outer_fold", sel.outer_fold}, {"window", std::string(to_string(sel.window))}, {"folds", sel.features}});
  j["warnings"] = result.warnings;
  return j.dump(2) + "\n";
}

}  // namespace cpmoe
