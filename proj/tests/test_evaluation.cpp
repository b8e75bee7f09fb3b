#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "cpmoe/audit.hpp"
#include "cpmoe/evaluation.hpp"
#include "cpmoe/metrics.hpp"

using namespace cpmoe;

namespace {

std::vector<Label> make_labels(std::size_t evol, std::size_t noevol) {
  std::vector<Label> out(evol, Label::Evol);
  out.insert(out.end(), noevol, Label::NoEvol);
  return out;
}


EvalConfig small_config() {
  EvalConfig c;
  c.outer_folds = 3;
  c.inner_folds = 3;
  c.seed = 5;
  c.classifier = ClassifierSpec::logistic();
  c.selection = {{4, 8}, 3};
  return c;
}

SnapshotTable cohort_table(std::uint64_t seed, std::size_t n, const SyntheticConfig& cfg = {}) {
  const auto c = generate_synthetic_cohort(seed, n, cfg);
  return build_snapshots(c.events, c.outcomes());
}

std::string reports(const EvaluationResult& r, const EvalConfig& c) {
  std::ostringstream os;
  write_window_report_csv(os, r.windows);
  write_window_report_csv(os, r.standard);
  write_moe_report_csv(os, r.moe);
  write_validity_csv(os, r.validity);
  os << summary_json(r, c);
  return os.str();
}

}  // namespace

TEST_CASE("stratified folds") {
  const auto even = make_labels(10, 10);
  const auto folds = stratified_kfold(even, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t e = 0, n = 0;
    for (std::size_t i = 0; i < even.size(); ++i)
      if (folds[i] == f) (even[i] == Label::Evol ? e : n) += 1;
    CHECK(e == 2);
    CHECK(n == 2);
  }

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 6;
    const std::size_t ne = k + rng() % 40, nn = k + rng() % 40;
    const auto y = make_labels(ne, nn);
    const auto f = stratified_kfold(y, k, trial);
    std::vector<std::size_t> e(k), n(k);
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == Label::Evol ? e : n)[f[i]] += 1;
    CHECK(*std::max_element(e.begin(), e.end()) - *std::min_element(e.begin(), e.end()) <= 1);
    CHECK(*std::max_element(n.begin(), n.end()) - *std::min_element(n.begin(), n.end()) <= 1);
    std::vector<std::size_t> total(k);
    for (std::size_t i = 0; i < k; ++i) total[i] = e[i] + n[i];
    CHECK(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()) <= 1);
    CHECK(f == stratified_kfold(y, k, trial));
  }

  CHECK(stratified_kfold(even, 5, 1) != stratified_kfold(even, 5, 2));
  CHECK_THROWS_AS(stratified_kfold(make_labels(3, 10), 5, 1), ConfigError);

  const std::vector<int> strata{0, 0, 0, 1, 2, 2, 2, 2, 2, 2};
  const auto a = stratified_assign(strata, 3, 4);
  std::vector<std::size_t> sizes(3);
  for (auto f : a) ++sizes[f];
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
}

TEST_CASE("AUC examples") {
  const std::vector<double> ranked{0.9, 0.8, 0.2, 0.1};
  const auto y = std::vector<Label>{Label::Evol, Label::Evol, Label::NoEvol, Label::NoEvol};
  CHECK(auc(ranked, y) == 1.0);
  CHECK(auc(std::vector<double>(4, 0.3), y) == 0.5);
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  CHECK(auc(s, std::vector<Label>{Label::Evol, Label::NoEvol, Label::Evol, Label::NoEvol}) == 0.75);
  CHECK_THROWS_AS(auc(s, std::vector<Label>(4, Label::Evol)), DataError);
}

TEST_CASE("AUC matches the all-pairs count") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> s(n);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are frequent.
      s[i] = static_cast<double>(rng() % (trial % 2 ? 5 : 1000));
      y[i] = rng() % 3 == 0 ? Label::Evol : Label::NoEvol;
    }
    y[0] = Label::Evol;
    y[1] = Label::NoEvol;
    CHECK(auc(s, y) == doctest::Approx(oracles::brute_force_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("sensitivity and specificity") {
  using L = Label;
  auto r = sens_spec(std::vector<L>{L::Evol, L::NoEvol}, std::vector<L>{L::Evol, L::NoEvol});
  CHECK(r.sensitivity == 1.0);
  CHECK(r.specificity == 1.0);

  r = sens_spec(std::vector<L>(4, L::NoEvol), std::vector<L>{L::Evol, L::NoEvol, L::Evol, L::NoEvol});
  CHECK(r.sensitivity == 0.0);
  CHECK(r.specificity == 1.0);

  std::vector<L> pred, truth;
  auto add = [&](L p, L t, int n) { pred.insert(pred.end(), n, p), truth.insert(truth.end(), n, t); };
  add(L::Evol, L::Evol, 3);
  add(L::NoEvol, L::Evol, 1);
  add(L::NoEvol, L::NoEvol, 4);
  add(L::Evol, L::NoEvol, 2);
  r = sens_spec(pred, truth);
  CHECK(*r.sensitivity == doctest::Approx(0.75));
  CHECK(*r.specificity == doctest::Approx(0.667).epsilon(0.001));

  r = sens_spec(std::vector<L>{L::Evol}, std::vector<L>{L::NoEvol});
  CHECK_FALSE(r.sensitivity.has_value());
  CHECK(r.specificity == 0.0);
}

TEST_CASE("a small nested evaluation has the published layout and holds its invariants") {
  const auto table = cohort_table(3, 150);
  const auto config = small_config();
  audit::reset();
  const auto r = evaluate(table, config);
  CHECK(audit::violation_count() == 0);

  for (std::size_t w = 0; w < kWindowCount; ++w) {
    const auto& rows = r.windows[w].rows;
    REQUIRE(rows.size() == 4);
    CHECK(r.windows[w].window == kWindows[w].id);
    CHECK(tau_label(rows[0].tau) == "All");
    CHECK(tau_label(rows[1].tau) == "0.80");
    CHECK(tau_label(rows[2].tau) == "0.90");
    CHECK(tau_label(rows[3].tau) == "0.95");
    CHECK(rows[0].coverage == 1.0);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].coverage <= rows[i - 1].coverage);
    REQUIRE(rows[0].auc_mean.has_value());
    CHECK(*rows[0].auc_mean > 0.6);
    REQUIRE(r.standard[w].rows.size() == 1);
    CHECK(r.standard[w].rows[0].coverage == 1.0);
    CHECK(r.evol_counts[w] > 0);
    CHECK(r.noevol_counts[w] > 0);
  }

  REQUIRE(r.moe.rows.size() == 4);
  const auto total = r.moe.rows[0].total;
  CHECK(total == [&] {
    std::size_t n = 0;
    for (std::size_t w = 0; w < kWindowCount; ++w) n += r.evol_counts[w] + r.noevol_counts[w];
    return n;
  }());
  CHECK(r.moe.rows[0].predictions == total);
  for (std::size_t i = 0; i < r.moe.rows.size(); ++i) {
    const auto& m = r.moe.rows[i];
    CHECK(m.total == total);
    CHECK(m.evol_as_evol + m.noevol_as_noevol + m.misclassifications == m.predictions);
    if (i) CHECK(m.predictions <= r.moe.rows[i - 1].predictions);
  }

  CHECK(r.validity.size() == kWindowCount * config.epsilons.size());
  for (const auto& v : r.validity) {
    CHECK(v.n == r.evol_counts[index_of(v.window)] + r.noevol_counts[index_of(v.window)]);
    CHECK(v.error_rate <= v.epsilon + 0.1);
  }
  CHECK(r.selections.size() == config.outer_folds * kWindowCount);
  for (const auto& s : r.selections) {
    CHECK(s.features.size() == config.inner_folds);
    for (const auto& f : s.features) CHECK((f.size() == 4 || f.size() == 8));
  }
}

TEST_CASE("evaluation is reproducible to the byte") {
  const auto table = cohort_table(4, 100);
  auto config = small_config();
  config.selection.k_grid.clear();
  const auto a = reports(evaluate(table, config), config);
  const auto b = reports(evaluate(table, config), config);
  CHECK(a == b);
  config.seed = 6;
  CHECK(reports(evaluate(table, config), config) != a);
}

TEST_CASE("noise-free cohorts without missing values are almost perfectly ranked") {
  SyntheticConfig exact;
  exact.noise = 0.0;
  exact.missing_rate = 0.0;
  const auto table = cohort_table(5, 300, exact);
  auto config = small_config();
  config.classifier = ClassifierSpec::svm_poly();
  config.selection.k_grid.clear();
  const auto r = evaluate_windows(table, config);
  for (const auto& w : r.conformal) {
    INFO(to_string(w.window));
    CHECK(*w.rows[0].auc_mean >= 0.99);
  }
}

TEST_CASE("report writers") {
  const auto table = cohort_table(6, 80);
  auto config = small_config();
  config.selection.k_grid.clear();
  const auto r = evaluate(table, config);
  std::ostringstream w, m, v;
  write_window_report_csv(w, r.windows);
  write_moe_report_csv(m, r.moe);
  write_validity_csv(v, r.validity);
  std::istringstream wi(w.str()), mi(m.str()), vi(v.str());
  std::string line;
  std::getline(wi, line);
  CHECK(line == "window,tau,auc_mean,auc_sd,sens,spec,coverage");
  std::size_t n = 0;
  while (std::getline(wi, line)) ++n;
  CHECK(n == 12);
  std::getline(mi, line);
  CHECK(line ==
        "tau,evol_as_evol,noevol_as_noevol,misclassifications,misclassification_pct,prediction_pct,predictions,total");
  std::getline(mi, line);
  CHECK(line.rfind("All,", 0) == 0);
  std::getline(vi, line);
  CHECK(line == "window,epsilon,error_rate,n");

  const auto json = nlohmann::json::parse(summary_json(r, config));
  CHECK(json.contains("moe"));
  CHECK(json["moe"].size() == 4);
}

TEST_CASE("configuration checks") {
  const auto table = cohort_table(7, 40);
  auto bad = small_config();
  bad.taus = {0.9, 0.8};
  CHECK_THROWS_AS(evaluate(table, bad), ConfigError);
  bad = small_config();
  bad.outer_folds = 1;
  CHECK_THROWS_AS(evaluate(table, bad), ConfigError);
}

TEST_CASE("leaking the test fold into rebalancing trips the audit") {
  const auto table = cohort_table(8, 100);
  auto config = small_config();
  config.selection.k_grid.clear();
  config.leak_test_into_rebalance = true;
  audit::reset();
  CHECK_THROWS_AS(evaluate(table, config), InvariantError);
  CHECK(audit::violation_count() > 0);
  audit::reset();
}
