#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"

#include "cpmoe/dataset.hpp"
#include "cpmoe/random.hpp"

using namespace cpmoe;

namespace {

AssessmentEvent ev(std::string feature, int date, double value = 1.0, std::string patient = "p1") {
  return {std::move(patient), std::move(feature), value, date};
}

Snapshot snap(int ref, std::optional<int> onset, int last) {
  Snapshot s;
  s.patient_id = "p";
  s.ref_date = ref;
  s.niv_onset = onset;
  s.last_followup = last;
  return s;
}

using Partition = std::set<std::set<int>>;

Partition as_dates(const std::vector<AssessmentEvent>& events, const std::vector<std::vector<std::size_t>>& clusters) {
  Partition p;
  for (const auto& c : clusters) {
    std::set<int> dates;
    for (auto i : c) dates.insert(events[i].date);
    p.insert(dates);
  }
  return p;
}

// Literal greedy agglomeration: repeatedly merge the closest legal pair of clusters.
Partition greedy_oracle(const std::vector<AssessmentEvent>& events, int max_gap) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < events.size(); ++i) clusters.push_back({i});
  for (;;) {
    int best = -1;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        int lo = 1 << 30, hi = -1, link = 1 << 30;
        std::set<std::string> fa;
        bool clash = false;
        for (auto i : clusters[a]) fa.insert(events[i].feature_name);
        for (auto j : clusters[b]) clash |= fa.count(events[j].feature_name) > 0;
        for (const auto* c : {&clusters[a], &clusters[b]})
          for (auto i : *c) {
            lo = std::min(lo, events[i].date);
            hi = std::max(hi, events[i].date);
          }
        for (auto i : clusters[a])
          for (auto j : clusters[b]) link = std::min(link, std::abs(events[i].date - events[j].date));
        if (clash || hi - lo > max_gap) continue;
        if (best < 0 || link < best) {
          best = link;
          ba = a;
          bb = b;
        }
      }
    if (best < 0) break;
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return as_dates(events, clusters);
}

}  // namespace

TEST_CASE("parse_cohort sorts rows and warns on unknown columns") {
  std::istringstream in(
      "patient_id,date,feature,value,site_note\n"
      "b,5,fvc,3.2,x\n"
      "a,9,fvc,2.0,y\n"
      "a,1,site,bulbar,z\n");
  const auto parsed = parse_cohort(in);
  REQUIRE(parsed.events.size() == 3);
  CHECK(parsed.events[0].patient_id == "a");
  CHECK(parsed.events[0].date == 1);
  CHECK(std::get<std::string>(parsed.events[0].value) == "bulbar");
  CHECK(parsed.events[1].date == 9);
  CHECK(std::get<double>(parsed.events[2].value) == doctest::Approx(3.2));
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("site_note") != std::string::npos);
}

TEST_CASE("parse_cohort names the offending line") {
  std::istringstream bad_date("patient_id,date,feature,value\na,1,fvc,2\na,abc,fvc,3\n");
  CHECK_THROWS_WITH_AS(parse_cohort(bad_date), doctest::Contains("line 3"), DataError);

  std::istringstream dup("patient_id,date,feature,value\na,1,fvc,2\nb,1,fvc,2\na,1,fvc,3\n");
  CHECK_THROWS_WITH_AS(parse_cohort(dup), doctest::Contains("duplicate"), DataError);

  std::istringstream missing("patient_id,date,value\na,1,2\n");
  CHECK_THROWS_AS(parse_cohort(missing), DataError);
}

TEST_CASE("cohort and outcome CSVs round-trip") {
  const auto cohort = generate_synthetic_cohort(11, 20);
  std::stringstream events, outcomes;
  write_cohort_csv(events, cohort.events);
  write_outcomes_csv(outcomes, cohort.outcomes());
  const auto parsed = parse_cohort(events);
  REQUIRE(parsed.events.size() == cohort.events.size());
  for (std::size_t i = 0; i < parsed.events.size(); ++i) {
    CHECK(parsed.events[i].patient_id == cohort.events[i].patient_id);
    CHECK(parsed.events[i].date == cohort.events[i].date);
    CHECK(parsed.events[i].value == cohort.events[i].value);
  }
  const auto back = parse_outcomes(outcomes);
  REQUIRE(back.size() == cohort.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].niv_onset == cohort.truth[i].niv_onset);
    CHECK(back[i].last_followup == cohort.truth[i].last_followup);
  }
}

TEST_CASE("clustering: worked examples") {
  SUBCASE("days 0, 2, 40 with a 30-day span") {
    std::vector<AssessmentEvent> events{ev("a", 0), ev("b", 2), ev("c", 40)};
    const auto clusters = cluster_events(events, 30);
    REQUIRE(clusters.size() == 2);
    CHECK(reference_date(events, clusters[0]) == 0);
    CHECK(reference_date(events, clusters[1]) == 40);
  }
  SUBCASE("single event") {
    std::vector<AssessmentEvent> events{ev("a", 17)};
    const auto clusters = cluster_events(events, 30);
    REQUIRE(clusters.size() == 1);
    CHECK(reference_date(events, clusters[0]) == 17);
  }
  SUBCASE("same feature twice cannot share a snapshot") {
    std::vector<AssessmentEvent> events{ev("fvc", 0), ev("fvc", 5)};
    CHECK(cluster_events(events, 30).size() == 2);
  }
  SUBCASE("empty input") {
    CHECK(cluster_events({}, 30).empty());
  }
  SUBCASE("lower median for even counts") {
    std::vector<AssessmentEvent> events{ev("a", 10), ev("b", 12), ev("c", 20), ev("d", 30)};
    const auto clusters = cluster_events(events, 45);
    REQUIRE(clusters.size() == 1);
    CHECK(reference_date(events, clusters[0]) == 12);
  }
}

TEST_CASE("clustering matches a literal greedy agglomeration") {
  // Marks of a Golomb ruler: every pairwise distance is distinct, so the greedy order is unique.
  const std::vector<int> ruler{0, 1, 4, 9, 15, 22, 32, 34, 49, 60, 72, 87, 103, 120};
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<AssessmentEvent> events;
    std::uniform_int_distribution<int> feature(0, 3), scale(1, 4);
    std::bernoulli_distribution keep(0.6);
    const int s = scale(rng);
    for (int d : ruler)
      if (keep(rng)) events.push_back(ev("f" + std::to_string(feature(rng)), d * s));
    std::uniform_int_distribution<int> gap(1, 150);
    const int max_gap = gap(rng);
    const auto clusters = cluster_events(events, max_gap);
    CHECK(as_dates(events, clusters) == greedy_oracle(events, max_gap));

    for (const auto& c : clusters) {
      int lo = 1 << 30, hi = -1;
      std::set<std::string> names;
      for (auto i : c) {
        lo = std::min(lo, events[i].date);
        hi = std::max(hi, events[i].date);
        CHECK(names.insert(events[i].feature_name).second);
      }
      CHECK(hi - lo <= max_gap);
    }
  }
}

TEST_CASE("build_snapshots aligns features and carries outcomes") {
  std::vector<AssessmentEvent> events{ev("fvc", 0, 3.0), ev("weight", 3, 70.0), ev("fvc", 90, 2.5),
                                      ev("fvc", 0, 4.0, "p2")};
  std::vector<PatientOutcome> outcomes{{"p1", 200, 300}, {"p2", std::nullopt, 50}};
  const auto table = build_snapshots(events, outcomes);
  CHECK(table.feature_names == std::vector<std::string>{"fvc", "weight"});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].ref_date == 0);
  CHECK(std::get<double>(table.rows[0].values[1]) == 70.0);
  CHECK(std::holds_alternative<std::monostate>(table.rows[1].values[1]));
  CHECK(table.rows[1].niv_onset == 200);
  CHECK(table.rows[2].patient_id == "p2");

  std::vector<PatientOutcome> missing{{"p1", 200, 300}};
  CHECK_THROWS_AS(build_snapshots(events, missing), DataError);
}

TEST_CASE("window labels") {
  const auto& w90 = window_of(WindowId::W90);
  const auto& w90_180 = window_of(WindowId::W90_180);
  const auto& w180_365 = window_of(WindowId::W180_365);
  CHECK(label_for_window(snap(100, 200, 300), w90_180) == Label::Evol);
  CHECK(label_for_window(snap(100, std::nullopt, 500), w180_365) == Label::NoEvol);
  CHECK_FALSE(label_for_window(snap(100, 150, 300), w90_180).has_value());
  // Censored before the window closes.
  CHECK_FALSE(label_for_window(snap(100, std::nullopt, 150), w90).has_value());
  CHECK(label_for_window(snap(100, std::nullopt, 190), w90) == Label::NoEvol);
  // Onset beyond the window counts as NoEvol.
  CHECK(label_for_window(snap(0, 400, 400), w180_365) == Label::NoEvol);
  CHECK(label_for_window(snap(0, 89, 89), w90) == Label::Evol);
  CHECK(label_for_window(snap(0, 90, 90), w90) == Label::NoEvol);
}

TEST_CASE("window labels partition the first year and never recur") {
  Rng rng(5);
  std::uniform_int_distribution<int> day(0, 800);
  std::bernoulli_distribution has_onset(0.7);
  for (int i = 0; i < 5000; ++i) {
    const int ref = day(rng);
    std::optional<int> onset;
    if (has_onset(rng)) onset = ref + day(rng) - 100;
    if (onset && *onset < 0) onset = 0;
    const int last = std::max({ref, onset.value_or(0), ref + day(rng) - 200});
    const auto s = snap(ref, onset, last);
    int evol = 0;
    int first_evol = -1;
    for (std::size_t w = 0; w < kWindowCount; ++w) {
      const auto l = label_for_window(s, kWindows[w]);
      if (l == Label::Evol) {
        ++evol;
        if (first_evol < 0) first_evol = static_cast<int>(w);
      }
      if (first_evol >= 0 && static_cast<int>(w) > first_evol) CHECK_FALSE(l.has_value());
    }
    if (onset && *onset >= ref && *onset < ref + 365) CHECK(evol == 1);
    else CHECK(evol == 0);
  }
}

TEST_CASE("snapshot CSV round trip and schema alignment") {
  const auto cohort = generate_synthetic_cohort(3, 15);
  const auto table = build_snapshots(cohort.events, cohort.outcomes());
  std::stringstream ss;
  write_snapshots_csv(ss, table);
  const auto back = parse_snapshots_csv(ss);
  CHECK(back.feature_names == table.feature_names);
  REQUIRE(back.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].ref_date == table.rows[i].ref_date);
    CHECK(back.rows[i].values == table.rows[i].values);
  }

  std::vector<std::string> reordered(table.feature_names.rbegin(), table.feature_names.rend());
  const auto aligned = align_schema(back, reordered);
  CHECK(aligned.rows[0].values.front() == back.rows[0].values.back());
  reordered.push_back("not_there");
  CHECK_THROWS_WITH_AS(align_schema(back, reordered), doctest::Contains("not_there"), DataError);
}

TEST_CASE("imputation and encoding") {
  auto row = [](std::vector<FeatureValue> v) {
    Snapshot s;
    s.values = std::move(v);
    return s;
  };
  SUBCASE("median fill") {
    SnapshotTable t{{"x"}, {row({1.0}), row({std::monostate{}}), row({3.0})}};
    const auto m = impute_and_encode(t);
    REQUIRE(m.rows.size() == 3);
    CHECK(m.rows[0][0] == 1.0);
    CHECK(m.rows[1][0] == 2.0);
    CHECK(m.rows[2][0] == 3.0);
  }
  SUBCASE("one-hot categories") {
    SnapshotTable t{{"site"}, {row({std::string("A")}), row({std::string("B")}), row({std::string("A")})}};
    const auto m = impute_and_encode(t);
    CHECK(m.names == std::vector<std::string>{"site=A", "site=B"});
    CHECK(m.rows[1] == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("heavily missing and empty features are dropped with a warning") {
    SnapshotTable t{{"dense", "half", "never"}, {}};
    for (int i = 0; i < 10; ++i)
      t.rows.push_back(row({double(i), i < 5 ? FeatureValue{} : FeatureValue{1.0}, FeatureValue{}}));
    std::vector<std::string> warnings;
    const auto m = impute_and_encode(t, &warnings);
    CHECK(m.names == std::vector<std::string>{"dense"});
    CHECK(warnings.size() == 2);
  }
  SUBCASE("fitted statistics come from the fitting rows only") {
    SnapshotTable t{{"x"}, {row({1.0}), row({3.0}), row({1000.0}), row({std::monostate{}})}};
    const std::vector<std::size_t> fit_rows{0, 1};
    const auto imputer = Imputer::fit(t, fit_rows);
    CHECK(imputer.transform(t.rows[3])[0] == 2.0);
    CHECK(imputer.transform(t.rows[2])[0] == 1000.0);
    t.rows[2].values[0] = -5.0;
    CHECK(imputer.columns()[0].median == 2.0);
  }
  SUBCASE("test rows may not fit an imputer") {
    SnapshotTable t{{"x"}, {row({1.0}), row({2.0})}};
    t.rows[1].split = SplitTag::Test;
    const std::vector<std::size_t> all{0, 1};
    CHECK_THROWS_AS(Imputer::fit(t, all), InvariantError);
  }
}

TEST_CASE("synthetic cohort is deterministic per seed") {
  auto render = [](std::uint64_t seed) {
    const auto c = generate_synthetic_cohort(seed, 50);
    std::ostringstream os;
    write_cohort_csv(os, c.events);
    write_outcomes_csv(os, c.outcomes());
    return os.str();
  };
  CHECK(render(42) == render(42));
  CHECK(render(42) != render(43));

  SyntheticConfig bad;
  bad.noise = -1.0;
  CHECK_THROWS_AS(generate_synthetic_cohort(1, 10, bad), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_cohort(1, 0), ConfigError);
}

TEST_CASE("synthetic class balance per window at 1000 patients") {
  const auto c = generate_synthetic_cohort(1, 1000);
  const auto table = build_snapshots(c.events, c.outcomes());
  const double target[] = {0.18, 0.15, 0.24};
  for (const auto& w : kWindows) {
    double evol = 0, total = 0;
    for (const auto& s : table.rows)
      if (const auto l = label_for_window(s, w)) {
        total += 1;
        evol += *l == Label::Evol;
      }
    const double fraction = evol / total;
    INFO("window " << to_string(w.id) << " Evol fraction " << fraction);
    CHECK(fraction >= target[index_of(w.id)] - 0.05);
    CHECK(fraction <= target[index_of(w.id)] + 0.05);
  }
}

TEST_CASE("noise-free cohort is separable by one threshold") {
  SyntheticConfig cfg;
  cfg.noise = 0.0;
  cfg.missing_rate = 0.0;
  const auto c = generate_synthetic_cohort(9, 400, cfg);
  const auto table = build_snapshots(c.events, c.outcomes());
  const auto examples = make_examples(table, Imputer::fit(table, [&] {
                                        std::vector<std::size_t> all(table.rows.size());
                                        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                                        return all;
                                      }()),
                                      WindowId::W90);
  double max_evol = -1e300, min_noevol = 1e300;
  for (const auto& ex : examples)
    (ex.label == Label::Evol ? max_evol : min_noevol) =
        ex.label == Label::Evol ? std::max(max_evol, ex.features[0]) : std::min(min_noevol, ex.features[0]);
  CHECK(max_evol < min_noevol);
}
