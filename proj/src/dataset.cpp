#include "cpmoe/dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "cpmoe/csv.hpp"

namespace cpmoe {
namespace {

constexpr std::array<std::string_view, 4> kEventColumns{"patient_id", "date", "feature", "value"};

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

RawValue parse_raw_value(std::string_view token) {
  if (auto v = csv::parse_double(token)) return *v;
  return std::string(token);
}

std::string format_value(const FeatureValue& value) {
  if (const auto* d = std::get_if<double>(&value)) return csv::exact(*d);
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return {};
}

FeatureValue to_feature_value(const RawValue& raw) {
  return std::visit([](const auto& v) -> FeatureValue { return v; }, raw);
}

}  // namespace

ParsedCohort parse_cohort(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("cohort CSV: missing header row");

  ParsedCohort out;
  std::array<std::size_t, 4> col{};
  std::array<bool, 4> seen{};
  for (std::size_t i = 0; i < header->size(); ++i) {
    const auto& name = (*header)[i];
    auto it = std::find(kEventColumns.begin(), kEventColumns.end(), name);
    if (it == kEventColumns.end()) {
      out.warnings.push_back("unknown column '" + name + "' ignored");
      continue;
    }
    auto c = static_cast<std::size_t>(it - kEventColumns.begin());
    if (seen[c]) throw DataError(at_line(reader.line_number()) + "duplicate column '" + name + "'");
    seen[c] = true;
    col[c] = i;
  }
  for (std::size_t c = 0; c < kEventColumns.size(); ++c)
    if (!seen[c])
      throw DataError(at_line(reader.line_number()) + "missing column '" + std::string(kEventColumns[c]) + "'");

  std::vector<std::size_t> lines;
  while (auto row = reader.next()) {
    const auto line = reader.line_number();
    if (row->size() != header->size())
      throw DataError(at_line(line) + "expected " + std::to_string(header->size()) + " fields, got " +
                      std::to_string(row->size()));
    AssessmentEvent ev;
    ev.patient_id = (*row)[col[0]];
    if (ev.patient_id.empty()) throw DataError(at_line(line) + "empty patient_id");
    auto date = csv::parse_int((*row)[col[1]]);
    if (!date) throw DataError(at_line(line) + "date '" + (*row)[col[1]] + "' is not an integer");
    if (*date < 0) throw DataError(at_line(line) + "negative date");
    ev.date = static_cast<int>(*date);
    ev.feature_name = (*row)[col[2]];
    if (ev.feature_name.empty()) throw DataError(at_line(line) + "empty feature name");
    if ((*row)[col[3]].empty()) throw DataError(at_line(line) + "empty value");
    ev.value = parse_raw_value((*row)[col[3]]);
    out.events.push_back(std::move(ev));
    lines.push_back(line);
  }

  std::vector<std::size_t> order(out.events.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    const auto& e = out.events[i];
    return std::tie(e.patient_id, e.date, e.feature_name);
  };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) < key(b); });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (key(order[i - 1]) == key(order[i]))
      throw DataError(at_line(lines[order[i]]) + "duplicate (patient, date, feature) also on line " +
                      std::to_string(lines[order[i - 1]]));
  }
  std::vector<AssessmentEvent> sorted;
  sorted.reserve(order.size());
  for (auto i : order) sorted.push_back(std::move(out.events[i]));
  out.events = std::move(sorted);
  return out;
}

std::vector<PatientOutcome> parse_outcomes(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("outcome CSV: missing header row");
  const std::vector<std::string> expected{"patient_id", "niv_onset", "last_followup"};
  if (*header != expected) throw DataError("outcome CSV: header must be patient_id,niv_onset,last_followup");

  std::vector<PatientOutcome> out;
  std::set<std::string> ids;
  while (auto row = reader.next()) {
    const auto line = reader.line_number();
    if (row->size() != 3) throw DataError(at_line(line) + "expected 3 fields");
    PatientOutcome o;
    o.patient_id = (*row)[0];
    if (o.patient_id.empty()) throw DataError(at_line(line) + "empty patient_id");
    if (!ids.insert(o.patient_id).second) throw DataError(at_line(line) + "duplicate patient '" + o.patient_id + "'");
    if (!(*row)[1].empty()) {
      auto onset = csv::parse_int((*row)[1]);
      if (!onset || *onset < 0) throw DataError(at_line(line) + "niv_onset must be a non-negative integer");
      o.niv_onset = static_cast<int>(*onset);
    }
    auto last = csv::parse_int((*row)[2]);
    if (!last || *last < 0) throw DataError(at_line(line) + "last_followup must be a non-negative integer");
    o.last_followup = static_cast<int>(*last);
    out.push_back(std::move(o));
  }
  return out;
}

void write_cohort_csv(std::ostream& os, std::span<const AssessmentEvent> events) {
  os << "patient_id,date,feature,value\n";
  for (const auto& e : events)
    csv::write_row(os, {e.patient_id, std::to_string(e.date), e.feature_name, format_value(to_feature_value(e.value))});
}

void write_outcomes_csv(std::ostream& os, std::span<const PatientOutcome> outcomes) {
  os << "patient_id,niv_onset,last_followup\n";
  for (const auto& o : outcomes)
    csv::write_row(os, {o.patient_id, o.niv_onset ? std::to_string(*o.niv_onset) : std::string(),
                        std::to_string(o.last_followup)});
}

std::vector<std::vector<std::size_t>> cluster_events(std::span<const AssessmentEvent> events, int max_gap_days) {
  if (max_gap_days <= 0) throw ConfigError("max_gap_days must be positive");
  const std::size_t n = events.size();
  if (n == 0) return {};

  std::vector<std::size_t> by_date(n);
  std::iota(by_date.begin(), by_date.end(), 0);
  std::stable_sort(by_date.begin(), by_date.end(),
                   [&](auto a, auto b) { return events[a].date < events[b].date; });

  // Only pairs closer than the span cap can ever be merged.
  struct Edge {
    int distance;
    std::size_t lo, hi;  // positions in by_date
  };
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      int d = events[by_date[b]].date - events[by_date[a]].date;
      if (d > max_gap_days) break;
      edges.push_back({d, a, b});
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.distance, x.lo, x.hi) < std::tie(y.distance, y.lo, y.hi); });

  // Union-find over date-sorted positions. Constraints are monotone under merging, so
  // processing candidate links in distance order reproduces the greedy closest-legal-pair merge.
  struct Cluster {
    int min_date, max_date;
    std::set<std::string_view> features;
  };
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Cluster> clusters(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& e = events[by_date[p]];
    clusters[p] = {e.date, e.date, {e.feature_name}};
  }
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  for (const auto& edge : edges) {
    auto a = find(edge.lo), b = find(edge.hi);
    if (a == b) continue;
    auto& ca = clusters[a];
    auto& cb = clusters[b];
    int lo = std::min(ca.min_date, cb.min_date), hi = std::max(ca.max_date, cb.max_date);
    if (hi - lo > max_gap_days) continue;
    const auto& small = ca.features.size() < cb.features.size() ? ca.features : cb.features;
    const auto& large = ca.features.size() < cb.features.size() ? cb.features : ca.features;
    bool shared = std::any_of(small.begin(), small.end(), [&](auto f) { return large.count(f) > 0; });
    if (shared) continue;
    if (ca.features.size() < cb.features.size()) std::swap(a, b);
    auto& keep = clusters[a];
    auto& gone = clusters[b];
    keep.min_date = lo;
    keep.max_date = hi;
    keep.features.insert(gone.features.begin(), gone.features.end());
    gone.features.clear();
    parent[b] = a;
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < n; ++p) groups[find(p)].push_back(by_date[p]);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end(), [&](auto x, auto y) {
      return std::tie(events[x].date, x) < std::tie(events[y].date, y);
    });
    out.push_back(std::move(members));
  }
  std::vector<int> refs;
  refs.reserve(out.size());
  for (const auto& c : out) refs.push_back(reference_date(events, c));
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) {
    return std::tie(refs[x], events[out[x].front()].date, out[x].front()) <
           std::tie(refs[y], events[out[y].front()].date, out[y].front());
  });
  std::vector<std::vector<std::size_t>> ordered;
  ordered.reserve(out.size());
  for (auto i : idx) ordered.push_back(std::move(out[i]));
  return ordered;
}

int reference_date(std::span<const AssessmentEvent> events, std::span<const std::size_t> cluster) {
  if (cluster.empty()) throw InvariantError("reference_date of an empty cluster");
  std::vector<int> dates;
  dates.reserve(cluster.size());
  for (auto i : cluster) dates.push_back(events[i].date);
  auto mid = dates.begin() + static_cast<std::ptrdiff_t>((dates.size() - 1) / 2);
  std::nth_element(dates.begin(), mid, dates.end());
  return *mid;
}

SnapshotTable build_snapshots(std::span<const AssessmentEvent> events, std::span<const PatientOutcome> outcomes,
                              int max_gap_days) {
  if (max_gap_days <= 0) throw ConfigError("max_gap_days must be positive");
  SnapshotTable table;
  {
    std::set<std::string> names;
    for (const auto& e : events) names.insert(e.feature_name);
    table.feature_names.assign(names.begin(), names.end());
  }
  std::unordered_map<std::string_view, std::size_t> feature_index;
  for (std::size_t i = 0; i < table.feature_names.size(); ++i) feature_index[table.feature_names[i]] = i;

  std::unordered_map<std::string_view, const PatientOutcome*> outcome_of;
  for (const auto& o : outcomes) {
    if (!outcome_of.emplace(o.patient_id, &o).second)
      throw DataError("duplicate outcome record for patient '" + o.patient_id + "'");
  }

  std::map<std::string_view, std::vector<AssessmentEvent>> by_patient;
  for (const auto& e : events) by_patient[e.patient_id].push_back(e);

  for (const auto& [pid, patient_events] : by_patient) {
    auto it = outcome_of.find(pid);
    if (it == outcome_of.end()) throw DataError("no outcome record for patient '" + std::string(pid) + "'");
    const auto& outcome = *it->second;
    if (outcome.niv_onset && *outcome.niv_onset < 0)
      throw DataError("patient '" + std::string(pid) + "': negative niv_onset");

    for (const auto& cluster : cluster_events(patient_events, max_gap_days)) {
      Snapshot s;
      s.patient_id = std::string(pid);
      s.ref_date = reference_date(patient_events, cluster);
      s.values.assign(table.feature_names.size(), std::monostate{});
      for (auto i : cluster) {
        const auto& e = patient_events[i];
        s.values[feature_index.at(e.feature_name)] = to_feature_value(e.value);
      }
      s.niv_onset = outcome.niv_onset;
      s.last_followup = outcome.last_followup;
      if (s.ref_date > s.last_followup)
        throw DataError("patient '" + s.patient_id + "': snapshot at day " + std::to_string(s.ref_date) +
                        " is after last_followup " + std::to_string(s.last_followup));
      table.rows.push_back(std::move(s));
    }
  }
  return table;
}

std::optional<Label> label_for_window(const Snapshot& s, const TimeWindow& w) {
  if (s.niv_onset) {
    const int d = *s.niv_onset - s.ref_date;
    if (d < w.start_days) return std::nullopt;  // already evolved
    if (d < w.end_days) return Label::Evol;
    return Label::NoEvol;
  }
  if (s.last_followup - s.ref_date >= w.end_days) return Label::NoEvol;
  return std::nullopt;  // censored inside the window
}

void write_snapshots_csv(std::ostream& os, const SnapshotTable& table) {
  std::vector<std::string> header{"patient_id", "ref_date"};
  header.insert(header.end(), table.feature_names.begin(), table.feature_names.end());
  csv::write_row(os, header);
  for (const auto& s : table.rows) {
    std::vector<std::string> row{s.patient_id, std::to_string(s.ref_date)};
    for (const auto& v : s.values) row.push_back(format_value(v));
    csv::write_row(os, row);
  }
}

SnapshotTable parse_snapshots_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("snapshot CSV: missing header row");
  if (header->size() < 2 || (*header)[0] != "patient_id" || (*header)[1] != "ref_date")
    throw DataError("snapshot CSV: header must start with patient_id,ref_date");
  SnapshotTable table;
  table.feature_names.assign(header->begin() + 2, header->end());
  {
    std::set<std::string> unique(table.feature_names.begin(), table.feature_names.end());
    if (unique.size() != table.feature_names.size()) throw DataError("snapshot CSV: duplicate feature column");
  }
  while (auto row = reader.next()) {
    const auto line = reader.line_number();
    if (row->size() != header->size())
      throw DataError(at_line(line) + "expected " + std::to_string(header->size()) + " fields");
    Snapshot s;
    s.patient_id = (*row)[0];
    auto ref = csv::parse_int((*row)[1]);
    if (!ref || *ref < 0) throw DataError(at_line(line) + "ref_date must be a non-negative integer");
    s.ref_date = static_cast<int>(*ref);
    s.last_followup = s.ref_date;
    for (std::size_t j = 2; j < row->size(); ++j) {
      const auto& cell = (*row)[j];
      if (cell.empty())
        s.values.emplace_back(std::monostate{});
      else
        s.values.push_back(to_feature_value(parse_raw_value(cell)));
    }
    table.rows.push_back(std::move(s));
  }
  return table;
}

SnapshotTable align_schema(const SnapshotTable& table, std::span<const std::string> names) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < table.feature_names.size(); ++i) index[table.feature_names[i]] = i;
  std::vector<std::size_t> source;
  source.reserve(names.size());
  for (const auto& name : names) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("schema mismatch: input lacks feature '" + name + "'");
    source.push_back(it->second);
  }
  SnapshotTable out;
  out.feature_names.assign(names.begin(), names.end());
  out.rows.reserve(table.rows.size());
  for (const auto& s : table.rows) {
    Snapshot t = s;
    t.values.clear();
    for (auto j : source) t.values.push_back(s.values[j]);
    out.rows.push_back(std::move(t));
  }
  return out;
}

std::vector<LearningExample> make_examples(const SnapshotTable& table, const Imputer& imputer, WindowId window,
                                           std::span<const std::size_t> rows, SplitTag tag) {
  std::vector<LearningExample> out;
  const auto& w = window_of(window);
  for (auto i : rows) {
    const auto& s = table.rows.at(i);
    auto label = label_for_window(s, w);
    if (!label) continue;
    LearningExample ex;
    ex.features = imputer.transform(s);
    ex.label = *label;
    ex.window = window;
    ex.patient_id = s.patient_id;
    ex.ref_date = s.ref_date;
    ex.split = tag;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LearningExample> make_examples(const SnapshotTable& table, const Imputer& imputer, WindowId window,
                                           SplitTag tag) {
  std::vector<std::size_t> all(table.rows.size());
  std::iota(all.begin(), all.end(), 0);
  return make_examples(table, imputer, window, all, tag);
}

}  // namespace cpmoe
