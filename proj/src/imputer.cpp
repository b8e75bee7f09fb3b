#include <algorithm>
#include <numeric>
#include <set>

#include "cpmoe/audit.hpp"
#include "cpmoe/csv.hpp"
#include "cpmoe/dataset.hpp"

namespace cpmoe {

Imputer::Imputer(std::vector<std::string> raw_names, std::vector<Column> columns)
    : raw_names_(std::move(raw_names)), columns_(std::move(columns)) {
  for (const auto& c : columns_)
    if (c.source >= raw_names_.size()) throw DataError("imputer column '" + c.name + "' has no source feature");
}

Imputer Imputer::fit(const SnapshotTable& table, std::span<const std::size_t> rows, std::vector<std::string>* warnings) {
  if (rows.empty()) throw DataError("imputer fit on an empty split");
  std::vector<Snapshot> fit_rows;
  fit_rows.reserve(rows.size());
  for (auto i : rows) fit_rows.push_back(table.rows.at(i));
  audit::require_fit_input(fit_rows, "imputer fit");

  std::vector<Column> columns;
  for (std::size_t j = 0; j < table.feature_names.size(); ++j) {
    const auto& name = table.feature_names[j];
    std::vector<double> reals;
    std::set<std::string> tokens;
    bool categorical = false;
    std::size_t missing = 0;
    for (const auto& s : fit_rows) {
      const auto& v = s.values.at(j);
      if (std::holds_alternative<std::monostate>(v)) {
        ++missing;
      } else if (const auto* d = std::get_if<double>(&v)) {
        reals.push_back(*d);
        tokens.insert(csv::exact(*d));
      } else {
        categorical = true;
        tokens.insert(std::get<std::string>(v));
      }
    }
    const double missing_fraction = static_cast<double>(missing) / static_cast<double>(fit_rows.size());
    if (missing == fit_rows.size()) {
      if (warnings) warnings->push_back("feature '" + name + "' is entirely missing; dropped");
      continue;
    }
    if (missing_fraction > kMaxMissingFraction) {
      if (warnings)
        warnings->push_back("feature '" + name + "' missing in " + csv::fixed(100.0 * missing_fraction, 1) +
                            "% of rows; dropped");
      continue;
    }
    Column c;
    c.name = name;
    c.source = j;
    if (categorical) {
      c.kind = ColumnKind::Categorical;
      c.categories.assign(tokens.begin(), tokens.end());
    } else {
      c.kind = ColumnKind::Real;
      std::sort(reals.begin(), reals.end());
      const std::size_t m = reals.size();
      c.median = m % 2 ? reals[m / 2] : 0.5 * (reals[m / 2 - 1] + reals[m / 2]);
    }
    columns.push_back(std::move(c));
  }
  return Imputer(table.feature_names, std::move(columns));
}

std::vector<double> Imputer::transform(const Snapshot& snapshot) const {
  if (snapshot.values.size() != raw_names_.size())
    throw DataError("snapshot has " + std::to_string(snapshot.values.size()) + " features, encoder expects " +
                    std::to_string(raw_names_.size()));
  std::vector<double> out;
  out.reserve(encoded_size());
  for (const auto& c : columns_) {
    const auto& v = snapshot.values[c.source];
    if (c.kind == ColumnKind::Real) {
      if (std::holds_alternative<std::monostate>(v)) {
        out.push_back(c.median);
      } else if (const auto* d = std::get_if<double>(&v)) {
        out.push_back(*d);
      } else {
        throw DataError("feature '" + c.name + "' expects a number, got '" + std::get<std::string>(v) + "'");
      }
    } else {
      std::string token;
      if (const auto* d = std::get_if<double>(&v)) token = csv::exact(*d);
      if (const auto* s = std::get_if<std::string>(&v)) token = *s;
      for (const auto& cat : c.categories) out.push_back(!token.empty() && cat == token ? 1.0 : 0.0);
    }
  }
  return out;
}

std::vector<std::string> Imputer::encoded_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) {
    if (c.kind == ColumnKind::Real)
      names.push_back(c.name);
    else
      for (const auto& cat : c.categories) names.push_back(c.name + "=" + cat);
  }
  return names;
}

std::size_t Imputer::encoded_size() const {
  std::size_t n = 0;
  for (const auto& c : columns_) n += c.kind == ColumnKind::Real ? 1 : c.categories.size();
  return n;
}

FeatureMatrix impute_and_encode(const SnapshotTable& table, std::vector<std::string>* warnings) {
  std::vector<std::size_t> all(table.rows.size());
  std::iota(all.begin(), all.end(), 0);
  auto imputer = Imputer::fit(table, all, warnings);
  FeatureMatrix m;
  m.names = imputer.encoded_names();
  m.rows.reserve(table.rows.size());
  for (const auto& s : table.rows) m.rows.push_back(imputer.transform(s));
  return m;
}

}  // namespace cpmoe
