#include "cpmoe/audit.hpp"

#include <atomic>
#include <string>

#include "cpmoe/dataset.hpp"

namespace cpmoe::audit {
namespace {

std::atomic<std::size_t> violations{0};

bool held_out(SplitTag tag) { return tag == SplitTag::Test || tag == SplitTag::Calibration; }

template <typename Row>
void check(std::span<const Row> rows, std::string_view site) {
  for (const auto& row : rows) {
    if (held_out(row.split)) {
      ++violations;
      throw InvariantError("leakage audit: " + std::string(to_string(row.split)) + " row from patient '" +
                           row.patient_id + "' reached " + std::string(site));
    }
  }
}

}  // namespace

void require_fit_input(std::span<const LearningExample> rows, std::string_view site) { check(rows, site); }
void require_fit_input(std::span<const Snapshot> rows, std::string_view site) { check(rows, site); }

std::size_t violation_count() { return violations.load(); }
void reset() { violations = 0; }

}  // namespace cpmoe::audit
