#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "cpmoe/core.hpp"

namespace cpmoe {
struct Snapshot;
}

namespace cpmoe::audit {

/// Throws InvariantError (and bumps the violation counter) if any row handed to a
/// fit routine is tagged Test or Calibration.
void require_fit_input(std::span<const LearningExample> rows, std::string_view site);
void require_fit_input(std::span<const Snapshot> rows, std::string_view site);

/// Process-wide count of tripped assertions.
std::size_t violation_count();
void reset();

}  // namespace cpmoe::audit
