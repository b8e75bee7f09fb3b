#pragma once

// Independent reference computations shared by the unit tests and the acceptance run.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cpmoe/conformal.hpp"
#include "cpmoe/feature_selection.hpp"

namespace oracles {

using cpmoe::Label;

inline double brute_force_auc(const std::vector<double>& s, const std::vector<Label>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == Label::Evol && y[j] == Label::NoEvol) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Direct transcription of the pooled rule, scanning every calibration score.
inline cpmoe::PValues brute_force_p(const cpmoe::CcpModel& ccp, const std::vector<double>& x) {
  double counts[2] = {0, 0};
  std::size_t n = 0;
  for (const auto& f : ccp.folds) {
    const auto xf = f.features.empty() ? x : cpmoe::project(x, f.features);
    for (Label y : {Label::NoEvol, Label::Evol}) {
      const double a = -cpmoe::sign_of(y) * cpmoe::decision_score(f.model, xf);
      for (const auto& c : f.calibration) counts[static_cast<int>(y)] += c.alpha >= a;
    }
    n += f.calibration.size();
  }
  return {(counts[1] + 1) / double(n + 1), (counts[0] + 1) / double(n + 1)};
}

using Point = std::array<double, 2>;

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew's monotone chain, counter-clockwise, no collinear points.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool inside_hull(const std::vector<Point>& hull, const Point& p, double tol) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    if (cross(a, b, p) < -tol * len) return false;
  }
  return true;
}

}  // namespace oracles
