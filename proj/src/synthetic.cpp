#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

#include "cpmoe/dataset.hpp"
#include "cpmoe/random.hpp"

namespace cpmoe {
namespace {

enum class Role { Stage, Rate, Noise };

Role role_of(std::size_t feature) {
  switch (feature % 3) {
    case 0: return Role::Stage;
    case 1: return Role::Rate;
    default: return Role::Noise;
  }
}

struct FeatureModel {
  std::string name;
  Role role;
  double loading;
  double offset;
  double noise_sd;
};

std::vector<FeatureModel> feature_models(std::uint64_t seed, const SyntheticConfig& cfg) {
  Rng rng(derive_seed(seed, {0xFEA7u}));
  std::uniform_real_distribution<double> magnitude(0.6, 1.4);
  std::uniform_real_distribution<double> offset(-2.0, 2.0);
  std::uniform_real_distribution<double> spread(0.8, 1.2);
  std::vector<FeatureModel> out;
  for (std::size_t j = 0; j < cfg.n_features; ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "feat_%02zu", j);
    FeatureModel m{name, role_of(j), 0.0, 0.0, 0.0};
    // Feature 0 always loads positively on the stage so it is a usable threshold feature.
    double sign = (j / 3) % 2 == 0 ? 1.0 : -1.0;
    m.loading = sign * magnitude(rng);
    m.offset = offset(rng);
    m.noise_sd = spread(rng) * (m.role == Role::Stage ? 0.7 : 0.5);
    out.push_back(std::move(m));
  }
  return out;
}

// Years of latent reserve left before the expected onset, capped where windows stop
// discriminating.
double stage(double expected_onset, int day) {
  return std::clamp((expected_onset - day) / 365.0, -0.25, 2.0);
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synthetic config: " + what); };
  if (n_features == 0 && !categorical_site) fail("at least one feature is required");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be >= 0");
  if (visit_interval_days <= 0) fail("visit_interval_days must be > 0");
  if (visit_jitter_days < 0 || 2 * visit_jitter_days >= visit_interval_days)
    fail("visit_jitter_days must be in [0, visit_interval_days / 2)");
  if (test_spread_days < 0 || test_spread_days >= visit_interval_days - 2 * visit_jitter_days)
    fail("test_spread_days must be >= 0 and leave visits separable");
  if (!(censoring_rate >= 0.0) || !std::isfinite(censoring_rate)) fail("censoring_rate must be >= 0");
  if (max_followup_days <= 0) fail("max_followup_days must be > 0");
  if (!(onset_scale_days > 0.0)) fail("onset_scale_days must be > 0");
  if (!(rate_sd >= 0.0)) fail("rate_sd must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail("missing_rate must be in [0, 1)");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) fail("label_noise must be in [0, 1]");
}

std::vector<PatientOutcome> SyntheticCohort::outcomes() const {
  std::vector<PatientOutcome> out;
  out.reserve(truth.size());
  for (const auto& t : truth) out.push_back({t.patient_id, t.niv_onset, t.last_followup});
  return out;
}

SyntheticCohort generate_synthetic_cohort(std::uint64_t seed, std::size_t n_patients, const SyntheticConfig& cfg) {
  cfg.validate();
  if (n_patients == 0) throw ConfigError("n_patients must be > 0");

  const auto models = feature_models(seed, cfg);
  const std::size_t n_recorded = models.size() + (cfg.categorical_site ? 1 : 0);
  // At least half of a visit's measurements share the consultation day, which makes
  // that day the lower-median reference date of the resulting snapshot.
  const std::size_t on_visit_day = (n_recorded + 1) / 2;

  SyntheticCohort cohort;
  cohort.truth.reserve(n_patients);
  for (std::size_t p = 0; p < n_patients; ++p) {
    // Distributions are per patient too: normal_distribution caches a spare variate.
    Rng rng(derive_seed(seed, {1u, p}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    char id[32];
    std::snprintf(id, sizeof id, "P%05zu", p + 1);

    PatientTruth truth;
    truth.patient_id = id;
    truth.log_rate = cfg.rate_sd * normal(rng);
    truth.expected_onset = cfg.onset_scale_days * std::exp(-truth.log_rate);
    double onset = truth.expected_onset * std::exp(0.3 * cfg.noise * normal(rng));
    // Label noise: the observed onset comes from an unrelated draw of the population.
    const double decoupled_rate = cfg.rate_sd * normal(rng);
    const double decoupled_jitter = normal(rng);
    if (unit(rng) < cfg.label_noise)
      onset = cfg.onset_scale_days * std::exp(-decoupled_rate) * std::exp(0.3 * cfg.noise * decoupled_jitter);

    const double u_dropout = unit(rng);
    double dropout = cfg.censoring_rate > 0.0 ? -std::log1p(-u_dropout) * 365.0 / cfg.censoring_rate
                                              : std::numeric_limits<double>::infinity();
    dropout = std::min(dropout, static_cast<double>(cfg.max_followup_days));
    truth.last_followup = static_cast<int>(std::floor(dropout));
    if (onset <= dropout) {
      truth.niv_onset = std::max(1, static_cast<int>(std::lround(onset)));
      truth.last_followup = std::max(truth.last_followup, *truth.niv_onset);
    }
    const bool bulbar = unit(rng) < 1.0 / (1.0 + std::exp(-(1.5 * truth.log_rate - 0.5)));

    std::uniform_int_distribution<int> jitter(-cfg.visit_jitter_days, cfg.visit_jitter_days);
    std::uniform_int_distribution<int> lab_delay(cfg.test_spread_days > 0 ? 1 : 0, cfg.test_spread_days);
    for (int k = 0;; ++k) {
      const int visit = k == 0 ? 0 : k * cfg.visit_interval_days + jitter(rng);
      if (truth.niv_onset && visit >= *truth.niv_onset) break;
      if (visit > truth.last_followup) break;
      const double g = stage(truth.expected_onset, visit);

      for (std::size_t j = 0; j < n_recorded; ++j) {
        const double eps = normal(rng);
        const bool missing = unit(rng) < cfg.missing_rate;
        const int delay = lab_delay(rng);
        if (missing) continue;
        AssessmentEvent ev;
        ev.patient_id = truth.patient_id;
        ev.date = j < on_visit_day ? visit : visit + delay;
        if (j < models.size()) {
          const auto& m = models[j];
          ev.feature_name = m.name;
          double value = 0.0;
          switch (m.role) {
            case Role::Stage: value = m.offset + m.loading * g + cfg.noise * m.noise_sd * eps; break;
            case Role::Rate: value = m.offset + m.loading * truth.log_rate + cfg.noise * m.noise_sd * eps; break;
            case Role::Noise: value = eps; break;
          }
          ev.value = value;
        } else {
          ev.feature_name = "site";
          ev.value = std::string(bulbar ? "bulbar" : "spinal");
        }
        // A patient is followed at least until their last recorded test.
        truth.last_followup = std::max(truth.last_followup, ev.date);
        cohort.events.push_back(std::move(ev));
      }
    }
    cohort.truth.push_back(std::move(truth));
  }

  std::sort(cohort.events.begin(), cohort.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.patient_id, a.date, a.feature_name) < std::tie(b.patient_id, b.date, b.feature_name);
  });
  return cohort;
}

}  // namespace cpmoe
