#include "cpmoe/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "cpmoe/audit.hpp"

namespace cpmoe {
namespace {

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t check_examples(std::span<const LearningExample> examples) {
  if (examples.empty()) throw DataError("train: no examples");
  const std::size_t d = examples.front().features.size();
  if (d == 0) throw DataError("train: examples have no features");
  std::size_t evol = 0;
  for (const auto& ex : examples) {
    if (ex.features.size() != d) throw DataError("train: inconsistent feature dimension");
    for (double v : ex.features)
      if (!std::isfinite(v)) throw DataError("train: non-finite feature value (patient '" + ex.patient_id + "')");
    evol += ex.label == Label::Evol;
  }
  if (evol == 0 || evol == examples.size())
    throw DataError("train: need at least one example of each class, got only " +
                    std::string(to_string(examples.front().label)));
  return d;
}

// Row-major standardized design matrix.
std::vector<double> design(std::span<const LearningExample> examples, const Standardizer& scaler) {
  const std::size_t d = scaler.mean.size();
  std::vector<double> rows(examples.size() * d);
  for (std::size_t i = 0; i < examples.size(); ++i)
    scaler.apply_into(examples[i].features, std::span<double>(rows).subspan(i * d, d));
  return rows;
}

Kernel resolve(Kernel k, std::size_t dim) {
  if (k.kind != KernelKind::Linear && k.gamma <= 0.0) k.gamma = 1.0 / static_cast<double>(dim);
  return k;
}

TrainedModel fit_naive_bayes(const ClassifierSpec& spec, std::span<const LearningExample> examples,
                             Standardizer scaler) {
  const std::size_t d = scaler.mean.size();
  const auto rows = design(examples, scaler);
  NaiveBayesParams p;
  p.mean_evol.assign(d, 0.0);
  p.var_evol.assign(d, 0.0);
  p.mean_noevol.assign(d, 0.0);
  p.var_noevol.assign(d, 0.0);
  std::size_t n_evol = 0, n_noevol = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const bool evol = examples[i].label == Label::Evol;
    auto& mean = evol ? p.mean_evol : p.mean_noevol;
    (evol ? n_evol : n_noevol)++;
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows[i * d + j];
  }
  for (std::size_t j = 0; j < d; ++j) {
    p.mean_evol[j] /= static_cast<double>(n_evol);
    p.mean_noevol[j] /= static_cast<double>(n_noevol);
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const bool evol = examples[i].label == Label::Evol;
    const auto& mean = evol ? p.mean_evol : p.mean_noevol;
    auto& var = evol ? p.var_evol : p.var_noevol;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = rows[i * d + j] - mean[j];
      var[j] += r * r;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    p.var_evol[j] = std::max(p.var_evol[j] / static_cast<double>(n_evol), NaiveBayesParams::kVarianceFloor);
    p.var_noevol[j] = std::max(p.var_noevol[j] / static_cast<double>(n_noevol), NaiveBayesParams::kVarianceFloor);
  }
  const double n = static_cast<double>(examples.size());
  p.log_prior_evol = std::log(static_cast<double>(n_evol) / n);
  p.log_prior_noevol = std::log(static_cast<double>(n_noevol) / n);
  return TrainedModel(spec, std::move(scaler), std::move(p), FitInfo{0, true, 0.0});
}

TrainedModel fit_logistic(const ClassifierSpec& spec, std::span<const LearningExample> examples, Standardizer scaler) {
  const auto objective = LogisticObjective::from_examples(examples, scaler, spec.l2);
  const std::size_t m = objective.dimension() + 1;
  std::vector<double> theta(m, 0.0), grad(m), trial(m), trial_grad(m);
  double f = objective.gradient(theta, grad);
  double step = 1.0;
  FitInfo info;
  for (info.iterations = 0; info.iterations < spec.max_iter; ++info.iterations) {
    info.final_violation = max_abs(grad);
    if (info.final_violation <= spec.tol) {
      info.converged = true;
      break;
    }
    const double g2 = dot(grad, grad);
    // Armijo backtracking from a Barzilai-Borwein trial step.
    double f_trial = 0.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t k = 0; k < m; ++k) trial[k] = theta[k] - step * grad[k];
      f_trial = objective.value(trial);
      if (f_trial <= f - 1e-4 * step * g2 || halvings > 80) break;
      step *= 0.5;
    }
    objective.gradient(trial, trial_grad);
    double sy = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double s = trial[k] - theta[k];
      sy += s * (trial_grad[k] - grad[k]);
      ss += s * s;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);
    if (ss == 0.0) break;  // no representable progress left
    theta.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
  }
  info.final_violation = max_abs(grad);
  info.converged = info.converged || info.final_violation <= spec.tol;

  LinearParams p;
  p.weights.assign(theta.begin(), theta.end() - 1);
  p.bias = theta.back();
  return TrainedModel(spec, std::move(scaler), std::move(p), info);
}

// Kernel rows, cached in full when the problem is small enough.
class KernelRows {
 public:
  static constexpr std::size_t kFullCacheLimit = 3000;

  KernelRows(const Kernel& kernel, const std::vector<double>& rows, std::size_t n, std::size_t d)
      : kernel_(kernel), rows_(rows), n_(n), d_(d), diag_(n) {
    full_ = n <= kFullCacheLimit;
    if (full_) {
      cache_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) cache_[i * n + j] = cache_[j * n + i] = eval(i, j);
    } else {
      scratch_[0].resize(n);
      scratch_[1].resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) diag_[i] = full_ ? cache_[i * n + i] : eval(i, i);
  }

  std::span<const double> row(std::size_t i, int slot) {
    if (full_) return {cache_.data() + i * n_, n_};
    auto& buf = scratch_[slot];
    for (std::size_t j = 0; j < n_; ++j) buf[j] = eval(i, j);
    return buf;
  }
  double diag(std::size_t i) const { return diag_[i]; }

 private:
  double eval(std::size_t i, std::size_t j) const {
    return kernel_eval(kernel_, {rows_.data() + i * d_, d_}, {rows_.data() + j * d_, d_});
  }

  Kernel kernel_;
  const std::vector<double>& rows_;
  std::size_t n_, d_;
  bool full_ = false;
  std::vector<double> cache_;
  std::vector<double> diag_;
  std::vector<double> scratch_[2];
};

// SMO on the C-SVC dual with maximal-violating-pair working sets.
TrainedModel fit_svm(const ClassifierSpec& spec, std::span<const LearningExample> examples, Standardizer scaler) {
  const std::size_t n = examples.size();
  const std::size_t d = scaler.mean.size();
  const Kernel kernel = resolve(spec.kernel, d);
  const auto rows = design(examples, scaler);
  const double c = spec.c;
  constexpr double kTau = 1e-12;

  std::vector<double> y(n), alpha(n, 0.0), grad(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = sign_of(examples[i].label);
  KernelRows k(kernel, rows, n, d);

  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0 : alpha[t] < c; };

  FitInfo info;
  for (info.iterations = 0; info.iterations < spec.max_iter; ++info.iterations) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    info.final_violation = (i == n || j == n) ? 0.0 : g_max - g_min;
    if (i == n || j == n || info.final_violation <= spec.tol) {
      info.converged = true;
      break;
    }

    const auto ki = k.row(i, 0);
    const auto kj = k.row(j, 1);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = k.diag(i) + k.diag(j) - 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = k.diag(i) + k.diag(j) - 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double dai = (alpha[i] - old_ai) * y[i];
    const double daj = (alpha[j] - old_aj) * y[j];
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (ki[t] * dai + kj[t] * daj);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);

  SvmParams p;
  p.kernel = kernel;
  p.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0) continue;
    p.coef.push_back(alpha[t] * y[t]);
    p.support.insert(p.support.end(), rows.begin() + static_cast<std::ptrdiff_t>(t * d),
                     rows.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
  }
  return TrainedModel(spec, std::move(scaler), std::move(p), info);
}

double gaussian_log_density(double z, double mean, double var) {
  const double r = z - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::NaiveBayes: return "naive_bayes";
    case ClassifierKind::Logistic: return "logistic";
    case ClassifierKind::Svm: return "svm";
  }
  return "?";
}

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Poly: return "poly";
    case KernelKind::Rbf: return "rbf";
  }
  return "?";
}

double kernel_eval(const Kernel& kernel, std::span<const double> u, std::span<const double> v) {
  switch (kernel.kind) {
    case KernelKind::Linear: return dot(u, v);
    case KernelKind::Poly: return std::pow(kernel.gamma * dot(u, v) + kernel.offset, kernel.degree);
    case KernelKind::Rbf: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double r = u[i] - v[i];
        s += r * r;
      }
      return std::exp(-kernel.gamma * s);
    }
  }
  return 0.0;
}

ClassifierSpec ClassifierSpec::naive_bayes() {
  ClassifierSpec s;
  s.kind = ClassifierKind::NaiveBayes;
  return s;
}

ClassifierSpec ClassifierSpec::logistic() {
  ClassifierSpec s;
  s.kind = ClassifierKind::Logistic;
  s.l2 = 1e-3;
  s.tol = 1e-6;
  s.max_iter = 20000;
  return s;
}

ClassifierSpec ClassifierSpec::svm_poly() {
  ClassifierSpec s;
  s.kind = ClassifierKind::Svm;
  s.kernel = Kernel{KernelKind::Poly, 3, 1.0, 0.0};
  return s;
}

ClassifierSpec ClassifierSpec::svm_rbf() {
  ClassifierSpec s;
  s.kind = ClassifierKind::Svm;
  s.kernel = Kernel{KernelKind::Rbf, 1, 0.0, 0.0};
  return s;
}

void ClassifierSpec::validate() const {
  if (!(c > 0.0)) throw ConfigError("classifier: C must be > 0");
  if (!(tol > 0.0)) throw ConfigError("classifier: tol must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("classifier: l2 must be >= 0");
  if (max_iter <= 0) throw ConfigError("classifier: max_iter must be > 0");
  if (kind == ClassifierKind::Svm) {
    if (kernel.kind == KernelKind::Poly && kernel.degree < 1) throw ConfigError("classifier: poly degree must be >= 1");
    if (kernel.gamma < 0.0) throw ConfigError("classifier: kernel gamma must be >= 0");
  }
}

Standardizer Standardizer::fit(std::span<const LearningExample> examples) {
  Standardizer s;
  if (examples.empty()) return s;
  const std::size_t d = examples.front().features.size();
  const double n = static_cast<double>(examples.size());
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& ex : examples)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += ex.features[j];
  for (auto& m : s.mean) m /= n;
  for (const auto& ex : examples)
    for (std::size_t j = 0; j < d; ++j) {
      const double r = ex.features[j] - s.mean[j];
      s.scale[j] += r * r;
    }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(s.scale[j] / n);
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  apply_into(x, out);
  return out;
}

void Standardizer::apply_into(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
}

TrainedModel train(const ClassifierSpec& spec, std::span<const LearningExample> examples) {
  spec.validate();
  audit::require_fit_input(examples, "classifier train");
  check_examples(examples);
  auto scaler = Standardizer::fit(examples);
  switch (spec.kind) {
    case ClassifierKind::NaiveBayes: return fit_naive_bayes(spec, examples, std::move(scaler));
    case ClassifierKind::Logistic: return fit_logistic(spec, examples, std::move(scaler));
    case ClassifierKind::Svm: return fit_svm(spec, examples, std::move(scaler));
  }
  throw InvariantError("unknown classifier kind");
}

double decision_score(const TrainedModel& model, std::span<const double> x) {
  if (x.size() != model.dimension())
    throw DataError("decision_score: input has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(model.dimension()));
  const auto z = model.scaler().apply(x);
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          double s = p.log_prior_evol - p.log_prior_noevol;
          for (std::size_t j = 0; j < z.size(); ++j)
            s += gaussian_log_density(z[j], p.mean_evol[j], p.var_evol[j]) -
                 gaussian_log_density(z[j], p.mean_noevol[j], p.var_noevol[j]);
          return s;
        } else if constexpr (std::is_same_v<P, LinearParams>) {
          return dot(p.weights, z) + p.bias;
        } else {
          const std::size_t d = z.size();
          double s = p.bias;
          for (std::size_t t = 0; t < p.coef.size(); ++t)
            s += p.coef[t] * kernel_eval(p.kernel, {p.support.data() + t * d, d}, z);
          return s;
        }
      },
      model.params());
}

LogisticObjective::LogisticObjective(std::vector<double> rows, std::vector<double> targets, std::size_t dim, double l2)
    : rows_(std::move(rows)), targets_(std::move(targets)), dim_(dim), l2_(l2) {
  if (rows_.size() != targets_.size() * dim_) throw InvariantError("logistic objective: shape mismatch");
}

double LogisticObjective::value(std::span<const double> params) const {
  const std::size_t n = targets_.size();
  const std::span<const double> w = params.first(dim_);
  const double b = params[dim_];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double margin = targets_[i] * (dot(w, {rows_.data() + i * dim_, dim_}) + b);
    loss += softplus(-margin);
  }
  return loss / static_cast<double>(n) + 0.5 * l2_ * dot(w, w);
}

double LogisticObjective::gradient(std::span<const double> params, std::span<double> grad) const {
  const std::size_t n = targets_.size();
  const std::span<const double> w = params.first(dim_);
  const double b = params[dim_];
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = rows_.data() + i * dim_;
    const double margin = targets_[i] * (dot(w, {row, dim_}) + b);
    loss += softplus(-margin);
    const double coeff = -targets_[i] * sigmoid(-margin);
    for (std::size_t j = 0; j < dim_; ++j) grad[j] += coeff * row[j];
    grad[dim_] += coeff;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j <= dim_; ++j) grad[j] *= inv_n;
  for (std::size_t j = 0; j < dim_; ++j) grad[j] += l2_ * w[j];
  return loss * inv_n + 0.5 * l2_ * dot(w, w);
}

LogisticObjective LogisticObjective::from_examples(std::span<const LearningExample> examples,
                                                   const Standardizer& scaler, double l2) {
  std::vector<double> targets;
  targets.reserve(examples.size());
  for (const auto& ex : examples) targets.push_back(sign_of(ex.label));
  return LogisticObjective(design(examples, scaler), std::move(targets), scaler.mean.size(), l2);
}

}  // namespace cpmoe
