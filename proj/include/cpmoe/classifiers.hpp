#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "cpmoe/core.hpp"

namespace cpmoe {

enum class ClassifierKind { NaiveBayes, Logistic, Svm };
enum class KernelKind { Linear, Poly, Rbf };

std::string_view to_string(ClassifierKind kind);
std::string_view to_string(KernelKind kind);

struct Kernel {
  KernelKind kind = KernelKind::Poly;
  int degree = 3;
  double offset = 1.0;
  // Inner-product scale for poly and rbf. Zero means 1 / num_features, resolved at fit.
  double gamma = 0.0;

  static Kernel linear() { return {KernelKind::Linear, 1, 0.0, 1.0}; }
  static Kernel poly(int degree, double offset, double gamma = 1.0) {
    return {KernelKind::Poly, degree, offset, gamma};
  }
  static Kernel rbf(double gamma) { return {KernelKind::Rbf, 1, 0.0, gamma}; }
};

/// linear: u.v; poly: (gamma u.v + offset)^degree; rbf: exp(-gamma |u - v|^2).
double kernel_eval(const Kernel& kernel, std::span<const double> u, std::span<const double> v);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Svm;
  Kernel kernel;
  double c = 1.0;     // SVM box constraint
  double l2 = 1e-3;   // logistic penalty
  int max_iter = 200000;
  double tol = 1e-3;
  std::uint64_t seed = 0;

  static ClassifierSpec naive_bayes();
  static ClassifierSpec logistic();
  static ClassifierSpec svm_poly();
  static ClassifierSpec svm_rbf();

  void validate() const;
};

/// Per-feature z-scoring fitted on training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // population sd, 1 where the sd vanishes

  static Standardizer fit(std::span<const LearningExample> examples);
  std::vector<double> apply(std::span<const double> x) const;
  void apply_into(std::span<const double> x, std::span<double> out) const;
};

struct NaiveBayesParams {
  static constexpr double kVarianceFloor = 1e-9;
  double log_prior_evol = 0.0;
  double log_prior_noevol = 0.0;
  std::vector<double> mean_evol, var_evol;
  std::vector<double> mean_noevol, var_noevol;
};

struct LinearParams {
  std::vector<double> weights;
  double bias = 0.0;
};

struct SvmParams {
  Kernel kernel;                 // gamma resolved
  std::vector<double> support;   // row-major, standardized, one row per support vector
  std::vector<double> coef;      // alpha_i * y_i
  double bias = 0.0;
};

struct FitInfo {
  int iterations = 0;
  bool converged = false;
  double final_violation = 0.0;  // gradient max-norm (logistic) or KKT gap (svm)
};

class TrainedModel {
 public:
  using Params = std::variant<NaiveBayesParams, LinearParams, SvmParams>;

  TrainedModel() = default;
  TrainedModel(ClassifierSpec spec, Standardizer scaler, Params params, FitInfo info = {})
      : spec_(std::move(spec)), scaler_(std::move(scaler)), params_(std::move(params)), info_(info) {}

  ClassifierKind kind() const { return spec_.kind; }
  const ClassifierSpec& spec() const { return spec_; }
  const Standardizer& scaler() const { return scaler_; }
  const Params& params() const { return params_; }
  const FitInfo& fit_info() const { return info_; }
  std::size_t dimension() const { return scaler_.mean.size(); }

 private:
  ClassifierSpec spec_;
  Standardizer scaler_;
  Params params_;
  FitInfo info_;
};

/// Fits the classifier. Throws DataError on single-class or non-finite input.
TrainedModel train(const ClassifierSpec& spec, std::span<const LearningExample> examples);

/// Positive favors Evol: log-odds for naive Bayes and logistic, signed margin for SVM.
double decision_score(const TrainedModel& model, std::span<const double> x);

/// Mean logistic loss plus (l2 / 2) |w|^2 over standardized rows; parameters are
/// laid out as [w_0 .. w_{d-1}, bias]. Exposed for gradient checks.
class LogisticObjective {
 public:
  LogisticObjective(std::vector<double> rows, std::vector<double> targets, std::size_t dim, double l2);

  double value(std::span<const double> params) const;
  /// Writes the gradient and returns the objective value.
  double gradient(std::span<const double> params, std::span<double> grad) const;
  std::size_t dimension() const { return dim_; }

  /// Builds the objective over `examples` after applying `scaler`.
  static LogisticObjective from_examples(std::span<const LearningExample> examples,
                                         const Standardizer& scaler, double l2);

 private:
  std::vector<double> rows_;     // n x dim, row-major
  std::vector<double> targets_;  // +1 / -1
  std::size_t dim_;
  double l2_;
};

}  // namespace cpmoe
