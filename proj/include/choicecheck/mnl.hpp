#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "choicecheck/choice_data.hpp"
#include "choicecheck/design.hpp"

namespace choicecheck {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Softmax of X·beta within each choice set, one probability per design row.
Vector probabilities(const DesignMatrix& design, const Vector& beta);

// Log of the same probabilities, computed with log-sum-exp.
Vector log_probabilities(const DesignMatrix& design, const Vector& beta);

// Row index of the chosen alternative in each set; throws ValidationError when
// a set does not have exactly one 1.
std::vector<std::uint32_t> chosen_rows_from_indicator(const DesignMatrix& design, std::span<const std::uint8_t> y);

double log_likelihood(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta);
Vector gradient(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta);
Matrix hessian(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta);

struct LikelihoodEval {
  double loglik = 0.0;
  Vector gradient;
  Matrix hessian;
};

// One pass over the data producing whichever pieces are requested.
LikelihoodEval evaluate_likelihood(const DesignMatrix& design, std::span<const std::uint32_t> chosen_rows,
                                   const Vector& beta, bool want_gradient, bool want_hessian);

struct FitOptions {
  double gradient_tol = 1e-6;
  double relative_loglik_tol = 1e-10;
  int max_iter = 100;
  std::optional<Vector> init;
  double rank_threshold = 1e-10;
};

struct FittedModel {
  Vector beta;
  double loglik = 0.0;
  Matrix hessian;
  Matrix covariance;  // -H^{-1}
  Vector std_errs;
  Vector z_stats;
  Vector p_values;
  std::size_t n_obs = 0;
  std::size_t n_params = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_max_norm = 0.0;
  std::string message;
  std::vector<std::string> term_names;
  DesignSpec spec;
};

// Columns whose within-choice-set variation is linearly dependent on earlier
// ones (pivoted QR of the set-demeaned Gram matrix). Empty when identified.
std::vector<std::size_t> dependent_columns(const DesignMatrix& design, double threshold = 1e-10);

// Damped Newton-Raphson with backtracking; BFGS direction whenever -H is not
// numerically positive definite. Throws SingularDesignError on rank
// deficiency; non-convergence is reported via `converged == false`.
FittedModel fit_mle(const DesignMatrix& design, std::span<const std::uint8_t> y, const FitOptions& options = {});

// Builds the design from `spec` and fits it; the result remembers the spec.
FittedModel estimate(const ChoiceDataset& data, const DesignSpec& spec, const FitOptions& options = {});

struct FitSummary {
  double loglik = 0.0;
  double null_loglik = 0.0;
  double mcfadden_rho_bar_sq = 0.0;
  double aic = 0.0;
  std::size_t n_params = 0;
};

// Null model: equal shares within each choice set.
FitSummary fit_summary(const FittedModel& model, const ChoiceDataset& data);
FitSummary fit_summary(double loglik, std::size_t n_params, const ChoiceDataset& data);

struct CrossValidationResult {
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<double> fold_loglik;
  std::vector<std::size_t> fold_sizes;
  std::vector<bool> fold_converged;
  double mean_loglik = 0.0;
  std::vector<std::string> warnings;
};

// Fold label per choice set: a seeded Fisher-Yates permutation dealt
// round-robin, so fold sizes differ by at most one.
std::vector<int> assign_folds(std::size_t n_sets, int k, std::uint64_t seed);

CrossValidationResult cross_validate(const ChoiceDataset& data, const DesignSpec& spec, int k, std::uint64_t seed,
                                     const FitOptions& options = {}, std::size_t threads = 0);

nlohmann::json estimation_report_json(const FittedModel& model, const FitSummary& summary);
std::string estimation_report_text(const FittedModel& model, const FitSummary& summary);
nlohmann::json to_json(const CrossValidationResult& cv);

}  // namespace choicecheck
