#include "choicecheck/mnl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

#include "choicecheck/error.hpp"
#include "choicecheck/parallel.hpp"
#include "choicecheck/rng.hpp"
#include "choicecheck/simd/kernels.hpp"

namespace choicecheck {

namespace {

void check_beta(const DesignMatrix& design, const Vector& beta) {
  if (static_cast<std::size_t>(beta.size()) != design.cols()) {
    throw DimensionError("coefficient vector has length " + std::to_string(beta.size()) + ", design has " +
                         std::to_string(design.cols()) + " columns");
  }
  if (!beta.allFinite()) throw DomainError("coefficient vector contains non-finite values");
}

Vector utilities(const DesignMatrix& design, const Vector& beta) {
  Vector u(static_cast<Eigen::Index>(design.rows()));
  if (design.rows() == 0) return u;
  if (design.cols() == 0) {
    u.setZero();
    return u;
  }
  simd::kernels().row_dot(design.values.data(), design.rows(), design.cols(), beta.data(), u.data());
  return u;
}

}  // namespace

Vector probabilities(const DesignMatrix& design, const Vector& beta) {
  check_beta(design, beta);
  Vector p = utilities(design, beta);
  for (const auto& rows : design.structure->set_rows) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r : rows) m = std::max(m, p[static_cast<Eigen::Index>(r)]);
    double sum = 0.0;
    for (std::size_t r : rows) {
      const double e = std::exp(p[static_cast<Eigen::Index>(r)] - m);
      p[static_cast<Eigen::Index>(r)] = e;
      sum += e;
    }
    for (std::size_t r : rows) p[static_cast<Eigen::Index>(r)] /= sum;
  }
  return p;
}

Vector log_probabilities(const DesignMatrix& design, const Vector& beta) {
  check_beta(design, beta);
  Vector u = utilities(design, beta);
  for (const auto& rows : design.structure->set_rows) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r : rows) m = std::max(m, u[static_cast<Eigen::Index>(r)]);
    double sum = 0.0;
    for (std::size_t r : rows) sum += std::exp(u[static_cast<Eigen::Index>(r)] - m);
    const double lse = m + std::log(sum);
    for (std::size_t r : rows) u[static_cast<Eigen::Index>(r)] -= lse;
  }
  return u;
}

std::vector<std::uint32_t> chosen_rows_from_indicator(const DesignMatrix& design, std::span<const std::uint8_t> y) {
  if (y.size() != design.rows()) throw DimensionError("choice vector length does not match design rows");
  const auto& sets = design.structure->set_rows;
  std::vector<std::uint32_t> out(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    int count = 0;
    for (std::size_t r : sets[s]) {
      if (y[r]) {
        ++count;
        out[s] = static_cast<std::uint32_t>(r);
      }
    }
    if (count != 1) {
      throw ValidationError("choice set for obs_id " + std::to_string(design.structure->set_obs_ids[s]) + " has " +
                            std::to_string(count) + " chosen alternatives");
    }
  }
  return out;
}

LikelihoodEval evaluate_likelihood(const DesignMatrix& design, std::span<const std::uint32_t> chosen_rows,
                                   const Vector& beta, bool want_gradient, bool want_hessian) {
  check_beta(design, beta);
  const auto& sets = design.structure->set_rows;
  if (chosen_rows.size() != sets.size()) throw DimensionError("chosen-row vector does not match choice sets");
  const std::size_t k = design.cols();
  const auto& kern = simd::kernels();
  const Vector u = utilities(design, beta);

  LikelihoodEval ev;
  if (want_gradient) ev.gradient = Vector::Zero(static_cast<Eigen::Index>(k));
  // Row-major lower triangle accumulator; symmetrised at the end.
  std::vector<double> h_lower(want_hessian ? k * k : 0, 0.0);
  std::vector<double> p, xbar(k), centered(k);
  const double* x = design.values.data();

  double ll = 0.0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& rows = sets[s];
    p.resize(rows.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r : rows) m = std::max(m, u[static_cast<Eigen::Index>(r)]);
    double sum = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      p[j] = std::exp(u[static_cast<Eigen::Index>(rows[j])] - m);
      sum += p[j];
    }
    for (double& v : p) v /= sum;
    const std::size_t chosen = chosen_rows[s];
    ll += u[static_cast<Eigen::Index>(chosen)] - m - std::log(sum);

    if (!want_gradient && !want_hessian) continue;
    std::ranges::fill(xbar, 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j) kern.axpy(p[j], x + rows[j] * k, xbar.data(), k);
    if (want_gradient) {
      double* g = ev.gradient.data();
      kern.axpy(1.0, x + chosen * k, g, k);
      kern.axpy(-1.0, xbar.data(), g, k);
    }
    if (want_hessian) {
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const double* xj = x + rows[j] * k;
        for (std::size_t c = 0; c < k; ++c) centered[c] = xj[c] - xbar[c];
        kern.syr_lower(-p[j], centered.data(), k, h_lower.data());
      }
    }
  }
  ev.loglik = ll;
  if (want_hessian) {
    ev.hessian.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = h_lower[i * k + j];
        ev.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        ev.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
  }
  return ev;
}

double log_likelihood(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta) {
  check_beta(design, beta);
  const auto chosen = chosen_rows_from_indicator(design, y);
  return evaluate_likelihood(design, chosen, beta, false, false).loglik;
}

Vector gradient(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta) {
  check_beta(design, beta);
  const auto chosen = chosen_rows_from_indicator(design, y);
  return evaluate_likelihood(design, chosen, beta, true, false).gradient;
}

Matrix hessian(const DesignMatrix& design, std::span<const std::uint8_t> y, const Vector& beta) {
  check_beta(design, beta);
  const auto chosen = chosen_rows_from_indicator(design, y);
  return evaluate_likelihood(design, chosen, beta, false, true).hessian;
}

std::vector<std::size_t> dependent_columns(const DesignMatrix& design, double threshold) {
  const std::size_t k = design.cols();
  if (k == 0) return {};
  std::vector<double> lower(k * k, 0.0), centered(k), mean(k);
  const auto& kern = simd::kernels();
  const double* x = design.values.data();
  for (const auto& rows : design.structure->set_rows) {
    std::ranges::fill(mean, 0.0);
    const double w = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) kern.axpy(w, x + r * k, mean.data(), k);
    for (std::size_t r : rows) {
      for (std::size_t c = 0; c < k; ++c) centered[c] = x[r * k + c] - mean[c];
      kern.syr_lower(1.0, centered.data(), k, lower.data());
    }
  }
  Matrix gram(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lower[i * k + j];
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = lower[i * k + j];
    }
  }
  // Scale to unit diagonal so the relative pivot threshold is unit-free.
  std::vector<std::size_t> out;
  Vector scale(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    const double d = gram(i, i);
    scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  const Matrix normalized = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Matrix> qr(normalized);
  qr.setThreshold(threshold);
  const auto rank = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = rank; i < perm.size(); ++i) out.push_back(static_cast<std::size_t>(perm[i]));
  std::ranges::sort(out);
  return out;
}

FittedModel fit_mle(const DesignMatrix& design, std::span<const std::uint8_t> y, const FitOptions& options) {
  const std::size_t k = design.cols();
  const auto chosen = chosen_rows_from_indicator(design, y);
  if (const auto dep = dependent_columns(design, options.rank_threshold); !dep.empty()) {
    std::string names;
    for (std::size_t c : dep) names += (names.empty() ? "" : ", ") + design.column_names[c];
    throw SingularDesignError("design is not of full rank within choice sets; dependent column(s): " + names);
  }

  Vector beta = options.init.value_or(Vector::Zero(static_cast<Eigen::Index>(k)));
  if (static_cast<std::size_t>(beta.size()) != k) throw DimensionError("initial value has wrong length");

  FittedModel model;
  model.term_names = design.column_names;
  model.n_obs = chosen.size();
  model.n_params = k;

  LikelihoodEval ev = evaluate_likelihood(design, chosen, beta, true, true);
  Matrix inv_approx = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  std::optional<double> rel_change;
  int iter = 0;
  bool stalled = false;
  for (;; ++iter) {
    const double gmax = k ? ev.gradient.cwiseAbs().maxCoeff() : 0.0;
    if (gmax < options.gradient_tol && (!rel_change || *rel_change < options.relative_loglik_tol)) {
      model.converged = true;
      break;
    }
    if (iter >= options.max_iter || stalled) break;

    Vector direction;
    Eigen::LLT<Matrix> llt(-ev.hessian);
    if (llt.info() == Eigen::Success) {
      direction = llt.solve(ev.gradient);
    } else {
      direction = inv_approx * ev.gradient;
    }
    double slope = ev.gradient.dot(direction);
    if (!(slope > 0.0) || !direction.allFinite()) {
      direction = ev.gradient;
      slope = ev.gradient.squaredNorm();
    }

    // Near the optimum the true gain falls below log-likelihood round-off.
    const double noise = 1e-13 * std::max(1.0, std::abs(ev.loglik));
    double step = 1.0;
    bool accepted = false;
    LikelihoodEval next;
    Vector candidate;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      candidate = beta + step * direction;
      next = evaluate_likelihood(design, chosen, candidate, false, false);
      if (std::isfinite(next.loglik) && next.loglik >= ev.loglik + 1e-4 * step * slope - noise) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      continue;
    }
    next = evaluate_likelihood(design, chosen, candidate, true, true);

    // BFGS update of the inverse curvature of -loglik, used as fallback.
    const Vector s = candidate - beta;
    const Vector yv = ev.gradient - next.gradient;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      inv_approx = (I - rho * s * yv.transpose()) * inv_approx * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    rel_change = std::abs(next.loglik - ev.loglik) / std::max(1.0, std::abs(ev.loglik));
    beta = std::move(candidate);
    ev = std::move(next);
  }

  model.beta = beta;
  model.loglik = ev.loglik;
  model.hessian = ev.hessian;
  model.iterations = iter;
  model.gradient_max_norm = k ? ev.gradient.cwiseAbs().maxCoeff() : 0.0;

  const Eigen::Index kk = static_cast<Eigen::Index>(k);
  Eigen::LLT<Matrix> llt(-ev.hessian);
  if (llt.info() == Eigen::Success) {
    model.covariance = llt.solve(Matrix::Identity(kk, kk));
    model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();
  } else {
    model.covariance = (-ev.hessian).completeOrthogonalDecomposition().pseudoInverse();
    model.converged = false;
    model.message = "negative Hessian is not positive definite at the final iterate";
  }
  model.std_errs = model.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  model.z_stats = model.beta.cwiseQuotient(model.std_errs);
  model.p_values.resize(kk);
  for (Eigen::Index i = 0; i < kk; ++i) model.p_values[i] = std::erfc(std::abs(model.z_stats[i]) / std::sqrt(2.0));

  if (model.message.empty()) {
    if (model.converged) {
      model.message = "converged in " + std::to_string(iter) + " iterations";
    } else {
      model.message = (stalled ? "line search stalled" : "iteration limit reached") + std::string(" after ") +
                      std::to_string(iter) + " iterations; gradient max-norm " + std::to_string(model.gradient_max_norm);
    }
  }
  return model;
}

FittedModel estimate(const ChoiceDataset& data, const DesignSpec& spec, const FitOptions& options) {
  const DesignMatrix design = build_design(data, spec);
  FittedModel model = fit_mle(design, data.choices(), options);
  model.spec = spec;
  return model;
}

FitSummary fit_summary(double loglik, std::size_t n_params, const ChoiceDataset& data) {
  FitSummary s;
  s.loglik = loglik;
  s.n_params = n_params;
  for (const auto& rows : data.structure()->set_rows) s.null_loglik -= std::log(static_cast<double>(rows.size()));
  s.mcfadden_rho_bar_sq = s.null_loglik == 0.0 ? 0.0 : 1.0 - (loglik - static_cast<double>(n_params)) / s.null_loglik;
  s.aic = 2.0 * static_cast<double>(n_params) - 2.0 * loglik;
  return s;
}

FitSummary fit_summary(const FittedModel& model, const ChoiceDataset& data) {
  return fit_summary(model.loglik, model.n_params, data);
}

std::vector<int> assign_folds(std::size_t n_sets, int k, std::uint64_t seed) {
  if (k < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (static_cast<std::size_t>(k) > n_sets) throw DomainError("more folds than choice sets");
  std::vector<std::size_t> perm(n_sets);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const CounterRng rng(seed);
  for (std::size_t i = n_sets; i-- > 1;) {
    const double u = rng.uniform(Stream::kFoldShuffle, i, 0);
    const auto j = std::min(i, static_cast<std::size_t>(u * static_cast<double>(i + 1)));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> fold(n_sets);
  for (std::size_t pos = 0; pos < n_sets; ++pos) fold[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return fold;
}

CrossValidationResult cross_validate(const ChoiceDataset& data, const DesignSpec& spec, int k, std::uint64_t seed,
                                     const FitOptions& options, std::size_t threads) {
  const std::vector<int> fold = assign_folds(data.n_sets(), k, seed);
  const DesignMatrix full = build_design(data, spec);
  const auto full_chosen = data.chosen_rows();

  CrossValidationResult cv;
  cv.folds = k;
  cv.seed = seed;
  cv.fold_loglik.assign(static_cast<std::size_t>(k), 0.0);
  cv.fold_sizes.assign(static_cast<std::size_t>(k), 0);
  cv.fold_converged.assign(static_cast<std::size_t>(k), false);
  std::vector<std::vector<std::string>> fold_warnings(static_cast<std::size_t>(k));
  cv.warnings = full.warnings;

  parallel_for(static_cast<std::size_t>(k), resolve_threads(threads), [&](std::size_t f) {
    std::vector<std::size_t> train, test;
    for (std::size_t s = 0; s < fold.size(); ++s) (fold[s] == static_cast<int>(f) ? test : train).push_back(s);
    DesignMatrix train_design = select_sets(full, train);
    DesignMatrix test_design = select_sets(full, test);

    // Columns without variation in the training fold (e.g. a categorical
    // level absent from it) cannot be estimated; they contribute zero.
    const auto dropped = dependent_columns(train_design, options.rank_threshold);
    if (!dropped.empty()) {
      std::string names;
      for (std::size_t c : dropped) names += (names.empty() ? "" : ", ") + full.column_names[c];
      fold_warnings[f].push_back("fold " + std::to_string(f) + ": column(s) " + names +
                                 " not identified in training data; zeroed");
      train_design = drop_columns(train_design, dropped);
      test_design = drop_columns(test_design, dropped);
    }
    std::vector<std::uint8_t> y_train(train_design.rows(), 0);
    for (std::size_t s = 0; s < train.size(); ++s) {
      const auto& src_rows = full.structure->set_rows[train[s]];
      const auto& dst_rows = train_design.structure->set_rows[s];
      for (std::size_t j = 0; j < src_rows.size(); ++j) {
        if (src_rows[j] == full_chosen[train[s]]) y_train[dst_rows[j]] = 1;
      }
    }
    FitOptions fold_options = options;
    fold_options.init.reset();
    const FittedModel m = fit_mle(train_design, y_train, fold_options);

    std::vector<std::uint32_t> test_chosen(test.size());
    for (std::size_t s = 0; s < test.size(); ++s) {
      const auto& src_rows = full.structure->set_rows[test[s]];
      const auto& dst_rows = test_design.structure->set_rows[s];
      for (std::size_t j = 0; j < src_rows.size(); ++j) {
        if (src_rows[j] == full_chosen[test[s]]) test_chosen[s] = static_cast<std::uint32_t>(dst_rows[j]);
      }
    }
    cv.fold_loglik[f] = evaluate_likelihood(test_design, test_chosen, m.beta, false, false).loglik;
    cv.fold_sizes[f] = test.size();
    cv.fold_converged[f] = m.converged;
  });

  for (auto& w : fold_warnings) cv.warnings.insert(cv.warnings.end(), w.begin(), w.end());
  cv.mean_loglik = std::accumulate(cv.fold_loglik.begin(), cv.fold_loglik.end(), 0.0) / k;
  return cv;
}

nlohmann::json estimation_report_json(const FittedModel& model, const FitSummary& summary) {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t i = 0; i < model.n_params; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    terms.push_back({{"name", model.term_names[i]},
                     {"estimate", model.beta[ii]},
                     {"std_err", model.std_errs[ii]},
                     {"z", model.z_stats[ii]},
                     {"p_value", model.p_values[ii]}});
  }
  return {{"terms", terms},
          {"loglik", model.loglik},
          {"null_loglik", summary.null_loglik},
          {"mcfadden_rho_bar_sq", summary.mcfadden_rho_bar_sq},
          {"aic", summary.aic},
          {"n_obs", model.n_obs},
          {"n_params", model.n_params},
          {"converged", model.converged},
          {"iterations", model.iterations},
          {"gradient_max_norm", model.gradient_max_norm},
          {"message", model.message}};
}

namespace {

std::string thousands(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, std::abs(v));
  std::string s = buf;
  const auto dot = s.find('.');
  std::string int_part = s.substr(0, dot);
  const std::string frac = dot == std::string::npos ? "" : s.substr(dot);
  for (int i = static_cast<int>(int_part.size()) - 3; i > 0; i -= 3) int_part.insert(static_cast<std::size_t>(i), ",");
  return (v < 0 ? "-" : "") + int_part + frac;
}

}  // namespace

std::string estimation_report_text(const FittedModel& model, const FitSummary& summary) {
  std::size_t width = 8;
  for (const auto& n : model.term_names) width = std::max(width, n.size());
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %12s  %9s  %9s  %9s\n", static_cast<int>(width), "Variable", "Estimate",
                "Std. err", "z", "P>|z|");
  out << line << std::string(width + 48, '-') << '\n';
  for (std::size_t i = 0; i < model.n_params; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double p = model.p_values[ii];
    const char* stars = p < 0.01 ? "**" : (p < 0.05 ? "* " : "  ");
    std::snprintf(line, sizeof line, "%-*s  %10.3f%s  %9.3f  %9.3f  %9.3f\n", static_cast<int>(width),
                  model.term_names[i].c_str(), model.beta[ii], stars, model.std_errs[ii], model.z_stats[ii], p);
    out << line;
  }
  out << std::string(width + 48, '-') << '\n';
  std::snprintf(line, sizeof line, "%-*s  %12s\n", static_cast<int>(width), "Log-likelihood",
                thousands(model.loglik, 3).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-*s  %12.3f\n", static_cast<int>(width), "McFadden rho-bar^2",
                summary.mcfadden_rho_bar_sq);
  out << line;
  std::snprintf(line, sizeof line, "%-*s  %12s\n", static_cast<int>(width), "AIC", thousands(summary.aic, 0).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-*s  %12zu\n", static_cast<int>(width), "Observations", model.n_obs);
  out << line;
  out << "Note: * means p-value < 0.05 and ** means p-value < 0.01.\n";
  if (!model.converged) out << "WARNING: " << model.message << '\n';
  return out.str();
}

nlohmann::json to_json(const CrossValidationResult& cv) {
  return {{"folds", cv.folds},
          {"seed", cv.seed},
          {"fold_loglik", cv.fold_loglik},
          {"fold_sizes", cv.fold_sizes},
          {"fold_converged", cv.fold_converged},
          {"mean_loglik", cv.mean_loglik},
          {"warnings", cv.warnings}};
}

}  // namespace choicecheck
