#include "choicecheck/predictive_sim.hpp"

#include <cmath>
#include <fstream>

#include "choicecheck/error.hpp"
#include "choicecheck/parallel.hpp"
#include "choicecheck/rng.hpp"
#include "csv.hpp"

namespace choicecheck {

namespace {

Matrix covariance_factor(const Matrix& cov) {
  const Eigen::Index k = cov.rows();
  if (!cov.allFinite()) throw DecompositionError("covariance contains non-finite values");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw DecompositionError("covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::LDLT<Matrix> ldlt(cov);
  if (ldlt.info() == Eigen::Success) {
    const Vector d = ldlt.vectorD();
    if (d.minCoeff() >= -1e-12 * scale) {
      const Matrix l = ldlt.matrixL();
      Matrix f = l * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
      return ldlt.transpositionsP().transpose() * f;
    }
  }
  Matrix jittered = cov;
  for (int attempt = 0; attempt < 3; ++attempt) {
    jittered.diagonal().array() += 1e-10;
    Eigen::LLT<Matrix> retry(jittered);
    if (retry.info() == Eigen::Success) return retry.matrixL();
  }
  throw DecompositionError("covariance (" + std::to_string(k) + "x" + std::to_string(k) +
                           ") is not positive semi-definite, even after jitter");
}

}  // namespace

ParameterDraws draw_parameters(const Vector& beta, const Matrix& covariance, std::size_t R, std::uint64_t seed) {
  if (R < 1) throw DomainError("number of parameter draws must be at least 1");
  const Eigen::Index k = beta.size();
  if (covariance.rows() != k || covariance.cols() != k) throw DimensionError("covariance does not match beta");
  if (!beta.allFinite()) throw DomainError("beta contains non-finite values");
  const Matrix f = covariance_factor(covariance);
  const CounterRng rng(seed);

  ParameterDraws out;
  out.source = DrawSource::kAsymptotic;
  out.seed = seed;
  out.draws.resize(static_cast<Eigen::Index>(R), k);
  Vector z(k);
  for (std::size_t r = 0; r < R; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) z[c] = rng.normal(Stream::kParameterDraws, r, static_cast<std::uint32_t>(c));
    out.draws.row(static_cast<Eigen::Index>(r)) = (beta + f * z).transpose();
  }
  return out;
}

ParameterDraws draw_parameters(const FittedModel& model, std::size_t R, std::uint64_t seed) {
  if (!model.converged) throw DomainError("cannot draw parameters from a model that did not converge");
  return draw_parameters(model.beta, model.covariance, R, seed);
}

ParameterDraws point_draws(const Vector& beta, std::size_t R) {
  if (R < 1) throw DomainError("number of parameter draws must be at least 1");
  ParameterDraws out;
  out.source = DrawSource::kExternal;
  out.draws = beta.transpose().replicate(static_cast<Eigen::Index>(R), 1);
  return out;
}

ParameterDraws ingest_external_draws(const std::filesystem::path& path, std::size_t expected_k) {
  const csv::Table table = csv::read(path, false);
  if (table.rows.empty()) throw DomainError(path.string() + ": no parameter draws");
  ParameterDraws out;
  out.source = DrawSource::kExternal;
  out.draws.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(expected_k));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != expected_k) {
      throw DimensionError(path.string() + ": draw " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                           " columns, model has " + std::to_string(expected_k) + " parameters");
    }
    for (std::size_t c = 0; c < expected_k; ++c) {
      const auto v = parse_double(trim(row[c]));
      if (!v || !std::isfinite(*v)) {
        throw ParseError(path.string() + ": line " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                         ": not a finite number");
      }
      out.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  return out;
}

SimulationEnsemble::SimulationEnsemble(std::shared_ptr<const DesignMatrix> design, ParameterDraws draws,
                                       std::uint64_t seed, std::vector<std::uint32_t> outcomes,
                                       std::vector<double> stored_probabilities)
    : design_(std::move(design)),
      draws_(std::move(draws)),
      seed_(seed),
      outcomes_(std::move(outcomes)),
      probabilities_(std::move(stored_probabilities)) {}

std::span<const std::uint32_t> SimulationEnsemble::outcome(std::size_t r) const {
  if (r >= r_count()) throw DimensionError("draw index out of range");
  return std::span<const std::uint32_t>(outcomes_).subspan(r * n_sets(), n_sets());
}

std::vector<std::uint8_t> SimulationEnsemble::indicator(std::size_t r) const {
  std::vector<std::uint8_t> y(design_->rows(), 0);
  for (std::uint32_t row : outcome(r)) y[row] = 1;
  return y;
}

Vector SimulationEnsemble::probabilities(std::size_t r) const {
  if (r >= r_count()) throw DimensionError("draw index out of range");
  if (probabilities_stored()) {
    const std::size_t n = design_->rows();
    return Eigen::Map<const Vector>(probabilities_.data() + r * n, static_cast<Eigen::Index>(n));
  }
  return choicecheck::probabilities(*design_, draws_.draw(r));
}

std::size_t sample_categorical(std::span<const double> p, double u) {
  long double cum = 0.0L;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    cum += p[j];
    last_positive = j;
    if (static_cast<long double>(u) < cum) return j;
  }
  return last_positive;
}

SimulationEnsemble simulate_outcomes(std::shared_ptr<const DesignMatrix> design, ParameterDraws draws,
                                     std::uint64_t seed, const SimulationOptions& options) {
  if (!design) throw DomainError("no design");
  if (static_cast<std::size_t>(draws.draws.cols()) != design->cols()) {
    throw DimensionError("parameter draws have " + std::to_string(draws.draws.cols()) + " columns, design has " +
                         std::to_string(design->cols()));
  }
  if (!draws.draws.allFinite()) throw DomainError("parameter draws contain non-finite values");
  const std::size_t R = draws.count();
  const std::size_t n_sets = design->structure->n_sets();
  const std::size_t n_rows = design->rows();
  const bool store = R * n_rows <= options.max_stored_probabilities;

  std::vector<std::uint32_t> outcomes(R * n_sets);
  std::vector<double> stored(store ? R * n_rows : 0);
  const CounterRng rng(seed);
  const auto& sets = design->structure->set_rows;

  parallel_for(R, resolve_threads(options.threads), [&](std::size_t r) {
    const Vector p = probabilities(*design, draws.draw(r));
    if (store) std::copy(p.data(), p.data() + n_rows, stored.begin() + static_cast<std::ptrdiff_t>(r * n_rows));
    std::vector<double> local;
    for (std::size_t s = 0; s < n_sets; ++s) {
      local.clear();
      for (std::size_t row : sets[s]) local.push_back(p[static_cast<Eigen::Index>(row)]);
      const double u = rng.uniform(Stream::kOutcomes, r, static_cast<std::uint32_t>(s));
      outcomes[r * n_sets + s] = static_cast<std::uint32_t>(sets[s][sample_categorical(local, u)]);
    }
  });
  return SimulationEnsemble(std::move(design), std::move(draws), seed, std::move(outcomes), std::move(stored));
}

StatisticResult evaluate_statistic(const Statistic& stat, StatisticKind kind, std::span<const std::uint32_t> observed,
                                   const SimulationEnsemble& ensemble, std::size_t threads) {
  StatisticResult result;
  result.kind = kind;
  std::optional<std::vector<double>> obs;
  try {
    obs = stat(observed, kObservedDraw);
  } catch (const std::exception& e) {
    throw CheckError(std::string("statistic failed on the observed data: ") + e.what());
  }
  if (!obs) throw CheckError("statistic is undefined on the observed data");
  result.observed = std::move(*obs);

  const std::size_t R = ensemble.r_count();
  std::vector<std::optional<std::vector<double>>> slots(R);
  parallel_for(R, resolve_threads(threads), [&](std::size_t r) { slots[r] = stat(ensemble.outcome(r), r); });
  for (std::size_t r = 0; r < R; ++r) {
    if (!slots[r]) {
      ++result.skipped_draws;
      continue;
    }
    result.simulated.push_back(std::move(*slots[r]));
    result.draw_index.push_back(r);
  }
  return result;
}

void export_ensemble_csv(const SimulationEnsemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "r,obs_id,alt_id\n";
  const auto& index = ensemble.design().row_index;
  for (std::size_t r = 0; r < ensemble.r_count(); ++r) {
    for (std::uint32_t row : ensemble.outcome(r)) {
      out << r << ',' << index[row].first << ',' << index[row].second << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace choicecheck
