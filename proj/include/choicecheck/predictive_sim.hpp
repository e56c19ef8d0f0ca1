#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "choicecheck/design.hpp"
#include "choicecheck/mnl.hpp"

namespace choicecheck {

enum class DrawSource { kAsymptotic, kExternal };

struct ParameterDraws {
  Matrix draws;  // R x K, one draw per row
  DrawSource source = DrawSource::kAsymptotic;
  std::uint64_t seed = 0;

  std::size_t count() const { return static_cast<std::size_t>(draws.rows()); }
  Vector draw(std::size_t r) const { return draws.row(static_cast<Eigen::Index>(r)).transpose(); }
};

// beta + F z with F F^T = covariance. F is the Cholesky factor when it
// exists; a positive semi-definite covariance (e.g. all zeros) falls back to a
// pivoted LDL^T factor; otherwise 1e-10 I is added up to three times before
// DecompositionError.
ParameterDraws draw_parameters(const Vector& beta, const Matrix& covariance, std::size_t R, std::uint64_t seed);
ParameterDraws draw_parameters(const FittedModel& model, std::size_t R, std::uint64_t seed);

// R draws that all equal beta.
ParameterDraws point_draws(const Vector& beta, std::size_t R);

// Headerless CSV, one draw per row, expected_k columns.
ParameterDraws ingest_external_draws(const std::filesystem::path& path, std::size_t expected_k);

struct SimulationOptions {
  std::size_t threads = 0;
  // Probability tables are kept only while R * rows stays within this many cells.
  std::size_t max_stored_probabilities = 100'000'000;
};

class SimulationEnsemble {
 public:
  SimulationEnsemble() = default;
  SimulationEnsemble(std::shared_ptr<const DesignMatrix> design, ParameterDraws draws, std::uint64_t seed,
                     std::vector<std::uint32_t> outcomes, std::vector<double> stored_probabilities);

  std::size_t r_count() const { return draws_.count(); }
  std::size_t n_sets() const { return design_ ? design_->structure->n_sets() : 0; }
  std::uint64_t seed() const { return seed_; }
  const ParameterDraws& draws() const { return draws_; }
  const DesignMatrix& design() const { return *design_; }
  const std::shared_ptr<const DesignMatrix>& design_ptr() const { return design_; }

  // Chosen design row per choice set for draw r.
  std::span<const std::uint32_t> outcome(std::size_t r) const;
  // 0/1 indicator per design row for draw r.
  std::vector<std::uint8_t> indicator(std::size_t r) const;

  bool probabilities_stored() const { return !probabilities_.empty(); }
  // Per-row probabilities under draw r (stored or recomputed).
  Vector probabilities(std::size_t r) const;

  std::span<const std::uint32_t> all_outcomes() const { return outcomes_; }

 private:
  std::shared_ptr<const DesignMatrix> design_;
  ParameterDraws draws_;
  std::uint64_t seed_ = 0;
  std::vector<std::uint32_t> outcomes_;     // R x n_sets
  std::vector<double> probabilities_;       // R x rows, or empty
};

// For draw r and choice set s the uniform comes from (seed, outcomes stream,
// r, s), so results do not depend on the thread count.
SimulationEnsemble simulate_outcomes(std::shared_ptr<const DesignMatrix> design, ParameterDraws draws,
                                     std::uint64_t seed, const SimulationOptions& options = {});

// Inverse-CDF pick over `p` (alt_id order) for uniform u in [0, 1).
std::size_t sample_categorical(std::span<const double> p, double u);

enum class StatisticKind { kScalar, kVector, kCurve };

// Statistic over an outcome vector (chosen row per set). `draw` is the
// ensemble index, or kObservedDraw for the observed data. Returning nullopt
// marks the draw as unusable (recorded as a skip).
inline constexpr std::size_t kObservedDraw = std::numeric_limits<std::size_t>::max();
using Statistic =
    std::function<std::optional<std::vector<double>>(std::span<const std::uint32_t> chosen_rows, std::size_t draw)>;

struct StatisticResult {
  StatisticKind kind = StatisticKind::kScalar;
  std::vector<double> observed;
  std::vector<std::vector<double>> simulated;  // usable draws, in draw order
  std::vector<std::size_t> draw_index;         // ensemble index of each simulated entry
  std::size_t skipped_draws = 0;
};

StatisticResult evaluate_statistic(const Statistic& stat, StatisticKind kind, std::span<const std::uint32_t> observed,
                                   const SimulationEnsemble& ensemble, std::size_t threads = 0);

// Writes r, obs_id, alt_id for every simulated choice.
void export_ensemble_csv(const SimulationEnsemble& ensemble, const std::filesystem::path& path);

}  // namespace choicecheck
