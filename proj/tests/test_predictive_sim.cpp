#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "choicecheck/error.hpp"
#include "choicecheck/predictive_sim.hpp"
#include "synthetic.hpp"

using namespace choicecheck;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const DesignMatrix> design_of(const ChoiceDataset& d, std::size_t k) {
  return std::make_shared<const DesignMatrix>(build_design(d, testdata::linear_spec(k)));
}

}  // namespace

TEST_CASE("zero covariance gives draws equal to beta") {
  Vector beta(3);
  beta << 0.5, -1.0, 2.0;
  const ParameterDraws d = draw_parameters(beta, Matrix::Zero(3, 3), 5, 1);
  CHECK(d.count() == 5);
  for (std::size_t r = 0; r < 5; ++r) CHECK(d.draw(r) == beta);
}

TEST_CASE("draws have the target mean and covariance") {
  Vector beta(2);
  beta << 1.0, -2.0;
  Matrix cov(2, 2);
  cov << 0.5, 0.2, 0.2, 0.3;
  const std::size_t R = 10000;
  const ParameterDraws d = draw_parameters(beta, cov, R, 42);
  const Vector mean = d.draws.colwise().mean().transpose();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - beta[i]) < 4 * std::sqrt(cov(i, i) / R));
  const Matrix centered = d.draws.rowwise() - mean.transpose();
  const Matrix sample = centered.transpose() * centered / static_cast<double>(R - 1);
  CHECK((sample - cov).norm() / cov.norm() < 0.10);
  CHECK(d.source == DrawSource::kAsymptotic);
  const ParameterDraws again = draw_parameters(beta, cov, R, 42);
  CHECK(again.draws == d.draws);
  CHECK(draw_parameters(beta, cov, R, 43).draws != d.draws);
}

TEST_CASE("indefinite covariance is a decomposition error") {
  Matrix cov(2, 2);
  cov << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(draw_parameters(Vector::Zero(2), cov, 3, 1), DecompositionError);
}

TEST_CASE("unconverged model refuses to produce draws") {
  FittedModel m;
  m.beta = Vector::Zero(1);
  m.covariance = Matrix::Identity(1, 1);
  m.converged = false;
  CHECK_THROWS_AS(draw_parameters(m, 2, 1), DomainError);
}

TEST_CASE("external draws") {
  const fs::path p = fs::temp_directory_path() / "choicecheck_test_draws.csv";
  std::ofstream(p) << "0.5,1\n0.5,1\n0.5,1\n";
  const ParameterDraws d = ingest_external_draws(p, 2);
  CHECK(d.count() == 3);
  CHECK(d.source == DrawSource::kExternal);
  CHECK(d.draw(2)[1] == 1.0);
  CHECK_THROWS_AS(ingest_external_draws(p, 3), DimensionError);
  std::ofstream(p) << "0.5,nan\n";
  CHECK_THROWS_AS(ingest_external_draws(p, 2), ParseError);

  // Identical rows reproduce the point-draw ensemble.
  const ChoiceDataset data = testdata::random_dataset(1, 10, 2, 4, 2);
  const auto X = design_of(data, 2);
  std::ofstream(p) << "0.5,1\n0.5,1\n0.5,1\n";
  Vector beta(2);
  beta << 0.5, 1.0;
  const auto a = simulate_outcomes(X, ingest_external_draws(p, 2), 9);
  const auto b = simulate_outcomes(X, point_draws(beta, 3), 9);
  CHECK(std::ranges::equal(a.all_outcomes(), b.all_outcomes()));
}

TEST_CASE("categorical sampling") {
  const std::vector<double> p{1.0, 0.0, 0.0};
  for (double u : {0.0, 0.5, 0.999999}) CHECK(sample_categorical(p, u) == 0);
  const std::vector<double> q{0.25, 0.0, 0.75};
  CHECK(sample_categorical(q, 0.2) == 0);
  CHECK(sample_categorical(q, 0.25) == 2);
  CHECK(sample_categorical(q, 0.9999999999) == 2);
  const std::vector<double> tail{0.5, 0.5, 0.0};
  CHECK(sample_categorical(tail, std::nextafter(1.0, 0.0)) == 1);
}

TEST_CASE("binomial frequency for a single 0.25/0.75 choice set") {
  Column x{"x0", true, {0.0, std::log(3.0)}, {}};
  const ChoiceDataset d = ChoiceDataset::from_columns({1, 1}, {1, 2}, {1, 0}, {x});
  const auto X = design_of(d, 1);
  const auto e = simulate_outcomes(X, point_draws(Vector::Ones(1), 20000), 3);
  double count = 0;
  for (std::size_t r = 0; r < e.r_count(); ++r) count += e.outcome(r)[0] == 1;
  CHECK(std::abs(count / 20000 - 0.75) <= 0.01);
}

TEST_CASE("ensemble invariants and thread independence") {
  const ChoiceDataset d = testdata::random_dataset(4, 60, 2, 5, 3, {1, -1, 0.5});
  const auto X = design_of(d, 3);
  Matrix cov = Matrix::Identity(3, 3) * 0.05;
  const auto draws = draw_parameters(Vector::Ones(3), cov, 40, 11);
  const auto a = simulate_outcomes(X, draws, 5, {.threads = 1});
  const auto b = simulate_outcomes(X, draws, 5, {.threads = 8});
  CHECK(std::ranges::equal(a.all_outcomes(), b.all_outcomes()));
  for (std::size_t r = 0; r < a.r_count(); ++r) {
    const auto y = a.indicator(r);
    for (std::size_t s = 0; s < d.n_sets(); ++s) {
      int chosen = 0;
      for (std::size_t row : X->structure->set_rows[s]) chosen += y[row];
      CHECK(chosen == 1);
    }
  }
  const auto lean = simulate_outcomes(X, draws, 5, {.threads = 2, .max_stored_probabilities = 1});
  CHECK_FALSE(lean.probabilities_stored());
  CHECK(a.probabilities_stored());
  CHECK(lean.probabilities(7) == a.probabilities(7));
  CHECK(std::ranges::equal(lean.all_outcomes(), a.all_outcomes()));
}

TEST_CASE("evaluate_statistic: conservation and skips") {
  const ChoiceDataset d = testdata::random_dataset(6, 12, 2, 3, 1);
  const auto X = design_of(d, 1);
  const auto e = simulate_outcomes(X, point_draws(Vector::Ones(1), 25), 2);
  const Statistic count = [](std::span<const std::uint32_t> chosen, std::size_t) {
    return std::optional<std::vector<double>>(std::vector<double>{static_cast<double>(chosen.size())});
  };
  const auto r = evaluate_statistic(count, StatisticKind::kScalar, d.chosen_rows(), e);
  CHECK(r.observed[0] == 12);
  CHECK(r.simulated.size() == 25);
  for (const auto& v : r.simulated) CHECK(v[0] == 12);

  const Statistic odd_only = [](std::span<const std::uint32_t>, std::size_t draw) -> std::optional<std::vector<double>> {
    if (draw != kObservedDraw && draw % 2 == 0) return std::nullopt;
    return std::vector<double>{1.0};
  };
  const auto s = evaluate_statistic(odd_only, StatisticKind::kScalar, d.chosen_rows(), e);
  CHECK(s.skipped_draws == 13);
  CHECK(s.simulated.size() == 12);
  CHECK(s.draw_index.front() == 1);
}

TEST_CASE("alt-1 counts on a 2x2 instance match enumeration") {
  const ChoiceDataset d = testdata::tiny_dataset();
  const auto X = design_of(d, 1);
  const Vector beta = Vector::Constant(1, 0.8);
  const Vector p = probabilities(*X, beta);
  const std::size_t R = 50000;
  const auto e = simulate_outcomes(X, point_draws(beta, R), 17);
  const Statistic alt1 = [](std::span<const std::uint32_t> chosen, std::size_t) {
    return std::optional<std::vector<double>>(
        std::vector<double>{static_cast<double>((chosen[0] == 0) + (chosen[1] == 2))});
  };
  const auto r = evaluate_statistic(alt1, StatisticKind::kScalar, d.chosen_rows(), e);
  std::map<int, double> freq, exact;
  for (const auto& v : r.simulated) freq[static_cast<int>(v[0])] += 1.0 / R;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) exact[(a == 0) + (b == 0)] += p[a] * p[2 + b];
  }
  double tv = 0;
  for (int k = 0; k <= 2; ++k) tv += 0.5 * std::abs(freq[k] - exact[k]);
  CHECK(tv <= 0.02);
}

TEST_CASE("ensemble export") {
  const ChoiceDataset d = testdata::tiny_dataset();
  const auto e = simulate_outcomes(design_of(d, 1), point_draws(Vector::Zero(1), 3), 1);
  const fs::path p = fs::temp_directory_path() / "choicecheck_test_ensemble.csv";
  export_ensemble_csv(e, p);
  std::ifstream in(p);
  std::string line;
  int n = 0;
  std::getline(in, line);
  CHECK(line == "r,obs_id,alt_id");
  while (std::getline(in, line)) ++n;
  CHECK(n == 6);
}
