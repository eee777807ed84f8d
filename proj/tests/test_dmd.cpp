#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <complex>

#include "rmtwin/dmd.hpp"
#include "test_util.hpp"

using namespace rmtwin;

namespace {

SnapshotPair pair_from(const Eigen::MatrixXd& series) {
  SnapshotPair p;
  const Eigen::Index n = series.cols();
  p.x = series.leftCols(n - 1);
  p.xp = series.rightCols(n - 1);
  return p;
}

// Match each reference eigenvalue to its nearest fitted one.
double max_spectral_error(const Eigen::VectorXcd& fitted,
                          const std::vector<std::complex<double>>& truth) {
  double worst = 0.0;
  for (const auto& t : truth) {
    double best = 1e300;
    for (Eigen::Index i = 0; i < fitted.size(); ++i) best = std::min(best, std::abs(fitted(i) - t));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("vandermonde matrix holds eigenvalue powers") {
  Eigen::VectorXcd lam(1);
  lam << std::complex<double>(2.0, 0.0);
  const Eigen::MatrixXcd v = vandermonde(lam, 3);
  REQUIRE(v(0, 0) == std::complex<double>(1.0, 0.0));
  REQUIRE(v(0, 1) == std::complex<double>(2.0, 0.0));
  REQUIRE(v(0, 2) == std::complex<double>(4.0, 0.0));

  Eigen::VectorXcd lam2(2);
  lam2 << std::complex<double>(1.0, 0.0), std::complex<double>(-1.0, 0.0);
  const Eigen::MatrixXcd v2 = vandermonde(lam2, 4);
  for (int k = 0; k < 4; ++k) {
    REQUIRE(v2(0, k) == std::complex<double>(1.0, 0.0));
    REQUIRE(v2(1, k) == std::complex<double>(k % 2 == 0 ? 1.0 : -1.0, 0.0));
  }

  Eigen::VectorXcd lam3(3);
  lam3 << std::complex<double>(0.3, 0.1), std::complex<double>(1.0, 0.0),
      std::complex<double>(-0.2, 0.0);
  REQUIRE(vandermonde(lam3, 5).col(0).isApprox(Eigen::VectorXcd::Ones(3)));
  REQUIRE_THROWS_AS(vandermonde(lam3, 0), ConfigError);
}

TEST_CASE("dmd recovers the spectrum of a known diagonal system") {
  Eigen::MatrixXd series(2, 20);
  Eigen::Vector2d x(1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    series.col(t) = x;
    x = Eigen::Vector2d(0.9 * x(0), 0.5 * x(1));
  }
  const DmdModel m = dmd_fit(pair_from(series), 2);
  REQUIRE(m.rank == 2);
  REQUIRE(std::abs(m.eigenvalues(0) - std::complex<double>(0.9, 0.0)) < 1e-8);
  REQUIRE(std::abs(m.eigenvalues(1) - std::complex<double>(0.5, 0.0)) < 1e-8);

  // t=10 forecast against exact matrix powers.
  const StateEval s = dmd_state(m, 10);
  REQUIRE(s.value(0) == Catch::Approx(std::pow(0.9, 10)).margin(1e-6));
  REQUIRE(s.value(1) == Catch::Approx(std::pow(0.5, 10)).margin(1e-6));
  REQUIRE_FALSE(s.divergent);
}

TEST_CASE("dmd recovers a complex spectrum through a lifted linear system") {
  const auto sys = testutil::make_linear_system(16, 20);
  const DmdModel m = dmd_fit(pair_from(sys.series), 4);
  REQUIRE(m.rank == 4);
  REQUIRE(max_spectral_error(m.eigenvalues, sys.spectrum) < 1e-8);

  // Shift consistency: the model advanced one step matches the true dynamics.
  for (int t : {0, 3, 10, 15}) {
    const Eigen::VectorXd now = dmd_state(m, t).value;
    const Eigen::VectorXd next = dmd_state(m, t + 1).value;
    REQUIRE((next - sys.a_full * now).norm() < 1e-6 * std::max(1.0, now.norm()));
  }

  // Real data: the discarded imaginary part must be negligible.
  for (int t : {0, 7, 19, 30}) REQUIRE(dmd_state(m, t).imag_residual < 1e-8);
}

TEST_CASE("constant series pins a unit eigenvalue and exact reconstruction") {
  Eigen::VectorXd g(6);
  g << -60, -61, -62, -63, -64, -65;
  Eigen::MatrixXd series = g.replicate(1, 10);
  const DmdModel m = dmd_fit(pair_from(series), 1);
  REQUIRE(m.rank == 1);
  REQUIRE(std::abs(m.eigenvalues(0) - std::complex<double>(1.0, 0.0)) < 1e-10);
  for (int t : {0, 4, 9, 25}) REQUIRE((dmd_state(m, t).value - g).norm() < 1e-8 * g.norm());
  REQUIRE(m.train_residual < 1e-12);
}

TEST_CASE("rank-5 series fits exactly at rank 5") {
  const SnapshotSeries s = testutil::make_rank5_series();
  const SnapshotPair p = split_snapshots(s);
  const DmdModel m = dmd_fit(p, 5);
  REQUIRE(m.rank == 5);
  REQUIRE(m.state_dim == 900);
  REQUIRE(m.n_train == 20);
  REQUIRE(m.train_residual < 1e-6);

  const Eigen::MatrixXd recon = dmd_reconstruct_all(m);
  REQUIRE((recon - p.x).norm() / p.x.norm() < 1e-6);

  // Column consistency between the matrix product and per-time evaluation.
  for (int t : {0, 5, 12, 18})
    REQUIRE((recon.col(t) - dmd_state(m, t).value).norm() < 1e-10 * recon.col(t).norm());

  // Amplitudes reproduce the first snapshot on exactly low-rank data.
  REQUIRE((dmd_state(m, 0).value - p.x.col(0)).norm() < 1e-8 * p.x.col(0).norm());
}

TEST_CASE("interpolating fit drives training residual to zero") {
  // Square X (state dim = N-1) makes the best-fit operator exact on the
  // window, so the full-rank fit interpolates.
  const rmtwin::CounterRng rng(7, 7);
  Eigen::MatrixXd series(8, 9);
  for (int i = 0; i < series.rows(); ++i)
    for (int j = 0; j < series.cols(); ++j)
      series(i, j) = rng.normal(static_cast<std::uint64_t>(i) * 64 + j);
  const DmdModel m = dmd_fit(pair_from(series), 8);  // r = N-1, full rank
  REQUIRE(m.train_residual < 1e-6);
}

TEST_CASE("effective rank drops below the requested rank on degenerate data") {
  const auto sys = testutil::make_linear_system(16, 20);  // trajectory spans 4 dimensions
  const DmdModel m = dmd_fit(pair_from(sys.series), 10);
  REQUIRE(m.rank == 4);
  REQUIRE(m.train_residual < 1e-8);
}

TEST_CASE("divergent eigenvalues flag forecasts only") {
  Eigen::MatrixXd series(3, 10);
  Eigen::Vector3d x(1.0, 2.0, -1.0);
  for (int t = 0; t < 10; ++t) {
    series.col(t) = x;
    x *= 1.2;
  }
  const DmdModel m = dmd_fit(pair_from(series), 1);
  REQUIRE(std::abs(m.eigenvalues(0) - std::complex<double>(1.2, 0.0)) < 1e-9);
  REQUIRE_FALSE(dmd_state(m, 5).value.hasNaN());
  REQUIRE_FALSE(dmd_state(m, 8).divergent);   // reconstruction window
  REQUIRE(dmd_state(m, 12).divergent);        // forecast with |lambda| > 1
}

TEST_CASE("fit rejects invalid ranks and degenerate data") {
  const auto sys = testutil::make_linear_system(8, 10);
  REQUIRE_THROWS_AS(dmd_fit(pair_from(sys.series), 0), ConfigError);
  REQUIRE_THROWS_AS(dmd_fit(pair_from(sys.series), 12), ConfigError);
  REQUIRE_THROWS_AS(dmd_fit(pair_from(Eigen::MatrixXd::Zero(4, 6)), 2), NumericalError);
  REQUIRE_THROWS_AS(dmd_state(dmd_fit(pair_from(sys.series), 2), -1), ConfigError);
}
