#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <string>

#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/linalg.hpp"

namespace rmtwin {

inline constexpr double kDivergenceEps = 1e-6;  // |lambda| > 1+eps counts as divergent

struct DmdModel {
  Eigen::MatrixXcd modes;        // state_dim x rank
  Eigen::VectorXcd eigenvalues;  // rank
  Eigen::VectorXcd amplitudes;   // rank
  int rank = 0;                  // effective rank after truncation
  int state_dim = 0;
  int n_train = 0;
  double train_residual = 0.0;  // relative Frobenius error over the training window
};

// Entry (j, k) = lambda_j^k, k = 0..n_cols-1.
inline Eigen::MatrixXcd vandermonde(const Eigen::VectorXcd& lambda, int n_cols) {
  if (n_cols < 1) throw ConfigError("vandermonde needs at least one column");
  Eigen::MatrixXcd v(lambda.size(), n_cols);
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    std::complex<double> p = 1.0;
    for (int k = 0; k < n_cols; ++k) {
      v(j, k) = p;
      p *= lambda(j);
    }
  }
  return v;
}

struct StateEval {
  Eigen::VectorXd value;
  double imag_residual = 0.0;  // |imag| / |real| of the discarded imaginary part
  bool divergent = false;      // forecasting with an eigenvalue outside the unit circle
};

namespace detail {

// Core exact-DMD computation shared by the standard and compressed fits:
// SVD of `x`, reduced operator from `xp`, modes recovered from `mode_source`.
inline DmdModel dmd_fit_impl(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xp,
                             const Eigen::MatrixXd& mode_source, const Eigen::VectorXd& g1,
                             const Eigen::MatrixXd& residual_ref, int rank, int n_train) {
  const Eigen::Index k = x.cols();
  if (rank < 1) throw ConfigError("DMD rank must be at least 1, got " + std::to_string(rank));
  if (rank > std::min(x.rows(), k))
    throw ConfigError("DMD rank " + std::to_string(rank) + " exceeds the data (min of " +
                      std::to_string(x.rows()) + " states and " + std::to_string(k) +
                      " snapshot pairs)");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) <= 0.0) throw NumericalError("snapshot matrix is identically zero");

  int r = 0;
  while (r < rank && sv(r) > kSvdCutoff * sv(0)) ++r;  // effective-rank reduction, not failure

  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
  const Eigen::VectorXd sinv = sv.head(r).cwiseInverse();

  const Eigen::MatrixXd vs = v * sinv.asDiagonal();
  const Eigen::MatrixXd reduced = u.transpose() * xp * vs;

  Eigen::EigenSolver<Eigen::MatrixXd> eig(reduced);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");

  DmdModel m;
  m.eigenvalues = eig.eigenvalues();
  m.modes = (mode_source * vs).cast<std::complex<double>>() * eig.eigenvectors();
  m.amplitudes = lstsq(m.modes, g1.cast<std::complex<double>>());
  m.rank = r;
  m.state_dim = static_cast<int>(mode_source.rows());
  m.n_train = n_train;

  const auto order = spectrum_order(m.eigenvalues, m.amplitudes);
  Eigen::MatrixXcd modes(m.modes.rows(), r);
  Eigen::VectorXcd lam(r), amp(r);
  for (int i = 0; i < r; ++i) {
    modes.col(i) = m.modes.col(order[static_cast<std::size_t>(i)]);
    lam(i) = m.eigenvalues(order[static_cast<std::size_t>(i)]);
    amp(i) = m.amplitudes(order[static_cast<std::size_t>(i)]);
  }
  m.modes = std::move(modes);
  m.eigenvalues = std::move(lam);
  m.amplitudes = std::move(amp);

  const Eigen::MatrixXd recon =
      (m.modes * m.amplitudes.asDiagonal() * vandermonde(m.eigenvalues, static_cast<int>(k)))
          .real();
  m.train_residual = (recon - residual_ref).norm() / residual_ref.norm();
  return m;
}

}  // namespace detail

inline DmdModel dmd_fit(const SnapshotPair& pair, int rank) {
  if (pair.x.rows() != pair.xp.rows() || pair.x.cols() != pair.xp.cols())
    throw DataError("snapshot pair matrices must have equal shape");
  return detail::dmd_fit_impl(pair.x, pair.xp, pair.xp, pair.x.col(0), pair.x, rank,
                              static_cast<int>(pair.x.cols()) + 1);
}

inline StateEval dmd_state(const DmdModel& m, int t) {
  if (t < 0) throw ConfigError("time index must be non-negative");
  Eigen::VectorXcd coeff(m.eigenvalues.size());
  for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j)
    coeff(j) = std::pow(m.eigenvalues(j), t) * m.amplitudes(j);
  const Eigen::VectorXcd full = m.modes * coeff;

  StateEval out;
  out.value = full.real();
  const double re = out.value.norm();
  out.imag_residual = full.imag().norm() / std::max(re, 1e-300);
  if (t >= m.n_train)
    for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j)
      if (std::abs(m.eigenvalues(j)) > 1.0 + kDivergenceEps) out.divergent = true;
  return out;
}

inline Eigen::MatrixXd dmd_reconstruct_all(const DmdModel& m) {
  return (m.modes * m.amplitudes.asDiagonal() * vandermonde(m.eigenvalues, m.n_train - 1)).real();
}

}  // namespace rmtwin
