#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rmtwin/dmd.hpp"
#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/linalg.hpp"
#include "rmtwin/rng.hpp"

namespace rmtwin {

enum class CompressionKind { gaussian, sparse_sign, identity };

struct CompressionSpec {
  int p = 0;  // compressed dimension; 0 selects the documented default at fit time
  CompressionKind kind = CompressionKind::gaussian;
  std::uint64_t seed = 0;
};

// Default compressed dimension: max(4r, 64) capped at the state dimension.
inline int default_compressed_dim(int rank, int m) {
  return std::min(m, std::max(4 * rank, 64));
}

inline Eigen::MatrixXd make_compression(const CompressionSpec& spec, int m) {
  if (spec.p < 1) throw ConfigError("compressed dimension must be positive");
  if (spec.p > m)
    throw ConfigError("compressed dimension " + std::to_string(spec.p) +
                      " exceeds the state dimension " + std::to_string(m));
  const CounterRng rng(spec.seed, streams::kCompression);
  Eigen::MatrixXd c(spec.p, m);
  switch (spec.kind) {
    case CompressionKind::gaussian: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(spec.p));
      for (int i = 0; i < spec.p; ++i)
        for (int j = 0; j < m; ++j)
          c(i, j) = scale * rng.normal(static_cast<std::uint64_t>(i) * m + j);
      break;
    }
    case CompressionKind::sparse_sign: {
      // Nonzero with density 1/3, value +-1/sqrt(p) with equal sign probability.
      const double scale = 1.0 / std::sqrt(static_cast<double>(spec.p));
      for (int i = 0; i < spec.p; ++i)
        for (int j = 0; j < m; ++j) {
          const double u = rng.uniform(static_cast<std::uint64_t>(i) * m + j);
          c(i, j) = u < 1.0 / 6.0 ? scale : (u < 1.0 / 3.0 ? -scale : 0.0);
        }
      break;
    }
    case CompressionKind::identity:
      if (spec.p != m)
        throw ConfigError("identity compression requires p = state dimension, got p=" +
                          std::to_string(spec.p) + " for m=" + std::to_string(m));
      c = Eigen::MatrixXd::Identity(m, m);
      break;
  }
  return c;
}

// Compressed DMD: the spectrum comes from the compressed pair, full-state
// modes are recovered from the uncompressed successor snapshots.
inline DmdModel cdmd_fit(const SnapshotPair& pair, const CompressionSpec& spec, int rank) {
  if (pair.x.rows() != pair.xp.rows() || pair.x.cols() != pair.xp.cols())
    throw DataError("snapshot pair matrices must have equal shape");
  const int m = static_cast<int>(pair.x.rows());
  CompressionSpec s = spec;
  if (s.p == 0) s.p = default_compressed_dim(rank, m);
  if (rank > s.p)
    throw ConfigError("DMD rank " + std::to_string(rank) + " exceeds the compressed dimension " +
                      std::to_string(s.p));
  const Eigen::MatrixXd c = make_compression(s, m);
  return detail::dmd_fit_impl(c * pair.x, c * pair.xp, pair.xp, pair.x.col(0), pair.x, rank,
                              static_cast<int>(pair.x.cols()) + 1);
}

enum class KernelKind { rbf, polynomial };

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double bandwidth = 0.0;  // rbf; non-positive selects the median heuristic at fit time
  int degree = 1;          // polynomial
  double offset = 0.0;     // polynomial
};

inline KernelSpec linear_kernel() { return {KernelKind::polynomial, 0.0, 1, 0.0}; }

// Entry (i, j) = k(a_i, b_j) over columns. The polynomial inner product is
// normalized by the state dimension so dB-scale inputs stay well conditioned.
inline Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const KernelSpec& kernel) {
  if (a.rows() != b.rows()) throw DataError("kernel inputs must share the state dimension");
  switch (kernel.kind) {
    case KernelKind::rbf: {
      if (!(kernel.bandwidth > 0.0)) throw ConfigError("rbf bandwidth must be positive");
      // Direct per-pair distances keep k(x, x) exactly 1.
      const double denom = 2.0 * kernel.bandwidth * kernel.bandwidth;
      Eigen::MatrixXd out(a.cols(), b.cols());
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (Eigen::Index i = 0; i < a.cols(); ++i)
          out(i, j) = std::exp(-(a.col(i) - b.col(j)).squaredNorm() / denom);
      return out;
    }
    case KernelKind::polynomial: {
      if (kernel.degree < 1) throw ConfigError("polynomial kernel degree must be at least 1");
      Eigen::MatrixXd base =
          (a.transpose() * b) / static_cast<double>(a.rows()) +
          kernel.offset * Eigen::MatrixXd::Ones(a.cols(), b.cols());
      Eigen::MatrixXd out = base;
      for (int d = 1; d < kernel.degree; ++d) out = out.cwiseProduct(base);
      return out;
    }
  }
  throw ConfigError("unknown kernel kind");
}

// Median pairwise column distance, the default rbf bandwidth.
inline double median_pairwise_distance(const Eigen::MatrixXd& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = i + 1; j < x.cols(); ++j) d.push_back((x.col(i) - x.col(j)).norm());
  if (d.empty()) throw DataError("median bandwidth needs at least two snapshots");
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double med = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return med > 0.0 ? med : 1.0;  // constant series degenerates to a flat kernel
}

struct EdmdModel {
  Eigen::MatrixXd training_x;        // state_dim x (N-1), retained for self-description
  KernelSpec kernel;                 // with the resolved bandwidth
  Eigen::VectorXcd eigenvalues;      // rank
  Eigen::MatrixXcd eigfun_coeffs;    // (N-1) x rank; eigenfunction j at state y is
                                     // sum_t coeffs(t, j) * k(y, x_t)
  Eigen::MatrixXcd modes;            // state_dim x rank
  Eigen::VectorXcd amplitudes;       // rank
  int rank = 0;
  int n_train = 0;
  double eigfun_residual = 0.0;  // Koopman eigenfunction property on training data
  double train_residual = 0.0;   // relative Frobenius error over the training window
};

// Kernel eDMD: Gram eigendecomposition plays the role of the SVD, the reduced
// Koopman matrix is eigendecomposed, and state modes come from least-squares
// regression of the snapshots onto the eigenfunction evaluations.
inline EdmdModel edmd_fit(const SnapshotPair& pair, const KernelSpec& kernel, int rank) {
  if (pair.x.rows() != pair.xp.rows() || pair.x.cols() != pair.xp.cols())
    throw DataError("snapshot pair matrices must have equal shape");
  const int k = static_cast<int>(pair.x.cols());
  if (rank < 1) throw ConfigError("eDMD rank must be at least 1, got " + std::to_string(rank));
  if (rank > k)
    throw ConfigError("eDMD rank " + std::to_string(rank) + " exceeds the " + std::to_string(k) +
                      " snapshot pairs");

  KernelSpec resolved = kernel;
  if (resolved.kind == KernelKind::rbf && !(resolved.bandwidth > 0.0))
    resolved.bandwidth = median_pairwise_distance(pair.x);

  const Eigen::MatrixXd gram = kernel_gram(pair.x, pair.x, resolved);
  const Eigen::MatrixXd gram_shift = kernel_gram(pair.xp, pair.x, resolved);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (gram + gram.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");
  const Eigen::VectorXd evals = es.eigenvalues();  // ascending
  const double emax = evals(k - 1);
  if (emax <= 0.0) throw NumericalError("Gram matrix is identically zero");

  int r = 0;  // keep the top `rank` eigenpairs above the relative cutoff
  while (r < rank && evals(k - 1 - r) > detail::kSvdCutoff * emax) ++r;

  Eigen::MatrixXd q(k, r);
  Eigen::VectorXd sigma(r), sigma_inv(r);
  for (int i = 0; i < r; ++i) {
    q.col(i) = es.eigenvectors().col(k - 1 - i);
    sigma(i) = std::sqrt(evals(k - 1 - i));
    sigma_inv(i) = 1.0 / sigma(i);
  }

  const Eigen::MatrixXd reduced =
      sigma_inv.asDiagonal() * (q.transpose() * gram_shift * q) * sigma_inv.asDiagonal();
  Eigen::EigenSolver<Eigen::MatrixXd> eig(reduced);
  if (eig.info() != Eigen::Success) throw NumericalError("Koopman eigendecomposition failed");

  EdmdModel m;
  m.training_x = pair.x;
  m.kernel = resolved;
  m.rank = r;
  m.n_train = k + 1;
  m.eigenvalues = eig.eigenvalues();
  m.eigfun_coeffs = (q * sigma_inv.asDiagonal()).cast<std::complex<double>>() * eig.eigenvectors();

  // Eigenfunction evaluations at the training states, rows indexed by time.
  const Eigen::MatrixXcd efun = gram.cast<std::complex<double>>() * m.eigfun_coeffs;
  m.modes = pair.x.cast<std::complex<double>>() * detail::pinv(efun.transpose());
  m.amplitudes = detail::lstsq(m.modes, pair.x.col(0).cast<std::complex<double>>());

  const auto order = detail::spectrum_order(m.eigenvalues, m.amplitudes);
  Eigen::VectorXcd lam(r), amp(r);
  Eigen::MatrixXcd coeffs(k, r), modes(m.modes.rows(), r);
  for (int i = 0; i < r; ++i) {
    const Eigen::Index o = order[static_cast<std::size_t>(i)];
    lam(i) = m.eigenvalues(o);
    amp(i) = m.amplitudes(o);
    coeffs.col(i) = m.eigfun_coeffs.col(o);
    modes.col(i) = m.modes.col(o);
  }
  m.eigenvalues = std::move(lam);
  m.amplitudes = std::move(amp);
  m.eigfun_coeffs = std::move(coeffs);
  m.modes = std::move(modes);

  // Koopman eigenfunction property: phi_j(x_{t+1}) = lambda_j phi_j(x_t).
  const Eigen::MatrixXcd efun_sorted = gram.cast<std::complex<double>>() * m.eigfun_coeffs;
  const Eigen::MatrixXcd efun_next = gram_shift.cast<std::complex<double>>() * m.eigfun_coeffs;
  const Eigen::MatrixXcd scaled = efun_sorted * m.eigenvalues.asDiagonal();
  m.eigfun_residual = (efun_next - scaled).norm() / std::max(efun_next.norm(), 1e-300);

  const Eigen::MatrixXd recon =
      (m.modes * m.amplitudes.asDiagonal() * vandermonde(m.eigenvalues, k)).real();
  m.train_residual = (recon - pair.x).norm() / pair.x.norm();
  return m;
}

inline StateEval edmd_state(const EdmdModel& m, int t) {
  if (t < 0) throw ConfigError("time index must be non-negative");
  Eigen::VectorXcd coeff(m.eigenvalues.size());
  for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j)
    coeff(j) = std::pow(m.eigenvalues(j), t) * m.amplitudes(j);
  const Eigen::VectorXcd full = m.modes * coeff;

  StateEval out;
  out.value = full.real();
  out.imag_residual = full.imag().norm() / std::max(out.value.norm(), 1e-300);
  if (t >= m.n_train)
    for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j)
      if (std::abs(m.eigenvalues(j)) > 1.0 + kDivergenceEps) out.divergent = true;
  return out;
}

}  // namespace rmtwin
