#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

namespace rmtwin::detail {

inline constexpr double kSvdCutoff = 1e-12;  // relative to the largest singular value

// Minimum-norm least-squares solve A x = b with singular values below
// kSvdCutoff * sigma_max treated as zero.
inline Eigen::VectorXcd lstsq(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? kSvdCutoff * s(0) : 0.0;
  Eigen::VectorXcd uhb = svd.matrixU().adjoint() * b;
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(a.cols());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) x += (uhb(i) / s(i)) * svd.matrixV().col(i);
  return x;
}

// Moore-Penrose pseudo-inverse with the shared cutoff.
inline Eigen::MatrixXcd pinv(const Eigen::MatrixXcd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? kSvdCutoff * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

// Deterministic mode ordering: descending |lambda|, ties broken by descending
// |amplitude|, then by descending imaginary and real parts.
inline std::vector<Eigen::Index> spectrum_order(const Eigen::VectorXcd& lambda,
                                                const Eigen::VectorXcd& amplitude) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(lambda.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(lambda(a)), mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    const double aa = std::abs(amplitude(a)), ab = std::abs(amplitude(b));
    if (aa != ab) return aa > ab;
    if (lambda(a).imag() != lambda(b).imag()) return lambda(a).imag() > lambda(b).imag();
    return lambda(a).real() > lambda(b).real();
  });
  return idx;
}

}  // namespace rmtwin::detail
