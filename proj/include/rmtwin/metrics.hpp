#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"

namespace rmtwin {

namespace detail {

inline void require_same_shape(const RadioMap& truth, const RadioMap& twin, const char* op) {
  if (truth.values.rows() != twin.values.rows() || truth.values.cols() != twin.values.cols())
    throw DataError(std::string(op) + ": map dimensions differ");
}

}  // namespace detail

// Mean squared per-cell difference, in dB^2.
inline double mse(const RadioMap& truth, const RadioMap& twin) {
  detail::require_same_shape(truth, twin, "mse");
  return (truth.values - twin.values).array().square().mean();
}

// 10*log10(|max(truth)|^2 / MSE). The peak is the squared absolute value of the
// maximum entry of the true map; with negative dB gains the most negative entry
// can exceed it in magnitude, but the ratio is kept in this form deliberately.
inline double psnr(const RadioMap& truth, const RadioMap& twin) {
  const double err = mse(truth, twin);
  const double peak = truth.values.maxCoeff();
  if (peak == 0.0) throw NumericalError("psnr: degenerate peak, maximum of true map is zero");
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

// Single-window structural similarity over whole-map statistics, population
// (1/n) variance convention. Identical maps give exactly 1 because numerator
// and denominator are the same floating-point products.
inline double ssim(const RadioMap& truth, const RadioMap& twin, double c1, double c2) {
  detail::require_same_shape(truth, twin, "ssim");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("ssim: stabilizers must be non-negative");
  const auto a = truth.values.array();
  const auto b = twin.values.array();
  const double mu_a = a.mean();
  const double mu_b = b.mean();
  const double var_a = (a - mu_a).square().mean();
  const double var_b = (b - mu_b).square().mean();
  const double cov = ((a - mu_a) * (b - mu_b)).mean();
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

// Conventional stabilizers c1 = (0.01 D)^2, c2 = (0.03 D)^2 from the dynamic
// range D of the true map, floored so constant maps still compare as 1.
inline double ssim(const RadioMap& truth, const RadioMap& twin) {
  detail::require_same_shape(truth, twin, "ssim");
  const double range =
      std::max(truth.values.maxCoeff() - truth.values.minCoeff(), 1e-12);
  const double c1 = 0.01 * range * 0.01 * range;
  const double c2 = 0.03 * range * 0.03 * range;
  return ssim(truth, twin, c1, c2);
}

// Pearson correlation of the mean-centered vectorized maps.
inline double correlation(const RadioMap& truth, const RadioMap& twin) {
  detail::require_same_shape(truth, twin, "correlation");
  const Eigen::VectorXd a = map_to_vector(truth);
  const Eigen::VectorXd b = map_to_vector(twin);
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (na == 0.0 || nb == 0.0)
    throw NumericalError("correlation: degenerate variance, a map is constant");
  return ca.dot(cb) / (na * nb);
}

inline RadioMap abs_error_map(const RadioMap& truth, const RadioMap& twin) {
  detail::require_same_shape(truth, twin, "abs_error_map");
  RadioMap out;
  out.grid = truth.grid;
  out.time_index = truth.time_index;
  out.values = (truth.values - twin.values).cwiseAbs();
  return out;
}

// One CSV row of twin quality for a single frame.
struct MetricReport {
  int time_index = 0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double corr = 0.0;
};

inline MetricReport evaluate_map(const RadioMap& truth, const RadioMap& twin) {
  MetricReport r;
  r.time_index = twin.time_index;
  r.mse = mse(truth, twin);
  r.psnr = psnr(truth, twin);
  r.ssim = ssim(truth, twin);
  r.corr = correlation(truth, twin);
  return r;
}

}  // namespace rmtwin
