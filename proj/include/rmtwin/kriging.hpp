#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"

namespace rmtwin {

enum class VariogramKind { exponential, gaussian, spherical };

struct VariogramModel {
  VariogramKind kind = VariogramKind::exponential;
  double nugget = 0.0;  // dB^2
  double sill = 1.0;    // dB^2
  double range = 1.0;   // meters
  bool degenerate = false;  // fitted from an (almost) constant field
};

// Semivariance gamma(h). gamma(0) = 0 by the exact-interpolation convention:
// the nugget applies only to strictly positive separations.
inline double semivariance(const VariogramModel& m, double h) {
  if (h <= 0.0) return 0.0;
  switch (m.kind) {
    case VariogramKind::exponential:
      return m.nugget + m.sill * (1.0 - std::exp(-h / m.range));
    case VariogramKind::gaussian: {
      const double u = h / m.range;
      return m.nugget + m.sill * (1.0 - std::exp(-u * u));
    }
    case VariogramKind::spherical: {
      if (h >= m.range) return m.nugget + m.sill;
      const double u = h / m.range;
      return m.nugget + m.sill * (1.5 * u - 0.5 * u * u * u);
    }
  }
  throw ConfigError("unknown variogram kind");
}

struct SampleSet {
  std::vector<Point> locations;
  Eigen::VectorXd values;
};

inline SampleSet make_sample_set(std::vector<Point> locations, Eigen::VectorXd values) {
  if (static_cast<Eigen::Index>(locations.size()) != values.size())
    throw DataError("sample locations and values differ in count");
  if (!values.allFinite()) throw DataError("sample values must be finite");
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (!std::isfinite(locations[i].x) || !std::isfinite(locations[i].y))
      throw DataError("sample locations must be finite");
    for (std::size_t j = 0; j < i; ++j)
      if (distance(locations[i], locations[j]) < 1e-9)
        throw DataError("duplicate sample locations at indices " + std::to_string(j) + " and " +
                        std::to_string(i));
  }
  return SampleSet{std::move(locations), std::move(values)};
}

inline SampleSet samples_from_grid(const Grid& grid, const Eigen::VectorXd& values) {
  if (values.size() != grid.size()) throw DataError("cell values do not match the grid");
  if (!values.allFinite()) throw DataError("sample values must be finite");
  return SampleSet{grid.cell_positions(), values};  // grid cells are distinct by construction
}

struct VariogramBin {
  double lag = 0.0;          // mean pair distance within the bin
  double semivariance = 0.0; // Matheron estimate: mean of squared half-differences
  long pair_count = 0;
};

inline std::vector<VariogramBin> empirical_variogram(const SampleSet& samples, int n_bins,
                                                     double max_lag) {
  const std::size_t m = samples.locations.size();
  if (m < 2) throw DataError("empirical variogram needs at least 2 samples");
  if (n_bins < 1) throw ConfigError("variogram bin count must be positive");
  if (!(max_lag > 0.0)) throw ConfigError("variogram max lag must be positive");

  std::vector<double> dist_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> semi_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<long> count(static_cast<std::size_t>(n_bins), 0);
  const double width = max_lag / n_bins;

  long total_pairs = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = distance(samples.locations[i], samples.locations[j]);
      if (d > max_lag) continue;
      const auto b = std::min(static_cast<std::size_t>(d / width),
                              static_cast<std::size_t>(n_bins - 1));
      const double diff = samples.values(static_cast<Eigen::Index>(i)) -
                          samples.values(static_cast<Eigen::Index>(j));
      dist_sum[b] += d;
      semi_sum[b] += 0.5 * diff * diff;
      count[b] += 1;
      total_pairs += 1;
    }
  if (total_pairs == 0) throw DataError("no sample pairs within the variogram max lag");

  std::vector<VariogramBin> out;
  for (int b = 0; b < n_bins; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    if (count[bi] == 0) continue;
    out.push_back({dist_sum[bi] / count[bi], semi_sum[bi] / count[bi], count[bi]});
  }
  return out;
}

namespace detail {

// Shape function f(h; range) so that gamma = nugget + sill * f.
inline double variogram_shape(VariogramKind kind, double h, double range) {
  switch (kind) {
    case VariogramKind::exponential:
      return 1.0 - std::exp(-h / range);
    case VariogramKind::gaussian: {
      const double u = h / range;
      return 1.0 - std::exp(-u * u);
    }
    case VariogramKind::spherical: {
      if (h >= range) return 1.0;
      const double u = h / range;
      return 1.5 * u - 0.5 * u * u * u;
    }
  }
  throw ConfigError("unknown variogram kind");
}

struct WlsFit {
  double nugget = 0.0;
  double sill = 0.0;
  double residual = 0.0;
};

// Weighted least squares in (nugget, sill) for a fixed range; nugget >= 0 and
// sill >= 0 are enforced by projection onto the constraint boundary.
inline WlsFit fit_at_range(const std::vector<VariogramBin>& bins, VariogramKind kind, double range,
                           const std::vector<double>& weights) {
  double sw = 0, swf = 0, swff = 0, swg = 0, swfg = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double w = weights[i];
    const double f = variogram_shape(kind, bins[i].lag, range);
    sw += w;
    swf += w * f;
    swff += w * f * f;
    swg += w * bins[i].semivariance;
    swfg += w * f * bins[i].semivariance;
  }
  WlsFit fit;
  const double det = sw * swff - swf * swf;
  if (std::abs(det) > 1e-300) {
    fit.nugget = (swff * swg - swf * swfg) / det;
    fit.sill = (sw * swfg - swf * swg) / det;
  }
  if (fit.nugget < 0.0 || fit.sill < 0.0) {
    // Try each boundary and keep the better constrained solution.
    const double sill_only = swff > 0.0 ? std::max(swfg / swff, 0.0) : 0.0;
    const double nugget_only = sw > 0.0 ? std::max(swg / sw, 0.0) : 0.0;
    auto residual_of = [&](double n, double s) {
      double r = 0;
      for (std::size_t i = 0; i < bins.size(); ++i) {
        const double f = variogram_shape(kind, bins[i].lag, range);
        const double e = bins[i].semivariance - n - s * f;
        r += weights[i] * e * e;
      }
      return r;
    };
    if (residual_of(0.0, sill_only) <= residual_of(nugget_only, 0.0)) {
      fit.nugget = 0.0;
      fit.sill = sill_only;
    } else {
      fit.nugget = nugget_only;
      fit.sill = 0.0;
    }
  }
  double r = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double f = variogram_shape(kind, bins[i].lag, range);
    const double e = bins[i].semivariance - fit.nugget - fit.sill * f;
    r += weights[i] * e * e;
  }
  fit.residual = r;
  return fit;
}

}  // namespace detail

// Weighted least squares (weights = pair counts), profiled over the range via
// a log-spaced grid refined by golden-section search. Deterministic.
inline VariogramModel fit_variogram(const std::vector<VariogramBin>& bins, VariogramKind kind) {
  if (bins.size() < 3) throw DataError("variogram fit needs at least 3 non-empty bins");
  double h_max = 0.0;
  double semi_max = 0.0;
  std::vector<double> weights;
  for (const auto& b : bins) {
    if (b.pair_count < 1) throw DataError("variogram fit received an empty bin");
    if (!(b.lag > 0.0) || !std::isfinite(b.semivariance) || b.semivariance < 0.0)
      throw DataError("variogram bin is degenerate");
    h_max = std::max(h_max, b.lag);
    semi_max = std::max(semi_max, b.semivariance);
    weights.push_back(static_cast<double>(b.pair_count));
  }

  VariogramModel model;
  model.kind = kind;
  if (semi_max <= 1e-15) {  // constant field
    model.nugget = 0.0;
    model.sill = 1e-12;
    model.range = h_max / 3.0;
    model.degenerate = true;
    return model;
  }

  double h_min = h_max;
  for (const auto& b : bins) h_min = std::min(h_min, b.lag);

  const double lo = h_min / 4.0, hi = 4.0 * h_max;
  double best_range = lo;
  double best_residual = std::numeric_limits<double>::infinity();
  const int n_grid = 64;
  std::vector<double> grid(n_grid);
  for (int i = 0; i < n_grid; ++i)
    grid[static_cast<std::size_t>(i)] =
        lo * std::pow(hi / lo, static_cast<double>(i) / (n_grid - 1));
  int best_i = 0;
  for (int i = 0; i < n_grid; ++i) {
    const double r = detail::fit_at_range(bins, kind, grid[static_cast<std::size_t>(i)], weights)
                         .residual;
    if (r < best_residual) {
      best_residual = r;
      best_i = i;
    }
  }
  best_range = grid[static_cast<std::size_t>(best_i)];

  // Golden-section refinement around the best grid point.
  double a = grid[static_cast<std::size_t>(std::max(0, best_i - 1))];
  double b = grid[static_cast<std::size_t>(std::min(n_grid - 1, best_i + 1))];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = detail::fit_at_range(bins, kind, c, weights).residual;
  double fd = detail::fit_at_range(bins, kind, d, weights).residual;
  while (b - a > 1e-10 * best_range) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = detail::fit_at_range(bins, kind, c, weights).residual;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = detail::fit_at_range(bins, kind, d, weights).residual;
    }
  }
  const double refined = 0.5 * (a + b);
  if (detail::fit_at_range(bins, kind, refined, weights).residual <= best_residual)
    best_range = refined;

  const detail::WlsFit fit = detail::fit_at_range(bins, kind, best_range, weights);
  model.nugget = fit.nugget;
  model.sill = std::max(fit.sill, 1e-12);
  model.range = best_range;
  model.degenerate = fit.sill <= 1e-12;
  return model;
}

struct KrigingWeights {
  Eigen::VectorXd weights;  // length M, sums to 1
  double lagrange = 0.0;    // multiplier of the unbiasedness constraint
};

// Ordinary-Kriging system shared across targets: the (M+1)x(M+1) matrix
// [Gamma 1; 1^T 0] is factorized once; per-target solves and the dual trick
// for whole-grid prediction reuse the factorization. Immutable once built.
class KrigingSystem {
 public:
  KrigingSystem(std::vector<Point> locations, const VariogramModel& model)
      : locations_(std::move(locations)), model_(model) {
    const auto m = static_cast<Eigen::Index>(locations_.size());
    if (m < 2) throw DataError("kriging needs at least 2 samples");
    Eigen::MatrixXd a(m + 1, m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      a(i, i) = 0.0;  // gamma(0) = 0, exact interpolation
      for (Eigen::Index j = 0; j < i; ++j) {
        const double g = semivariance(
            model_, distance(locations_[static_cast<std::size_t>(i)],
                             locations_[static_cast<std::size_t>(j)]));
        a(i, j) = g;
        a(j, i) = g;
      }
      a(i, m) = 1.0;
      a(m, i) = 1.0;
    }
    a(m, m) = 0.0;
    lu_.compute(a);
  }

  Eigen::Index sample_count() const { return static_cast<Eigen::Index>(locations_.size()); }
  const std::vector<Point>& locations() const { return locations_; }
  const VariogramModel& model() const { return model_; }

  // Right-hand side [gamma(target, x_i); 1].
  Eigen::VectorXd rhs(const Point& target) const {
    const auto m = sample_count();
    Eigen::VectorXd b(m + 1);
    for (Eigen::Index i = 0; i < m; ++i)
      b(i) = semivariance(model_, distance(target, locations_[static_cast<std::size_t>(i)]));
    b(m) = 1.0;
    return b;
  }

  KrigingWeights weights_at(const Point& target) const {
    if (model_.degenerate) {  // constant field: any convex weights are exact
      const auto m = sample_count();
      return {Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)), 0.0};
    }
    const Eigen::VectorXd sol = lu_.solve(rhs(target));
    KrigingWeights w;
    w.weights = sol.head(sample_count());
    w.lagrange = sol(sample_count());
    return w;
  }

  // Rows are rhs(q)^T for every cell of the grid, row-major.
  Eigen::MatrixXd target_basis(const Grid& out) const {
    const auto m = sample_count();
    Eigen::MatrixXd basis(out.size(), m + 1);
    const auto pts = out.cell_positions();
    for (int q = 0; q < out.size(); ++q)
      basis.row(q) = rhs(pts[static_cast<std::size_t>(q)]).transpose();
    return basis;
  }

  // Dual formulation: the system matrix is symmetric, so predictions at all
  // targets need one solve with [values; 0] and a matrix-vector product.
  Eigen::VectorXd predict(const Eigen::VectorXd& values, const Eigen::MatrixXd& basis) const {
    const auto m = sample_count();
    if (values.size() != m) throw DataError("kriging values do not match the sample count");
    if (basis.cols() != m + 1) throw DataError("kriging basis does not match the sample count");
    if (model_.degenerate)
      return Eigen::VectorXd::Constant(basis.rows(), values.mean());
    Eigen::VectorXd ext(m + 1);
    ext.head(m) = values;
    ext(m) = 0.0;
    const Eigen::VectorXd dual = lu_.solve(ext);
    return basis * dual;
  }

 private:
  std::vector<Point> locations_;
  VariogramModel model_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline KrigingWeights kriging_weights(const std::vector<Point>& sample_locs, const Point& target,
                                      const VariogramModel& model) {
  std::vector<Point> locs = sample_locs;
  for (std::size_t i = 0; i < locs.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (distance(locs[i], locs[j]) < 1e-9)
        throw DataError("duplicate sample locations make the kriging system singular");
  return KrigingSystem(std::move(locs), model).weights_at(target);
}

// Prediction is sum g_i lambda_i with sum lambda_i = 1; the additive offset
// of the estimator is identically zero and recorded as such.
inline constexpr double kKrigingOffset = 0.0;

inline RadioMap kriging_interpolate(const SampleSet& samples, const Grid& out_grid,
                                    const VariogramModel& model, int time_index = 0) {
  const KrigingSystem system(samples.locations, model);
  const Eigen::MatrixXd basis = system.target_basis(out_grid);
  const Eigen::VectorXd values = system.predict(samples.values, basis);
  return map_from_vector(out_grid, values, time_index);
}

}  // namespace rmtwin
