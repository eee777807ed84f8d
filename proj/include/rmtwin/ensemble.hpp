#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "rmtwin/dmd.hpp"
#include "rmtwin/dmd_variants.hpp"
#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/kriging.hpp"

namespace rmtwin {

// Binary median-threshold mask. Entries are exactly 0 or 1.
struct Mask {
  Eigen::MatrixXd values;
};

struct MedianMask {
  Mask mask;
  double median = 0.0;
};

// Entry 1 where the map value is >= the whole-map median; the median of an
// even count is the mean of the two central values.
inline MedianMask median_mask(const RadioMap& map) {
  if (!map.values.allFinite()) throw DataError("median_mask: map has non-finite entries");
  const Eigen::Index n = map.values.size();
  if (n == 0) throw DataError("median_mask: empty map");
  std::vector<double> sorted(map.values.data(), map.values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const auto half = static_cast<std::size_t>(n / 2);
  const double median =
      (n % 2 == 1) ? sorted[half] : 0.5 * (sorted[half - 1] + sorted[half]);

  MedianMask out;
  out.median = median;
  out.mask.values = (map.values.array() >= median).cast<double>();
  return out;
}

// Everything produced while emitting one fused frame.
struct EmitTrace {
  RadioMap map_c;      // Kriged compressed-DMD branch
  RadioMap map_e;      // Kriged kernel-DMD branch
  double median = 0.0;
  Mask mask;           // median-threshold mask from map_e
  RadioMap fused;
  bool prediction = false;  // t at or beyond the training window
  bool divergent = false;
};

// Median-masked blend: the mask keeps map_c where map_e is strong, and mixes
// both branches with weight omega elsewhere.
inline EmitTrace fuse(const RadioMap& map_c, const RadioMap& map_e, double omega) {
  if (map_c.values.rows() != map_e.values.rows() ||
      map_c.values.cols() != map_e.values.cols())
    throw DataError("fuse: branch map dimensions differ");
  if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("fuse: omega must lie in [0, 1]");

  EmitTrace trace;
  trace.map_c = map_c;
  trace.map_e = map_e;
  MedianMask mm = median_mask(map_e);
  trace.median = mm.median;
  trace.mask = std::move(mm.mask);

  const Eigen::ArrayXXd m = trace.mask.values.array();
  const Eigen::ArrayXXd inv = 1.0 - m;
  const Eigen::ArrayXXd g0 = map_c.values.array() * m;
  const Eigen::ArrayXXd g1c = map_c.values.array() * inv;
  const Eigen::ArrayXXd g1e = map_e.values.array() * inv;

  trace.fused.grid = map_c.grid;
  trace.fused.time_index = map_c.time_index;
  trace.fused.values = (g0 + omega * g1c + (1.0 - omega) * g1e).matrix();

  // Closed-form restatement of the blend, asserted on every emit.
  const Eigen::ArrayXXd closed =
      map_c.values.array() * m +
      (omega * map_c.values.array() + (1.0 - omega) * map_e.values.array()) * inv;
  if (((trace.fused.values.array() - closed).abs() > 1e-12).any())
    throw NumericalError("fuse: blend identity violated");
  return trace;
}

struct TwinConfig {
  int cdmd_rank = 5;
  CompressionSpec compression;   // p = 0 picks the default compressed dimension
  KernelSpec kernel;             // bandwidth 0 resolves to the median heuristic
  int edmd_rank = 0;             // 0 picks N - 2 for an N-snapshot series
  double omega = 0.6;            // useful range 0.4 to 0.8
  Grid out_grid;
  VariogramKind variogram_kind = VariogramKind::exponential;
  int variogram_bins = 15;
  double variogram_max_lag = 0.0;  // 0 picks half the grid diagonal
  bool refit_variogram_per_frame = false;
};

struct TwinModel {
  DmdModel cdmd;
  EdmdModel edmd;
  VariogramModel variogram;
  double omega = 0.6;
  Grid grid_in;
  Grid grid_out;
  int n_train = 0;
  VariogramKind variogram_kind = VariogramKind::exponential;
  int variogram_bins = 15;
  double variogram_max_lag = 0.0;
  bool refit_variogram_per_frame = false;
  // Shared interpolation machinery; immutable after fitting, so concurrent
  // emits may reuse it.
  std::shared_ptr<const KrigingSystem> kriging;
  std::shared_ptr<const Eigen::MatrixXd> basis;
};

namespace detail {

inline double default_max_lag(const Grid& g) {
  return 0.5 * std::hypot((g.nx - 1) * g.spacing, (g.ny - 1) * g.spacing);
}

inline VariogramModel fit_field_variogram(const Grid& grid, const Eigen::VectorXd& values,
                                          VariogramKind kind, int bins, double max_lag) {
  const SampleSet samples = samples_from_grid(grid, values);
  return fit_variogram(empirical_variogram(samples, bins, max_lag), kind);
}

}  // namespace detail

inline TwinModel twin_fit(const SnapshotSeries& series, const TwinConfig& config) {
  if (!(config.omega >= 0.0 && config.omega <= 1.0))
    throw ConfigError("twin_fit: omega must lie in [0, 1]");
  if (config.out_grid.nx < 2 || config.out_grid.ny < 2)
    throw ConfigError("twin_fit: output grid is not set");

  const SnapshotPair pair = split_snapshots(series);
  const int n = static_cast<int>(series.values.cols());

  TwinModel model;
  model.cdmd = cdmd_fit(pair, config.compression, config.cdmd_rank);
  const int edmd_rank = config.edmd_rank > 0 ? config.edmd_rank : n - 2;
  model.edmd = edmd_fit(pair, config.kernel, edmd_rank);

  model.omega = config.omega;
  model.grid_in = series.grid;
  model.grid_out = config.out_grid;
  model.n_train = n;
  model.variogram_kind = config.variogram_kind;
  model.variogram_bins = config.variogram_bins;
  model.variogram_max_lag = config.variogram_max_lag > 0.0
                                ? config.variogram_max_lag
                                : detail::default_max_lag(series.grid);
  model.refit_variogram_per_frame = config.refit_variogram_per_frame;

  model.variogram = detail::fit_field_variogram(series.grid, series.values.col(0),
                                                model.variogram_kind, model.variogram_bins,
                                                model.variogram_max_lag);
  auto system = std::make_shared<KrigingSystem>(series.grid.cell_positions(), model.variogram);
  model.basis = std::make_shared<const Eigen::MatrixXd>(system->target_basis(config.out_grid));
  model.kriging = std::move(system);
  return model;
}

namespace detail {

inline RadioMap krige_branch(const TwinModel& model, const Eigen::VectorXd& coarse, int t) {
  if (model.refit_variogram_per_frame) {
    const VariogramModel vg = fit_field_variogram(model.grid_in, coarse, model.variogram_kind,
                                                  model.variogram_bins, model.variogram_max_lag);
    return kriging_interpolate(samples_from_grid(model.grid_in, coarse), model.grid_out, vg, t);
  }
  const Eigen::VectorXd values = model.kriging->predict(coarse, *model.basis);
  return map_from_vector(model.grid_out, values, t);
}

}  // namespace detail

inline EmitTrace twin_emit(const TwinModel& model, int t) {
  if (t < 0) throw ConfigError("twin_emit: time index must be non-negative");
  if (!model.kriging || !model.basis) throw ConfigError("twin_emit: model is not fitted");

  const StateEval c = dmd_state(model.cdmd, t);
  const StateEval e = edmd_state(model.edmd, t);

  const RadioMap map_c = detail::krige_branch(model, c.value, t);
  const RadioMap map_e = detail::krige_branch(model, e.value, t);

  EmitTrace trace = fuse(map_c, map_e, model.omega);
  trace.prediction = t >= model.n_train;
  trace.divergent = c.divergent || e.divergent;
  return trace;
}

}  // namespace rmtwin
