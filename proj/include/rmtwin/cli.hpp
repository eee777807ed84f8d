#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rmtwin/io.hpp"

namespace rmtwin {

struct FitOverrides {
  std::optional<double> omega;
  std::optional<int> cdmd_rank;
  std::optional<double> kernel_bandwidth;
  std::optional<int> out_nx;
  std::optional<int> out_ny;
  std::optional<std::uint64_t> seed;  // compression seed
};

inline void cmd_generate(const std::string& config_path, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override) {
  const ConfigFile cfg = parse_config(config_path);
  Scenario sc = scenario_from_config(cfg);
  if (seed_override) sc.seed = *seed_override;
  const SeriesPair data = generate_series(sc);

  std::filesystem::create_directories(out_dir);
  const auto joined = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  save_series(data.clean, joined("clean.csv"));
  save_series(data.noisy, joined("noisy.csv"));

  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file(config_path))));
  std::string manifest = "# manifest v1\n";
  manifest += std::string("config_hash=") + hash + "\n";
  manifest += "seed=" + std::to_string(sc.seed) + "\n";
  manifest += "clean=clean.csv\n";
  manifest += "noisy=noisy.csv\n";
  write_file_atomic(joined("manifest.txt"), manifest);
}

inline void cmd_fit(const std::string& series_path, const std::string& config_path,
                    const std::string& model_out, const FitOverrides& over) {
  const SnapshotSeries series = load_series(series_path);
  const ConfigFile cfg =
      config_path.empty() ? ConfigFile{} : parse_config(config_path);
  TwinConfig tc = twin_config_from_config(cfg, series.grid);
  if (over.omega) tc.omega = *over.omega;
  if (over.cdmd_rank) tc.cdmd_rank = *over.cdmd_rank;
  if (over.kernel_bandwidth) tc.kernel.bandwidth = *over.kernel_bandwidth;
  if (over.out_nx && over.out_ny)
    tc.out_grid = output_grid(series.grid, *over.out_nx, *over.out_ny);
  if (over.seed) tc.compression.seed = *over.seed;
  save_twin_model(twin_fit(series, tc), model_out);
}

inline void cmd_emit(const std::string& model_path, int t, const std::string& map_out) {
  const TwinModel model = load_twin_model(model_path);
  const EmitTrace trace = twin_emit(model, t);
  if (trace.divergent)
    std::fprintf(stderr, "warning: an eigenvalue above the unit circle makes t=%d divergent\n", t);
  save_map(trace.fused, map_out, trace.prediction ? "prediction" : "reconstruction");
}

inline void cmd_evaluate(const std::string& truth_path, const std::string& twin_path,
                         const std::string& report_out) {
  const LoadedMap truth = load_map(truth_path);
  const LoadedMap twin = load_map(twin_path);
  save_metric_report({evaluate_map(truth.map, twin.map)}, report_out);
}

inline void cmd_power(const std::string& truth_path, const std::string& twin_path, int users_k,
                      std::uint64_t seed, const std::string& config_path,
                      const std::string& report_out) {
  const LoadedMap truth = load_map(truth_path);
  const LoadedMap twin = load_map(twin_path);
  const AllocationConfig ac = config_path.empty()
                                  ? AllocationConfig{}
                                  : allocation_from_config(parse_config(config_path));
  const std::vector<int> users = sample_users(truth.map.grid, users_k, seed);
  const RateReport r = evaluate_allocation(truth.map, twin.map, users, ac);
  save_power_report({{seed, users_k, r.rate_twin, r.rate_oracle}}, report_out);
}

namespace detail {

// Per-seed measurement noise for sweeps; the input series is treated as the
// clean truth.
inline SnapshotSeries add_sweep_noise(const SnapshotSeries& clean, double variance,
                                      std::uint64_t seed) {
  if (variance < 0.0 || !std::isfinite(variance))
    throw ConfigError("sweep: noise variance must be non-negative");
  SnapshotSeries noisy = clean;
  const CounterRng rng(seed, streams::kSweep);
  const double sigma = std::sqrt(variance);
  const auto m = static_cast<std::uint64_t>(clean.values.rows());
  for (Eigen::Index t = 0; t < noisy.values.cols(); ++t)
    for (Eigen::Index i = 0; i < noisy.values.rows(); ++i)
      noisy.values(i, t) +=
          sigma * rng.normal(static_cast<std::uint64_t>(t) * m + static_cast<std::uint64_t>(i));
  return noisy;
}

inline SnapshotSeries head_series(const SnapshotSeries& s, int n) {
  if (n <= 0 || n >= s.values.cols()) return s;
  SnapshotSeries out;
  out.grid = s.grid;
  out.values = s.values.leftCols(n).eval();
  out.times.assign(s.times.begin(), s.times.begin() + n);
  return out;
}

}  // namespace detail

// One CSV row per (setting, seed) cell. The series file is the clean truth;
// each cell fits on a freshly noised copy and scores the emitted map against
// the Kriged clean snapshot.
inline void cmd_sweep(const std::string& series_path, const std::string& parameter,
                      const std::vector<double>& values, int n_seeds,
                      const std::string& config_path, int fit_n_flag,
                      const std::string& report_out) {
  if (values.empty()) throw ConfigError("sweep: no settings given");
  if (n_seeds < 1) throw ConfigError("sweep: need at least one seed");
  const bool known = parameter == "omega" || parameter == "noise_variance" ||
                     parameter == "edmd_rank" || parameter == "horizon";
  if (!known) throw ConfigError("sweep: unknown parameter '" + parameter + "'");

  const SnapshotSeries clean = load_series(series_path);
  const ConfigFile cfg = config_path.empty() ? ConfigFile{} : parse_config(config_path);
  const TwinConfig base = twin_config_from_config(cfg, clean.grid);
  const double base_variance = config_double(cfg, "noise_variance", 10.0);
  const int eval_t = static_cast<int>(config_int(cfg, "eval_t", 14));
  const int fit_n =
      fit_n_flag > 0 ? fit_n_flag : static_cast<int>(config_int(cfg, "fit_n", 0));

  std::string out = "parameter,setting,seed,t,mse,psnr,ssim,corr,wall_ms\n";
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(n_seeds); ++seed) {
    // Horizon cells share one fit per seed; other parameters refit per cell.
    TwinModel horizon_model;
    bool horizon_fitted = false;
    for (const double setting : values) {
      const auto started = std::chrono::steady_clock::now();

      TwinConfig tc = base;
      double variance = base_variance;
      int t = eval_t;
      if (parameter == "omega") tc.omega = setting;
      if (parameter == "noise_variance") variance = setting;
      if (parameter == "edmd_rank") tc.edmd_rank = static_cast<int>(setting);
      if (parameter == "horizon") t = static_cast<int>(setting);
      if (t < 0 || t >= clean.values.cols())
        throw DataError("sweep: no truth snapshot at t=" + std::to_string(t));

      const SnapshotSeries noisy = detail::add_sweep_noise(clean, variance, seed);
      EmitTrace trace;
      VariogramModel truth_variogram;
      if (parameter == "horizon") {
        if (!horizon_fitted) {
          horizon_model = twin_fit(detail::head_series(noisy, fit_n), tc);
          horizon_fitted = true;
        }
        trace = twin_emit(horizon_model, t);
        truth_variogram = horizon_model.variogram;
      } else {
        const TwinModel model = twin_fit(detail::head_series(noisy, fit_n), tc);
        trace = twin_emit(model, t);
        truth_variogram = model.variogram;
      }

      const RadioMap truth = kriging_interpolate(
          samples_from_grid(clean.grid, clean.values.col(t)), tc.out_grid, truth_variogram, t);
      const MetricReport r = evaluate_map(truth, trace.fused);

      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
              .count();
      out += parameter + "," + detail::fmt_g17(setting) + "," + std::to_string(seed) + "," +
             std::to_string(t) + "," + format_metric_value(r.mse) + "," +
             format_metric_value(r.psnr) + "," + format_metric_value(r.ssim) + "," +
             format_metric_value(r.corr) + "," + detail::fmt_g17(wall_ms) + "\n";
    }
  }
  write_file_atomic(report_out, out);
}

inline void cmd_export_pgm(const std::string& map_path, const std::string& pgm_out) {
  export_pgm(load_map(map_path).map, pgm_out);
}

}  // namespace rmtwin
