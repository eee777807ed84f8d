// Acceptance gate: eleven end-to-end criteria, one pass/fail line each.
// Exits 0 only when every criterion passes.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rmtwin/cli.hpp"
#include "test_util.hpp"

using namespace rmtwin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Worst-case distance from each expected eigenvalue to the fitted set.
double spectral_distance(const Eigen::VectorXcd& fitted,
                         const std::vector<std::complex<double>>& expected) {
  double worst = 0.0;
  for (const std::complex<double>& want : expected) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < fitted.size(); ++j)
      best = std::min(best, std::abs(fitted(j) - want));
    worst = std::max(worst, best);
  }
  return worst;
}

// Truth map on the twin's output grid: the clean snapshot pushed through the
// model's cached Kriging system. Reuses the factorization and target basis.
RadioMap kriged_truth(const TwinModel& model, const Eigen::VectorXd& clean_col, int t) {
  return map_from_vector(model.grid_out, model.kriging->predict(clean_col, *model.basis), t);
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// 1. All three decompositions recover a known four-mode spectrum.
Outcome spectral_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const auto sys = testutil::make_linear_system(16, 20);
  SnapshotPair p;
  p.x = sys.series.leftCols(19);
  p.xp = sys.series.rightCols(19);

  const DmdModel plain = dmd_fit(p, 4);
  const DmdModel compressed = cdmd_fit(p, {16, CompressionKind::identity, 0}, 4);
  const EdmdModel kernelized = edmd_fit(p, linear_kernel(), 4);

  const double worst = std::max({spectral_distance(plain.eigenvalues, sys.spectrum),
                                 spectral_distance(compressed.eigenvalues, sys.spectrum),
                                 spectral_distance(kernelized.eigenvalues, sys.spectrum)});
  const double elapsed = seconds_since(start);
  return {worst < 1e-6 && elapsed < 1.0,
          fmt("worst eigenvalue error %.2e (tol 1e-6), %.3f s (limit 1 s)", worst, elapsed)};
}

// 2. Noiseless rank-5 series is reconstructed to machine-level accuracy.
Outcome reconstruction_exactness() {
  const SnapshotSeries s = testutil::make_rank5_series();
  const SnapshotPair p = split_snapshots(s);
  const DmdModel plain = dmd_fit(p, 5);
  const DmdModel compressed = cdmd_fit(p, {64, CompressionKind::gaussian, 1}, 5);
  const EdmdModel kernelized = edmd_fit(p, linear_kernel(), 5);

  const auto window_error = [&](auto&& state_at) {
    Eigen::MatrixXd recon(s.values.rows(), s.values.cols());
    for (int t = 0; t < s.values.cols(); ++t) recon.col(t) = state_at(t);
    return (recon - s.values).norm() / s.values.norm();
  };
  const double e_dmd = window_error([&](int t) { return dmd_state(plain, t).value; });
  const double e_cdmd = window_error([&](int t) { return dmd_state(compressed, t).value; });
  const double e_edmd = window_error([&](int t) { return edmd_state(kernelized, t).value; });
  const double worst = std::max({e_dmd, e_cdmd, e_edmd});
  return {worst < 1e-6,
          fmt("window errors dmd %.2e, cdmd %.2e, edmd %.2e (tol 1e-6)", e_dmd, e_cdmd, e_edmd)};
}

// 3. Mask and fusion identities hold elementwise.
Outcome fusion_identities() {
  double worst = 0.0;

  RadioMap hand;
  hand.grid = make_grid(2, 2, 1.0);
  hand.values.resize(2, 2);
  hand.values << 1, 2, 3, 4;
  const MedianMask mm = median_mask(hand);
  Eigen::MatrixXd want(2, 2);
  want << 0, 0, 1, 1;
  worst = std::max(worst, std::abs(mm.median - 2.5));
  worst = std::max(worst, (mm.mask.values - want).cwiseAbs().maxCoeff());

  RadioMap coarse, fine;
  coarse.grid = fine.grid = make_grid(8, 6, 2.0);
  coarse.values.resize(6, 8);
  fine.values.resize(6, 8);
  const CounterRng rng(31, 7);
  for (int i = 0; i < coarse.values.size(); ++i) {
    coarse.values(i / 8, i % 8) = -75.0 + 8.0 * rng.normal(static_cast<std::uint64_t>(i));
    fine.values(i / 8, i % 8) = -75.0 + 8.0 * rng.normal(static_cast<std::uint64_t>(i) + 4096);
  }

  // full-weight fusion returns the coarse branch
  worst = std::max(worst, (fuse(coarse, fine, 1.0).fused.values - coarse.values)
                              .cwiseAbs()
                              .maxCoeff());
  // fusing a map with itself is the identity
  worst = std::max(worst,
                   (fuse(coarse, coarse, 0.6).fused.values - coarse.values).cwiseAbs().maxCoeff());

  // masked closed form, computed independently
  const EmitTrace tr = fuse(coarse, fine, 0.37);
  const Eigen::MatrixXd& m = tr.mask.values;
  const Eigen::MatrixXd blend = coarse.values.array() * m.array() +
                                (0.37 * coarse.values.array() + 0.63 * fine.values.array()) *
                                    (1.0 - m.array());
  worst = std::max(worst, (tr.fused.values - blend).cwiseAbs().maxCoeff());

  return {worst <= 1e-12, fmt("worst identity deviation %.2e (tol 1e-12)", worst)};
}

// 4. Kriging weights are unbiased, exact at samples, and match a dense solve.
Outcome kriging_suite() {
  Scenario sc = testutil::default_scenario();
  const Eigen::VectorXd shadow = shadowing_field(sc.grid, sc.channel, sc.seed);
  const SampleSet samples = samples_from_grid(sc.grid, shadow);
  const VariogramModel vg =
      fit_variogram(empirical_variogram(samples, 15, detail::default_max_lag(sc.grid)),
                    VariogramKind::exponential);

  const KrigingSystem system(samples.locations, vg);
  const CounterRng rng(5, 9);
  double sum_err = 0.0;
  for (int i = 0; i < 25; ++i) {
    const Point target{145.0 * rng.uniform(2 * static_cast<std::uint64_t>(i)),
                       145.0 * rng.uniform(2 * static_cast<std::uint64_t>(i) + 1)};
    sum_err = std::max(sum_err, std::abs(system.weights_at(target).weights.sum() - 1.0));
  }

  // exact interpolation with the nugget removed
  VariogramModel smooth = vg;
  smooth.nugget = 0.0;
  const KrigingSystem exact(samples.locations, smooth);
  double sample_err = 0.0;
  for (std::size_t i = 0; i < samples.locations.size(); i += 37) {
    const Eigen::VectorXd w = exact.weights_at(samples.locations[i]).weights;
    sample_err = std::max(
        sample_err, std::abs(w.dot(samples.values) - samples.values(static_cast<Eigen::Index>(i))));
  }

  // three samples against the bordered dense system
  const SampleSet tri = make_sample_set({{0.0, 0.0}, {10.0, 0.0}, {4.0, 8.0}},
                                        Eigen::Vector3d(-60.0, -64.0, -58.0));
  VariogramModel tm{VariogramKind::exponential, 0.5, 9.0, 12.0, false};
  const KrigingSystem small(tri.locations, tm);
  const Point at{5.0, 3.0};
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a(i, j) = semivariance(tm, distance(tri.locations[static_cast<std::size_t>(i)],
                                          tri.locations[static_cast<std::size_t>(j)]));
  a.block<1, 3>(3, 0).setOnes();
  a.block<3, 1>(0, 3).setOnes();
  Eigen::Vector4d rhs;
  for (int i = 0; i < 3; ++i)
    rhs(i) = semivariance(tm, distance(tri.locations[static_cast<std::size_t>(i)], at));
  rhs(3) = 1.0;
  const Eigen::Vector4d dense = Eigen::FullPivLU<Eigen::Matrix4d>(a).solve(rhs);
  const double tri_err = (small.weights_at(at).weights - dense.head<3>()).cwiseAbs().maxCoeff();

  const bool pass = sum_err <= 1e-10 && sample_err <= 1e-9 && tri_err <= 1e-9;
  return {pass, fmt("weight-sum error %.2e (tol 1e-10), sample error %.2e, dense-solve gap %.2e "
                    "(tol 1e-9)",
                    sum_err, sample_err, tri_err)};
}

// 5. Metric identities and the psnr-mse link.
Outcome metric_identities() {
  RadioMap x;
  x.grid = make_grid(16, 12, 1.0);
  x.values.resize(12, 16);
  const CounterRng rng(21, 3);
  for (int i = 0; i < x.values.size(); ++i)
    x.values(i / 16, i % 16) = -70.0 + 9.0 * rng.normal(static_cast<std::uint64_t>(i));

  double worst = std::abs(mse(x, x));
  worst = std::max(worst, std::abs(ssim(x, x) - 1.0));

  RadioMap affine = x;
  affine.values = 2.5 * x.values.array() + 7.0;
  worst = std::max(worst, std::abs(correlation(x, affine) - 1.0));
  affine.values = -1.5 * x.values.array() + 3.0;
  worst = std::max(worst, std::abs(correlation(x, affine) + 1.0));

  double link = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RadioMap twin = x;
    const CounterRng tr(400 + static_cast<std::uint64_t>(trial), 5);
    for (int i = 0; i < twin.values.size(); ++i)
      twin.values(i / 16, i % 16) += 2.0 * tr.normal(static_cast<std::uint64_t>(i));
    const double m = mse(x, twin);
    const double peak = std::abs(x.values.maxCoeff());  // signed maximum, then magnitude
    const double rebuilt = std::pow(10.0, psnr(x, twin) / 10.0) * m;
    link = std::max(link, std::abs(rebuilt - peak * peak) / (peak * peak));
  }

  const bool pass = worst <= 1e-12 && link <= 1e-9;
  return {pass, fmt("identity deviation %.2e (tol 1e-12), psnr-mse link error %.2e (tol 1e-9)",
                    worst, link)};
}

// 6. Mean MSE over the fusion weight has an interior minimum.
Outcome fusion_weight_trend() {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kSeeds = 20;
  std::vector<double> mse_mean(11, 0.0), ssim_mean(11, 0.0);

  for (int s = 0; s < kSeeds; ++s) {
    Scenario sc = testutil::default_scenario();
    sc.seed = 100 + static_cast<std::uint64_t>(s);
    const SeriesPair data = generate_series(sc);
    TwinConfig tc;
    tc.out_grid = output_grid(sc.grid, 100, 100);
    TwinModel model = twin_fit(data.noisy, tc);
    const RadioMap truth = kriged_truth(model, data.clean.values.col(14), 14);
    for (int wi = 0; wi <= 10; ++wi) {
      model.omega = wi / 10.0;
      const EmitTrace tr = twin_emit(model, 14);
      mse_mean[static_cast<std::size_t>(wi)] += mse(truth, tr.fused) / kSeeds;
      ssim_mean[static_cast<std::size_t>(wi)] += ssim(truth, tr.fused) / kSeeds;
    }
  }

  const auto argmin = static_cast<int>(
      std::min_element(mse_mean.begin(), mse_mean.end()) - mse_mean.begin());
  const double elapsed = seconds_since(start);
  const bool pass =
      argmin > 0 && argmin < 10 && ssim_mean[10] >= ssim_mean[0] && elapsed < 120.0;
  return {pass, fmt("mean MSE minimum at weight %.1f (interior), ssim %.4f at 1 vs %.4f at 0, "
                    "%.1f s (limit 120 s)",
                    argmin / 10.0, ssim_mean[10], ssim_mean[0], elapsed)};
}

// 7. The fused map degrades more slowly with noise than the fine branch.
Outcome noise_robustness_trend() {
  const std::vector<double> variances{1.0, 5.0, 10.0, 20.0, 40.0};
  constexpr int kSeeds = 20;
  std::vector<double> ens_ssim(variances.size(), 0.0), fine_ssim(variances.size(), 0.0);
  std::vector<int> mse_wins(variances.size(), 0);

  for (std::size_t vi = 0; vi < variances.size(); ++vi) {
    for (int s = 0; s < kSeeds; ++s) {
      Scenario sc = testutil::default_scenario();
      sc.seed = 300 + static_cast<std::uint64_t>(s);
      sc.noise_variance = variances[vi];
      const SeriesPair data = generate_series(sc);
      TwinConfig tc;
      tc.out_grid = output_grid(sc.grid, 100, 100);
      const TwinModel model = twin_fit(data.noisy, tc);
      const RadioMap truth = kriged_truth(model, data.clean.values.col(14), 14);
      const EmitTrace tr = twin_emit(model, 14);
      ens_ssim[vi] += ssim(truth, tr.fused) / kSeeds;
      fine_ssim[vi] += ssim(truth, tr.map_e) / kSeeds;
      if (mse(truth, tr.fused) <= mse(truth, tr.map_e)) ++mse_wins[vi];
    }
  }

  const double slope_ens = ls_slope(variances, ens_ssim);
  const double slope_fine = ls_slope(variances, fine_ssim);
  bool wins_ok = true;
  for (std::size_t vi = 0; vi < variances.size(); ++vi)
    if (variances[vi] >= 10.0 && mse_wins[vi] < 16) wins_ok = false;

  const bool pass = slope_fine < 0.0 && std::abs(slope_ens) < std::abs(slope_fine) && wins_ok;
  return {pass, fmt("ssim slope fused %.2e vs fine %.2e, mse wins %d/%d/%d of 20 at variance "
                    "10/20/40 (need 16)",
                    slope_ens, slope_fine, mse_wins[2], mse_wins[3], mse_wins[4])};
}

// 8. Full-scale fit plus one emit stays under the latency bound.
Outcome emit_latency() {
  Scenario sc = testutil::default_scenario();
  const SeriesPair data = generate_series(sc);
  TwinConfig tc;
  tc.out_grid = output_grid(sc.grid, 100, 100);

  const auto start = std::chrono::steady_clock::now();
  const TwinModel model = twin_fit(data.noisy, tc);
  const EmitTrace tr = twin_emit(model, 14);
  const double elapsed = seconds_since(start);

  const bool shape_ok = tr.fused.values.rows() == 100 && tr.fused.values.cols() == 100;
  return {elapsed < 5.0 && shape_ok,
          fmt("fit plus emit %.2f s at state 900, out grid 100x100 (limit 5 s)", elapsed)};
}

// 9. Prediction quality declines by less than 20% over thirty future steps.
Outcome prediction_horizon() {
  constexpr int kSeeds = 20;
  constexpr int kTrain = 20;
  constexpr int kLast = 50;
  std::vector<double> ssim_mean(kLast - kTrain + 1, 0.0);

  for (int s = 0; s < kSeeds; ++s) {
    Scenario sc = testutil::default_scenario();
    sc.seed = 500 + static_cast<std::uint64_t>(s);
    sc.n_snapshots = kLast + 1;
    const SeriesPair data = generate_series(sc);
    TwinConfig tc;
    tc.out_grid = output_grid(sc.grid, 100, 100);
    const TwinModel model = twin_fit(detail::head_series(data.noisy, kTrain), tc);
    for (int t = kTrain; t <= kLast; ++t) {
      const RadioMap truth = kriged_truth(model, data.clean.values.col(t), t);
      ssim_mean[static_cast<std::size_t>(t - kTrain)] +=
          ssim(truth, twin_emit(model, t).fused) / kSeeds;
    }
  }

  const double base = ssim_mean.front();
  const double worst = *std::min_element(ssim_mean.begin(), ssim_mean.end());
  const double decline = (base - worst) / base;
  return {decline < 0.20, fmt("mean ssim %.4f at the training edge, worst %.4f over thirty "
                              "steps, relative decline %.1f%% (limit 20%%)",
                              base, worst, 100.0 * decline)};
}

// Reference solver: scan the water level by bisection on total spent power.
Eigen::VectorXd bisection_water_filling(const Eigen::VectorXd& gains,
                                        const AllocationConfig& config) {
  const double total = dbm_to_watts(config.total_power_dbm);
  const double noise = dbm_to_watts(config.noise_power_dbm);
  Eigen::VectorXd floors = noise / gains.array();
  double lo = floors.minCoeff();
  double hi = lo + total;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double spent = (mid - floors.array()).max(0.0).sum();
    (spent < total ? lo : hi) = mid;
  }
  return (0.5 * (lo + hi) - floors.array()).max(0.0);
}

// 10. Water-filling satisfies the optimality conditions and rate trends.
Outcome water_filling_suite() {
  const CounterRng rng(4242, 11);
  double worst_kkt = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const auto base = static_cast<std::uint64_t>(inst) * 32;
    const int k = 1 + static_cast<int>(rng.uniform_index(base, 12));
    AllocationConfig cfg;
    cfg.total_power_dbm = 20.0 + 30.0 * rng.uniform(base + 1);
    cfg.noise_power_dbm = -60.0 + 40.0 * rng.uniform(base + 2);
    Eigen::VectorXd gains(k);
    for (int i = 0; i < k; ++i)
      gains(i) = std::pow(10.0, -6.0 + 6.0 * rng.uniform(base + 3 + static_cast<std::uint64_t>(i)));

    const Eigen::VectorXd p = water_filling(gains, cfg);
    const Eigen::VectorXd q = bisection_water_filling(gains, cfg);
    const double total = dbm_to_watts(cfg.total_power_dbm);
    const double noise = dbm_to_watts(cfg.noise_power_dbm);

    double residual = std::abs(p.sum() - total);
    residual = std::max(residual, (p - q).cwiseAbs().maxCoeff());
    double level = 0.0;
    for (int i = 0; i < k; ++i)
      if (p(i) > 0.0) level = std::max(level, p(i) + noise / gains(i));
    for (int i = 0; i < k; ++i) {
      const double floor = noise / gains(i);
      if (p(i) > 0.0) residual = std::max(residual, std::abs(p(i) + floor - level));
      else residual = std::max(residual, std::max(0.0, level - floor));
    }
    worst_kkt = std::max(worst_kkt, residual / total);
  }

  // rate trend on a fitted twin: more users, more sum rate; never above oracle
  Scenario sc = testutil::default_scenario();
  const SeriesPair data = generate_series(sc);
  TwinConfig tc;
  tc.out_grid = output_grid(sc.grid, 100, 100);
  const TwinModel model = twin_fit(data.noisy, tc);
  const RadioMap truth = kriged_truth(model, data.clean.values.col(14), 14);
  const RadioMap twin = twin_emit(model, 14).fused;

  const AllocationConfig acfg;
  bool never_above = true;
  std::vector<double> mean_rate;
  for (int k = 2; k <= 14; k += 2) {
    double mean = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<int> users =
          sample_users(model.grid_out, k, static_cast<std::uint64_t>(trial));
      const RateReport r = evaluate_allocation(truth, twin, users, acfg);
      if (r.rate_twin > r.rate_oracle * (1.0 + 1e-12)) never_above = false;
      mean += r.rate_twin / 200.0;
    }
    mean_rate.push_back(mean);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < mean_rate.size(); ++i)
    if (mean_rate[i] <= mean_rate[i - 1]) increasing = false;

  const bool pass = worst_kkt <= 1e-9 && increasing && never_above;
  return {pass, fmt("worst optimality residual %.2e of budget (tol 1e-9), mean rate %s over "
                    "2..14 users, twin %s oracle",
                    worst_kkt, increasing ? "strictly increasing" : "NOT increasing",
                    never_above ? "never exceeds" : "EXCEEDS")};
}

// 11. Two full command-line pipeline runs produce byte-identical files.
Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / "rmtwin_acceptance";
  fs::remove_all(root);
  const std::string cfg = std::string(RMTWIN_CONFIG_DIR) + "/default.cfg";

  const auto run = [&](const std::string& args) {
    const std::string cmd = std::string(RMTWIN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw DataError("pipeline step failed: " + args);
  };

  for (const char* leg : {"a", "b"}) {
    const std::string d = (root / leg).string();
    fs::create_directories(d);
    run("generate --config " + cfg + " --out-dir " + d);
    run("fit --series " + d + "/noisy.csv --config " + cfg + " --model-out " + d + "/model.txt");
    run("emit --model " + d + "/model.txt --t 10 --map-out " + d + "/map10.csv");
    run("emit --model " + d + "/model.txt --t 14 --map-out " + d + "/map14.csv");
    run("evaluate --truth " + d + "/map10.csv --twin " + d + "/map14.csv --report-out " + d +
        "/report.csv");
    run("power --truth " + d + "/map10.csv --twin " + d + "/map14.csv --users 8 --seed 3 "
        "--config " + cfg + " --report-out " + d + "/power.csv");
  }

  int identical = 0;
  const std::vector<std::string> files{"clean.csv", "noisy.csv", "manifest.txt", "model.txt",
                                       "map10.csv", "map14.csv", "report.csv", "power.csv"};
  for (const std::string& f : files)
    if (read_file((root / "a" / f).string()) == read_file((root / "b" / f).string()))
      ++identical;

  return {identical == static_cast<int>(files.size()),
          fmt("%d of %zu pipeline files byte-identical across reruns", identical, files.size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {"spectral recovery on a known linear system", spectral_oracle},
      {"noiseless low-rank reconstruction exactness", reconstruction_exactness},
      {"mask and fusion identities", fusion_identities},
      {"kriging weight and exactness suite", kriging_suite},
      {"metric identities", metric_identities},
      {"interior optimum of the fusion weight", fusion_weight_trend},
      {"ensemble noise robustness against the fine branch", noise_robustness_trend},
      {"full-scale fit and emit latency", emit_latency},
      {"prediction decline over a thirty-step horizon", prediction_horizon},
      {"water-filling optimality and rate trends", water_filling_suite},
      {"byte-identical pipeline reruns", pipeline_determinism},
  };

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (out.pass) ++passed;
    std::printf("[%s] %2zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                out.detail.c_str());
    std::fflush(stdout);
  }

  std::printf("acceptance: %d/%zu criteria passed\n", passed, criteria.size());
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
