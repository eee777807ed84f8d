// Command-line front end for the radio map twinning pipeline:
// generate synthetic snapshot series, fit the two-branch twin model, emit
// fused maps, and score them. Exit codes: 0 ok, 2 configuration error,
// 3 data error, 4 numerical error.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rmtwin/cli.hpp"

namespace {

// "100x100" -> (100, 100)
std::pair<int, int> parse_out_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= s.size())
    throw rmtwin::ConfigError("--out-grid expects QxQy, e.g. 100x100");
  try {
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw rmtwin::ConfigError("--out-grid expects QxQy, e.g. 100x100");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radio map twinning: generate, fit, emit, evaluate, power, sweep, export-pgm"};
  app.require_subcommand(1);

  std::string config_path, out_dir, series_path, model_path, map_path, truth_path, twin_path;
  std::string report_out, model_out, map_out, pgm_out, out_grid_arg, parameter;
  std::vector<double> values;
  int t = 0, users_k = 8, n_seeds = 1, fit_n = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double omega = 0.0, kernel_bandwidth = 0.0;
  bool omega_given = false, bandwidth_given = false;
  int rank = 0;

  auto* gen = app.add_subcommand("generate", "write clean and noisy snapshot series");
  gen->add_option("--config", config_path, "scenario config file")->required();
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
    seed_given = true;
  });

  auto* fit = app.add_subcommand("fit", "fit the two-branch twin model to a series");
  fit->add_option("--series", series_path, "snapshot series CSV")->required();
  fit->add_option("--config", config_path, "twin config file");
  fit->add_option("--model-out", model_out, "model file to write")->required();
  fit->add_option("--omega", omega, "fusion weight override")->each([&](const std::string&) {
    omega_given = true;
  });
  fit->add_option("--rank", rank, "compressed-DMD rank override");
  fit->add_option("--kernel-bandwidth", kernel_bandwidth, "rbf bandwidth override")
      ->each([&](const std::string&) { bandwidth_given = true; });
  fit->add_option("--out-grid", out_grid_arg, "output grid as QxQy");
  fit->add_option("--seed", seed, "compression seed override")->each([&](const std::string&) {
    seed_given = true;
  });

  auto* emit = app.add_subcommand("emit", "emit the fused map at a time index");
  emit->add_option("--model", model_path, "model file")->required();
  emit->add_option("--t", t, "time index")->required();
  emit->add_option("--map-out", map_out, "map CSV to write")->required();

  auto* eval = app.add_subcommand("evaluate", "score a twin map against a truth map");
  eval->add_option("--truth", truth_path, "truth map CSV")->required();
  eval->add_option("--twin", twin_path, "twin map CSV")->required();
  eval->add_option("--report-out", report_out, "metric CSV to write")->required();

  auto* power = app.add_subcommand("power", "water-filling sum rate from a twin map");
  power->add_option("--truth", truth_path, "truth map CSV")->required();
  power->add_option("--twin", twin_path, "twin map CSV")->required();
  power->add_option("--users", users_k, "number of users to sample");
  power->add_option("--seed", seed, "user sampling seed");
  power->add_option("--config", config_path, "allocation config file");
  power->add_option("--report-out", report_out, "rate CSV to write")->required();

  auto* sweep = app.add_subcommand("sweep", "metric sweep over a parameter");
  sweep->add_option("--series", series_path, "clean series CSV used as truth")->required();
  sweep->add_option("--parameter", parameter, "omega, noise_variance, edmd_rank, or horizon")
      ->required();
  sweep->add_option("--values", values, "comma-separated settings")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", n_seeds, "number of noise seeds");
  sweep->add_option("--config", config_path, "twin config file");
  sweep->add_option("--fit-n", fit_n, "fit on the first n snapshots only");
  sweep->add_option("--report-out", report_out, "sweep CSV to write")->required();

  auto* pgm = app.add_subcommand("export-pgm", "render a map CSV as an 8-bit PGM");
  pgm->add_option("--map", map_path, "map CSV")->required();
  pgm->add_option("--pgm-out", pgm_out, "PGM file to write")->required();

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      rmtwin::cmd_generate(config_path, out_dir,
                           seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
    } else if (fit->parsed()) {
      rmtwin::FitOverrides over;
      if (omega_given) over.omega = omega;
      if (rank > 0) over.cdmd_rank = rank;
      if (bandwidth_given) over.kernel_bandwidth = kernel_bandwidth;
      if (!out_grid_arg.empty()) {
        const auto [qx, qy] = parse_out_grid(out_grid_arg);
        over.out_nx = qx;
        over.out_ny = qy;
      }
      if (seed_given) over.seed = seed;
      rmtwin::cmd_fit(series_path, config_path, model_out, over);
    } else if (emit->parsed()) {
      rmtwin::cmd_emit(model_path, t, map_out);
    } else if (eval->parsed()) {
      rmtwin::cmd_evaluate(truth_path, twin_path, report_out);
    } else if (power->parsed()) {
      rmtwin::cmd_power(truth_path, twin_path, users_k, seed, config_path, report_out);
    } else if (sweep->parsed()) {
      rmtwin::cmd_sweep(series_path, parameter, values, n_seeds, config_path, fit_n, report_out);
    } else if (pgm->parsed()) {
      rmtwin::cmd_export_pgm(map_path, pgm_out);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const rmtwin::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const rmtwin::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const rmtwin::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  }
  return 0;
}
