#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/rng.hpp"

namespace rmtwin {

struct AllocationConfig {
  double total_power_dbm = 40.0;
  double noise_power_dbm = -40.0;
  double bandwidth_hz = 50e6;
};

inline void validate_allocation_config(const AllocationConfig& c) {
  if (!(c.bandwidth_hz > 0.0) || !std::isfinite(c.bandwidth_hz))
    throw ConfigError("allocation: bandwidth must be positive");
  if (!std::isfinite(c.total_power_dbm) || !std::isfinite(c.noise_power_dbm))
    throw ConfigError("allocation: power levels must be finite");
}

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Uniform sample of k distinct cell indices, deterministic per seed.
inline std::vector<int> sample_users(const Grid& grid, int k, std::uint64_t seed) {
  const int n = grid.size();
  if (k < 1) throw ConfigError("sample_users: need at least one user");
  if (k > n) throw ConfigError("sample_users: more users than grid cells");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const CounterRng rng(seed, streams::kUsers);
  // Partial Fisher-Yates: only the first k slots need shuffling.
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i),
                                                          static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

// Water-filling over linear power gains: maximize sum log2(1 + p_i g_i / n)
// subject to sum p_i = P, p_i >= 0. The water level comes from exact
// sorted-threshold elimination, no iteration. Nonpositive gains get zero power.
inline Eigen::VectorXd water_filling(const Eigen::VectorXd& gains,
                                     const AllocationConfig& config) {
  validate_allocation_config(config);
  if (gains.size() == 0) throw DataError("water_filling: no channels");
  const double total = dbm_to_watts(config.total_power_dbm);
  const double noise = dbm_to_watts(config.noise_power_dbm);

  std::vector<std::pair<double, int>> floors;  // (n/g_i, channel)
  for (Eigen::Index i = 0; i < gains.size(); ++i)
    if (gains(i) > 0.0 && std::isfinite(gains(i)))
      floors.push_back({noise / gains(i), static_cast<int>(i)});
  if (floors.empty()) throw NumericalError("water_filling: all channel gains nonpositive");
  std::sort(floors.begin(), floors.end());

  // Largest active prefix: channels enter in floor order while the water
  // level stays above their floor.
  const auto m = floors.size();
  std::size_t active = 1;
  double prefix = floors[0].first;
  for (std::size_t k = 2; k <= m; ++k) {
    const double next = prefix + floors[k - 1].first;
    if ((total + next) / static_cast<double>(k) > floors[k - 1].first) {
      active = k;
      prefix = next;
    } else {
      break;
    }
  }

  Eigen::VectorXd powers = Eigen::VectorXd::Zero(gains.size());
  for (std::size_t i = 0; i < active; ++i) {
    // p_i = mu - a_i written as pairwise floor differences, which keeps the
    // symmetric case exact: equal gains give exactly total/active each.
    double diff_sum = 0.0;
    for (std::size_t j = 0; j < active; ++j) diff_sum += floors[j].first - floors[i].first;
    powers(floors[i].second) = (total + diff_sum) / static_cast<double>(active);
  }
  return powers;
}

// Shannon sum rate in bits per second.
inline double sum_rate(const Eigen::VectorXd& powers, const Eigen::VectorXd& gains,
                       const AllocationConfig& config) {
  validate_allocation_config(config);
  if (powers.size() != gains.size()) throw DataError("sum_rate: powers and gains differ in size");
  const double noise = dbm_to_watts(config.noise_power_dbm);
  double bits_per_hz = 0.0;
  for (Eigen::Index i = 0; i < powers.size(); ++i)
    bits_per_hz += std::log2(1.0 + powers(i) * gains(i) / noise);
  return config.bandwidth_hz * bits_per_hz;
}

struct RateReport {
  double rate_twin = 0.0;    // twin-derived powers scored on true gains
  double rate_oracle = 0.0;  // true-gain powers scored on true gains
};

// Powers are computed from the twin map's gains but always scored on the true
// map's gains; an allocation informed by a perfect twin recovers the oracle.
inline RateReport evaluate_allocation(const RadioMap& truth, const RadioMap& twin,
                                      const std::vector<int>& users,
                                      const AllocationConfig& config) {
  if (truth.values.rows() != twin.values.rows() || truth.values.cols() != twin.values.cols())
    throw DataError("evaluate_allocation: map dimensions differ");
  const Eigen::VectorXd g_true_db = map_to_vector(truth);
  const Eigen::VectorXd g_twin_db = map_to_vector(twin);

  Eigen::VectorXd g_true(static_cast<Eigen::Index>(users.size()));
  Eigen::VectorXd g_twin(static_cast<Eigen::Index>(users.size()));
  for (std::size_t i = 0; i < users.size(); ++i) {
    const int u = users[i];
    if (u < 0 || u >= g_true_db.size())
      throw DataError("evaluate_allocation: user index outside the grid");
    g_true(static_cast<Eigen::Index>(i)) = db_to_linear(g_true_db(u));
    g_twin(static_cast<Eigen::Index>(i)) = db_to_linear(g_twin_db(u));
  }

  RateReport report;
  report.rate_twin = sum_rate(water_filling(g_twin, config), g_true, config);
  report.rate_oracle = sum_rate(water_filling(g_true, config), g_true, config);
  return report;
}

}  // namespace rmtwin
