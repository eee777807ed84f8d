#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/rng.hpp"

namespace rmtwin {

// Log-distance channel model. g0 is the path gain at 1 m; the default is the
// free-space value at 28 GHz. Shadowing follows an exponential (Gudmundson)
// spatial correlation; the decorrelation distance and sigma are documented
// artifact conventions, not published constants.
struct ChannelParams {
  double g0 = -61.4;                  // dB at unit distance
  double gamma = 2.5;                 // path-loss exponent
  double shadow_sigma = 4.0;          // dB
  double shadow_decorrelation = 20.0; // meters
  double smallscale_sigma = 0.0;      // dB, off by default so oracles stay analytic
};

struct Transmitter {
  Point start;
  Point velocity;  // meters/second
};

// Axis-aligned rectangle adding a fixed attenuation when the tx-rx segment
// crosses it. Optional hook only; no physical-equivalence claim.
struct Obstacle {
  Point lo;
  Point hi;
  double attenuation = 0.0;  // dB
};

struct Scenario {
  Grid grid;
  Point tx_start{0.0, 0.0};
  Point tx_velocity{0.0, 0.0};
  int n_snapshots = 20;
  double dt = 0.002;  // seconds
  ChannelParams channel;
  double noise_variance = 10.0;  // dB^2
  std::uint64_t seed = 1;
  std::vector<Transmitter> extra_transmitters;  // summed in linear scale
  std::vector<Obstacle> obstacles;
  double bounds_pad = 50.0;  // transmitters must stay within the grid rect padded by this
};

inline void validate_channel(const ChannelParams& p) {
  if (!(p.gamma > 0.0)) throw ConfigError("path-loss exponent must be positive");
  if (!(p.shadow_sigma >= 0.0)) throw ConfigError("shadow_sigma must be non-negative");
  if (!(p.shadow_decorrelation > 0.0)) throw ConfigError("shadow_decorrelation must be positive");
  if (!(p.smallscale_sigma >= 0.0)) throw ConfigError("smallscale_sigma must be non-negative");
  if (!std::isfinite(p.g0)) throw ConfigError("g0 must be finite");
}

inline void validate_scenario(const Scenario& s) {
  validate_channel(s.channel);
  if (s.n_snapshots < 3)
    throw ConfigError("scenario needs at least 3 snapshots, got " + std::to_string(s.n_snapshots));
  if (!(s.dt > 0.0)) throw ConfigError("snapshot interval dt must be positive");
  if (!(s.noise_variance >= 0.0)) throw ConfigError("noise_variance must be non-negative");
}

// Deterministic part of the gain in dB. Distance is clamped to >= 1 m so the
// transmitter cell stays finite; within the clamp radius the gain is g0.
inline double path_gain(const Point& tx, const Point& rx, const ChannelParams& params) {
  if (!std::isfinite(tx.x) || !std::isfinite(tx.y) || !std::isfinite(rx.x) || !std::isfinite(rx.y))
    throw DataError("path_gain requires finite positions");
  validate_channel(params);
  const double d = std::max(distance(tx, rx), 1.0);
  return params.g0 - 10.0 * params.gamma * std::log10(d);
}

namespace detail {

// Liang-Barsky style test: does the closed segment a-b intersect the rectangle?
inline bool segment_hits_rect(const Point& a, const Point& b, const Point& lo, const Point& hi) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - lo.x, hi.x - a.x, a.y - lo.y, hi.y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;  // parallel and outside
    } else {
      const double r = q[i] / p[i];
      if (p[i] < 0.0) {
        if (r > t1) return false;
        if (r > t0) t0 = r;
      } else {
        if (r < t0) return false;
        if (r < t1) t1 = r;
      }
    }
  }
  return t0 <= t1;
}

}  // namespace detail

// Zero-mean Gaussian field with covariance sigma^2 exp(-d/decorrelation),
// realized through a Cholesky factor; deterministic in (grid, params, seed).
inline Eigen::VectorXd shadowing_field(const Grid& grid, const ChannelParams& params,
                                       std::uint64_t seed) {
  validate_channel(params);
  const int m = grid.size();
  if (params.shadow_sigma == 0.0) return Eigen::VectorXd::Zero(m);

  const auto pts = grid.cell_positions();
  const double var = params.shadow_sigma * params.shadow_sigma;
  Eigen::MatrixXd cov(m, m);
  for (int i = 0; i < m; ++i) {
    cov(i, i) = var;
    for (int j = 0; j < i; ++j) {
      const double c = var * std::exp(-distance(pts[i], pts[j]) / params.shadow_decorrelation);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }

  const CounterRng rng(seed, streams::kShadowing);
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z(i) = rng.normal(static_cast<std::uint64_t>(i));

  // Tiny relative jitter keeps the factorization stable on near-degenerate grids.
  double jitter = var * 1e-12;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov + jitter * Eigen::MatrixXd::Identity(m, m));
    if (llt.info() == Eigen::Success) return llt.matrixL() * z;
    jitter *= 100.0;
  }
  throw NumericalError("shadowing covariance is not positive definite");
}

struct SeriesPair {
  SnapshotSeries clean;
  SnapshotSeries noisy;
};

// Clean snapshots are path gain (+ shadowing + optional small-scale jitter);
// noisy adds i.i.d. zero-mean Gaussian measurement noise per (seed, t, cell).
inline SeriesPair generate_series(const Scenario& sc) {
  validate_scenario(sc);
  const int m = sc.grid.size();
  const int n = sc.n_snapshots;
  const auto pts = sc.grid.cell_positions();

  std::vector<Transmitter> txs;
  txs.push_back({sc.tx_start, sc.tx_velocity});
  txs.insert(txs.end(), sc.extra_transmitters.begin(), sc.extra_transmitters.end());

  const Point lo{sc.grid.origin.x - sc.bounds_pad, sc.grid.origin.y - sc.bounds_pad};
  const Point hi{sc.grid.origin.x + (sc.grid.nx - 1) * sc.grid.spacing + sc.bounds_pad,
                 sc.grid.origin.y + (sc.grid.ny - 1) * sc.grid.spacing + sc.bounds_pad};

  const Eigen::VectorXd shadow = shadowing_field(sc.grid, sc.channel, sc.seed);
  const CounterRng noise_rng(sc.seed, streams::kNoise);
  const CounterRng small_rng(sc.seed, streams::kSmallScale);
  const double noise_sd = std::sqrt(sc.noise_variance);

  SeriesPair out;
  out.clean.grid = sc.grid;
  out.noisy.grid = sc.grid;
  out.clean.values.resize(m, n);
  out.noisy.values.resize(m, n);
  out.clean.times.resize(static_cast<std::size_t>(n));
  out.noisy.times.resize(static_cast<std::size_t>(n));

  for (int t = 0; t < n; ++t) {
    const double time = t * sc.dt;
    out.clean.times[static_cast<std::size_t>(t)] = time;
    out.noisy.times[static_cast<std::size_t>(t)] = time;

    std::vector<Point> tx_now(txs.size());
    for (std::size_t k = 0; k < txs.size(); ++k) {
      tx_now[k] = {txs[k].start.x + time * txs[k].velocity.x,
                   txs[k].start.y + time * txs[k].velocity.y};
      if (tx_now[k].x < lo.x || tx_now[k].x > hi.x || tx_now[k].y < lo.y || tx_now[k].y > hi.y)
        throw ConfigError("transmitter " + std::to_string(k) + " leaves the bounding box at snapshot " +
                          std::to_string(t));
    }

    for (int i = 0; i < m; ++i) {
      double linear = 0.0;
      for (const auto& tx : tx_now) {
        double g = path_gain(tx, pts[i], sc.channel);
        for (const auto& ob : sc.obstacles)
          if (detail::segment_hits_rect(tx, pts[i], ob.lo, ob.hi)) g -= ob.attenuation;
        linear += std::pow(10.0, g / 10.0);
      }
      double clean = 10.0 * std::log10(linear) + shadow(i);
      if (sc.channel.smallscale_sigma > 0.0)
        clean += sc.channel.smallscale_sigma *
                 small_rng.normal(static_cast<std::uint64_t>(t) * m + i);
      out.clean.values(i, t) = clean;
      out.noisy.values(i, t) =
          clean + noise_sd * noise_rng.normal(static_cast<std::uint64_t>(t) * m + i);
    }
  }
  return out;
}

}  // namespace rmtwin
