#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "rmtwin/errors.hpp"

namespace rmtwin {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Uniform planar grid. Cells are indexed row-major: index = iy*nx + ix, so
// index 0 sits at the origin and index nx-1 ends the first row of constant y.
struct Grid {
  int nx = 0;
  int ny = 0;
  double spacing = 1.0;
  Point origin{0.0, 0.0};

  int size() const { return nx * ny; }

  int index(int ix, int iy) const { return iy * nx + ix; }

  Point position(int ix, int iy) const {
    return {origin.x + ix * spacing, origin.y + iy * spacing};
  }

  Point position(int idx) const { return position(idx % nx, idx / nx); }

  std::vector<Point> cell_positions() const {
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(size()));
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) pts.push_back(position(ix, iy));
    return pts;
  }

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && spacing == o.spacing &&
           origin.x == o.origin.x && origin.y == o.origin.y;
  }
};

inline Grid make_grid(int nx, int ny, double spacing, Point origin = {0.0, 0.0}) {
  if (nx < 2 || ny < 2)
    throw ConfigError("grid dimensions must be at least 2x2, got " + std::to_string(nx) + "x" +
                      std::to_string(ny));
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw ConfigError("grid spacing must be positive and finite, got " + std::to_string(spacing));
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
    throw ConfigError("grid origin must be finite");
  return Grid{nx, ny, spacing, origin};
}

// A time series of channel-gain snapshots over one grid. Column t of `values`
// is the row-major flattening of the map at `times[t]`.
struct SnapshotSeries {
  Grid grid;
  std::vector<double> times;
  Eigen::MatrixXd values;  // grid.size() x n_snapshots

  int n_snapshots() const { return static_cast<int>(values.cols()); }
};

inline void validate_series(const SnapshotSeries& s) {
  if (s.values.rows() != s.grid.size())
    throw DataError("snapshot series has " + std::to_string(s.values.rows()) +
                    " cells per snapshot but the grid has " + std::to_string(s.grid.size()));
  if (static_cast<int>(s.times.size()) != s.n_snapshots())
    throw DataError("snapshot series has " + std::to_string(s.times.size()) +
                    " timestamps for " + std::to_string(s.n_snapshots()) + " snapshots");
  if (!s.values.allFinite()) throw DataError("snapshot series contains non-finite values");
}

// Time-shifted data pair: xp.col(t) is the successor of x.col(t).
struct SnapshotPair {
  Eigen::MatrixXd x;   // M x (N-1)
  Eigen::MatrixXd xp;  // M x (N-1)
};

inline SnapshotPair split_snapshots(const SnapshotSeries& s) {
  validate_series(s);
  const int n = s.n_snapshots();
  if (n < 3)
    throw DataError("too few snapshots: need at least 3, got " + std::to_string(n));
  const double dt0 = s.times[1] - s.times[0];
  for (int t = 1; t + 1 < n; ++t) {
    const double dt = s.times[t + 1] - s.times[t];
    if (std::abs(dt - dt0) > 1e-9 * std::max(std::abs(dt0), 1.0))
      throw DataError("snapshot timestamps are not uniformly spaced at index " +
                      std::to_string(t + 1));
  }
  SnapshotPair p;
  p.x = s.values.leftCols(n - 1);
  p.xp = s.values.rightCols(n - 1);
  return p;
}

// A single map over a grid; values(iy, ix) is the gain of cell (ix, iy) and
// time_index records which snapshot index the map represents.
struct RadioMap {
  Grid grid;
  Eigen::MatrixXd values;  // ny x nx
  int time_index = 0;
};

inline RadioMap map_from_vector(const Grid& g, const Eigen::VectorXd& v, int time_index = 0) {
  if (v.size() != g.size())
    throw DataError("cell vector has " + std::to_string(v.size()) + " entries for a grid of " +
                    std::to_string(g.size()) + " cells");
  RadioMap m;
  m.grid = g;
  m.time_index = time_index;
  // Row-major flattening: consecutive vector entries fill one grid row of constant y.
  m.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(v.data(), g.ny, g.nx);
  return m;
}

inline Eigen::VectorXd map_to_vector(const RadioMap& m) {
  if (m.values.rows() != m.grid.ny || m.values.cols() != m.grid.nx)
    throw DataError("radio map shape does not match its grid");
  Eigen::VectorXd v(m.grid.size());
  for (int iy = 0; iy < m.grid.ny; ++iy)
    v.segment(static_cast<Eigen::Index>(iy) * m.grid.nx, m.grid.nx) =
        m.values.row(iy).transpose();
  return v;
}

}  // namespace rmtwin
