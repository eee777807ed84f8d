#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rmtwin/ensemble.hpp"
#include "rmtwin/errors.hpp"
#include "rmtwin/grid.hpp"
#include "rmtwin/metrics.hpp"
#include "rmtwin/powerapp.hpp"
#include "rmtwin/synth.hpp"

namespace rmtwin {

namespace detail {

// %.17g round-trips every double exactly through strtod.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token, const std::string& where) {
  const char* s = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') throw DataError(where + ": not a number: '" + token + "'");
  return v;
}

inline long long parse_int(const std::string& token, const std::string& where) {
  const char* s = token.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0') throw DataError(where + ": not an integer: '" + token + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Whole-file atomic write: a temp file in the same directory is renamed over
// the destination, so readers never observe a partial file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp);
    out << content;
    out.flush();
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// key=value configuration files
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string value;
  int line = 0;
};

struct ConfigFile {
  std::string path;
  std::map<std::string, ConfigEntry> entries;
};

// Every key any command understands. Unknown keys are configuration errors so
// that typos never silently fall back to defaults.
inline const std::map<std::string, const char*>& known_config_keys() {
  static const std::map<std::string, const char*> keys = {
      {"nx", "grid cells along x"},
      {"ny", "grid cells along y"},
      {"spacing", "grid spacing in metres"},
      {"origin_x", "grid origin x"},
      {"origin_y", "grid origin y"},
      {"tx_start_x", "transmitter start x"},
      {"tx_start_y", "transmitter start y"},
      {"tx_velocity_x", "transmitter velocity x in m/s"},
      {"tx_velocity_y", "transmitter velocity y in m/s"},
      {"n_snapshots", "snapshots per series"},
      {"dt", "snapshot interval in seconds"},
      {"noise_variance", "measurement noise variance in dB^2"},
      {"seed", "base random seed"},
      {"g0", "reference gain at 1 m in dB"},
      {"gamma", "path loss exponent"},
      {"shadow_sigma", "shadow fading standard deviation in dB"},
      {"decorrelation", "shadowing decorrelation distance in metres"},
      {"smallscale_sigma", "small-scale fading standard deviation in dB"},
      {"bounds_pad", "allowed transmitter excursion outside the grid in metres"},
      {"cdmd_rank", "compressed DMD truncation rank"},
      {"compressed_dim", "compressed dimension, 0 for automatic"},
      {"compression", "compression kind: gaussian, sparse_sign, identity"},
      {"compression_seed", "seed for the compression matrix"},
      {"kernel", "kernel kind: rbf, polynomial"},
      {"kernel_bandwidth", "rbf bandwidth, 0 for the median heuristic"},
      {"kernel_degree", "polynomial kernel degree"},
      {"kernel_offset", "polynomial kernel offset"},
      {"edmd_rank", "kernel DMD rank, 0 for automatic"},
      {"omega", "fusion weight in [0, 1]"},
      {"out_nx", "output map cells along x"},
      {"out_ny", "output map cells along y"},
      {"variogram", "variogram kind: exponential, gaussian, spherical"},
      {"variogram_bins", "empirical variogram bin count"},
      {"variogram_max_lag", "empirical variogram maximum lag, 0 for automatic"},
      {"refit_variogram", "refit the variogram at every emitted frame (0/1)"},
      {"eval_t", "time index used by evaluation sweeps"},
      {"fit_n", "snapshots used for fitting in sweeps, 0 for all"},
      {"total_power_dbm", "transmit power budget in dBm"},
      {"noise_power_dbm", "receiver noise power in dBm"},
      {"bandwidth_hz", "signal bandwidth in Hz"},
  };
  return keys;
}

inline ConfigFile parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ConfigFile cfg;
  cfg.path = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    if (known_config_keys().find(key) == known_config_keys().end())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (cfg.entries.count(key))
      throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.entries[key] = {value, line_no};
  }
  return cfg;
}

namespace detail {

inline std::string config_where(const ConfigFile& cfg, const std::string& key) {
  const auto it = cfg.entries.find(key);
  return cfg.path + ":" + std::to_string(it->second.line) + ": key '" + key + "'";
}

}  // namespace detail

inline double config_double(const ConfigFile& cfg, const std::string& key, double fallback) {
  const auto it = cfg.entries.find(key);
  if (it == cfg.entries.end()) return fallback;
  try {
    return detail::parse_double(it->second.value, "config");
  } catch (const DataError&) {
    throw ConfigError(detail::config_where(cfg, key) + ": not a number: '" + it->second.value +
                      "'");
  }
}

inline long long config_int(const ConfigFile& cfg, const std::string& key, long long fallback) {
  const auto it = cfg.entries.find(key);
  if (it == cfg.entries.end()) return fallback;
  try {
    return detail::parse_int(it->second.value, "config");
  } catch (const DataError&) {
    throw ConfigError(detail::config_where(cfg, key) + ": not an integer: '" + it->second.value +
                      "'");
  }
}

inline std::string config_string(const ConfigFile& cfg, const std::string& key,
                                 const std::string& fallback) {
  const auto it = cfg.entries.find(key);
  return it == cfg.entries.end() ? fallback : it->second.value;
}

inline CompressionKind parse_compression_kind(const std::string& s, const std::string& where) {
  if (s == "gaussian") return CompressionKind::gaussian;
  if (s == "sparse_sign") return CompressionKind::sparse_sign;
  if (s == "identity") return CompressionKind::identity;
  throw ConfigError(where + ": unknown compression kind '" + s + "'");
}

inline KernelKind parse_kernel_kind(const std::string& s, const std::string& where) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "polynomial") return KernelKind::polynomial;
  throw ConfigError(where + ": unknown kernel kind '" + s + "'");
}

inline VariogramKind parse_variogram_kind(const std::string& s, const std::string& where) {
  if (s == "exponential") return VariogramKind::exponential;
  if (s == "gaussian") return VariogramKind::gaussian;
  if (s == "spherical") return VariogramKind::spherical;
  throw ConfigError(where + ": unknown variogram kind '" + s + "'");
}

inline const char* compression_kind_name(CompressionKind k) {
  switch (k) {
    case CompressionKind::gaussian: return "gaussian";
    case CompressionKind::sparse_sign: return "sparse_sign";
    default: return "identity";
  }
}

inline const char* kernel_kind_name(KernelKind k) {
  return k == KernelKind::rbf ? "rbf" : "polynomial";
}

inline const char* variogram_kind_name(VariogramKind k) {
  switch (k) {
    case VariogramKind::exponential: return "exponential";
    case VariogramKind::gaussian: return "gaussian";
    default: return "spherical";
  }
}

inline Scenario scenario_from_config(const ConfigFile& cfg) {
  Scenario sc;
  sc.grid = make_grid(static_cast<int>(config_int(cfg, "nx", 30)),
                      static_cast<int>(config_int(cfg, "ny", 30)),
                      config_double(cfg, "spacing", 5.0),
                      {config_double(cfg, "origin_x", 0.0), config_double(cfg, "origin_y", 0.0)});
  sc.tx_start = {config_double(cfg, "tx_start_x", 72.5), config_double(cfg, "tx_start_y", 72.5)};
  sc.tx_velocity = {config_double(cfg, "tx_velocity_x", 35.355339059327378),
                    config_double(cfg, "tx_velocity_y", 35.355339059327378)};
  sc.n_snapshots = static_cast<int>(config_int(cfg, "n_snapshots", 20));
  sc.dt = config_double(cfg, "dt", 0.002);
  sc.noise_variance = config_double(cfg, "noise_variance", 10.0);
  sc.seed = static_cast<std::uint64_t>(config_int(cfg, "seed", 1));
  sc.channel.g0 = config_double(cfg, "g0", -61.4);
  sc.channel.gamma = config_double(cfg, "gamma", 2.5);
  sc.channel.shadow_sigma = config_double(cfg, "shadow_sigma", 4.0);
  sc.channel.shadow_decorrelation = config_double(cfg, "decorrelation", 20.0);
  sc.channel.smallscale_sigma = config_double(cfg, "smallscale_sigma", 0.0);
  sc.bounds_pad = config_double(cfg, "bounds_pad", 50.0);
  validate_scenario(sc);
  return sc;
}

// The output grid spans the same x extent as the input grid; cell counts come
// from the config.
inline Grid output_grid(const Grid& in, int out_nx, int out_ny) {
  if (out_nx < 2 || out_ny < 2) throw ConfigError("output grid needs at least 2x2 cells");
  const double extent = (in.nx - 1) * in.spacing;
  return make_grid(out_nx, out_ny, extent / (out_nx - 1), in.origin);
}

inline TwinConfig twin_config_from_config(const ConfigFile& cfg, const Grid& in_grid) {
  TwinConfig tc;
  tc.cdmd_rank = static_cast<int>(config_int(cfg, "cdmd_rank", 5));
  tc.compression.p = static_cast<int>(config_int(cfg, "compressed_dim", 0));
  tc.compression.kind = parse_compression_kind(config_string(cfg, "compression", "gaussian"),
                                               cfg.path + ": key 'compression'");
  tc.compression.seed = static_cast<std::uint64_t>(config_int(cfg, "compression_seed", 1));
  tc.kernel.kind =
      parse_kernel_kind(config_string(cfg, "kernel", "rbf"), cfg.path + ": key 'kernel'");
  tc.kernel.bandwidth = config_double(cfg, "kernel_bandwidth", 0.0);
  tc.kernel.degree = static_cast<int>(config_int(cfg, "kernel_degree", 1));
  tc.kernel.offset = config_double(cfg, "kernel_offset", 0.0);
  tc.edmd_rank = static_cast<int>(config_int(cfg, "edmd_rank", 0));
  tc.omega = config_double(cfg, "omega", 0.6);
  tc.out_grid = output_grid(in_grid, static_cast<int>(config_int(cfg, "out_nx", 100)),
                            static_cast<int>(config_int(cfg, "out_ny", 100)));
  tc.variogram_kind = parse_variogram_kind(config_string(cfg, "variogram", "exponential"),
                                           cfg.path + ": key 'variogram'");
  tc.variogram_bins = static_cast<int>(config_int(cfg, "variogram_bins", 15));
  tc.variogram_max_lag = config_double(cfg, "variogram_max_lag", 0.0);
  tc.refit_variogram_per_frame = config_int(cfg, "refit_variogram", 0) != 0;
  return tc;
}

inline AllocationConfig allocation_from_config(const ConfigFile& cfg) {
  AllocationConfig ac;
  ac.total_power_dbm = config_double(cfg, "total_power_dbm", 40.0);
  ac.noise_power_dbm = config_double(cfg, "noise_power_dbm", -40.0);
  ac.bandwidth_hz = config_double(cfg, "bandwidth_hz", 50e6);
  validate_allocation_config(ac);
  return ac;
}

// ---------------------------------------------------------------------------
// snapshot series CSV: header line, then one row per snapshot
// ---------------------------------------------------------------------------

inline std::string grid_header_fields(const Grid& g) {
  return "nx=" + std::to_string(g.nx) + " ny=" + std::to_string(g.ny) +
         " spacing=" + detail::fmt_g17(g.spacing) + " ox=" + detail::fmt_g17(g.origin.x) +
         " oy=" + detail::fmt_g17(g.origin.y);
}

namespace detail {

inline std::map<std::string, std::string> parse_header_fields(const std::string& line,
                                                              const std::string& where) {
  std::map<std::string, std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw DataError(where + ": malformed header field '" + tok + "'");
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

inline std::string header_field(const std::map<std::string, std::string>& fields,
                                const std::string& key, const std::string& where) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw DataError(where + ": missing header field '" + key + "'");
  return it->second;
}

inline Grid grid_from_header(const std::map<std::string, std::string>& f,
                             const std::string& where) {
  return make_grid(
      static_cast<int>(parse_int(header_field(f, "nx", where), where)),
      static_cast<int>(parse_int(header_field(f, "ny", where), where)),
      parse_double(header_field(f, "spacing", where), where),
      {parse_double(header_field(f, "ox", where), where),
       parse_double(header_field(f, "oy", where), where)});
}

}  // namespace detail

inline void save_series(const SnapshotSeries& series, const std::string& path) {
  validate_series(series);
  std::string out = "# series v1 " + grid_header_fields(series.grid) + "\n";
  for (Eigen::Index t = 0; t < series.values.cols(); ++t) {
    out += detail::fmt_g17(series.times[static_cast<std::size_t>(t)]);
    for (Eigen::Index i = 0; i < series.values.rows(); ++i)
      out += "," + detail::fmt_g17(series.values(i, t));
    out += "\n";
  }
  write_file_atomic(path, out);
}

inline SnapshotSeries load_series(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("# series v1 ", 0) != 0)
    throw DataError(path + ":1: not a series file");
  SnapshotSeries series;
  series.grid = detail::grid_from_header(detail::parse_header_fields(line.substr(12), path + ":1"),
                                         path + ":1");
  std::vector<Eigen::VectorXd> cols;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto fields = detail::split(line, ',');
    if (static_cast<int>(fields.size()) != series.grid.size() + 1)
      throw DataError(where + ": expected " + std::to_string(series.grid.size() + 1) +
                      " fields, got " + std::to_string(fields.size()));
    series.times.push_back(detail::parse_double(fields[0], where));
    Eigen::VectorXd v(series.grid.size());
    for (int i = 0; i < series.grid.size(); ++i)
      v(i) = detail::parse_double(fields[static_cast<std::size_t>(i) + 1], where);
    cols.push_back(std::move(v));
  }
  series.values.resize(series.grid.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t t = 0; t < cols.size(); ++t)
    series.values.col(static_cast<Eigen::Index>(t)) = cols[t];
  validate_series(series);
  return series;
}

// ---------------------------------------------------------------------------
// radio map CSV: header line, then ny rows of nx values
// ---------------------------------------------------------------------------

inline void save_map(const RadioMap& map, const std::string& path, const std::string& mode) {
  std::string out = "# map v1 " + grid_header_fields(map.grid) +
                    " t=" + std::to_string(map.time_index) + " mode=" + mode + "\n";
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.values.cols(); ++c) {
      if (c > 0) out += ",";
      out += detail::fmt_g17(map.values(r, c));
    }
    out += "\n";
  }
  write_file_atomic(path, out);
}

struct LoadedMap {
  RadioMap map;
  std::string mode;
};

inline LoadedMap load_map(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("# map v1 ", 0) != 0)
    throw DataError(path + ":1: not a map file");
  const auto fields = detail::parse_header_fields(line.substr(9), path + ":1");
  LoadedMap out;
  out.map.grid = detail::grid_from_header(fields, path + ":1");
  out.map.time_index =
      static_cast<int>(detail::parse_int(detail::header_field(fields, "t", path + ":1"), path));
  out.mode = detail::header_field(fields, "mode", path + ":1");
  out.map.values.resize(out.map.grid.ny, out.map.grid.nx);
  int row = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (row >= out.map.grid.ny) throw DataError(where + ": more rows than the header declares");
    const auto cells = detail::split(line, ',');
    if (static_cast<int>(cells.size()) != out.map.grid.nx)
      throw DataError(where + ": expected " + std::to_string(out.map.grid.nx) + " values, got " +
                      std::to_string(cells.size()));
    for (int c = 0; c < out.map.grid.nx; ++c)
      out.map.values(row, c) = detail::parse_double(cells[static_cast<std::size_t>(c)], where);
    ++row;
  }
  if (row != out.map.grid.ny)
    throw DataError(path + ": expected " + std::to_string(out.map.grid.ny) + " rows, got " +
                    std::to_string(row));
  return out;
}

// ---------------------------------------------------------------------------
// twin model: self-describing flat text
// ---------------------------------------------------------------------------

namespace detail {

inline void append_complex_matrix(std::string& out, const char* name,
                                  const Eigen::MatrixXcd& m) {
  out += std::string(name) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) +
         "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += " ";
      out += fmt_g17(m(r, c).real()) + " " + fmt_g17(m(r, c).imag());
    }
    out += "\n";
  }
}

inline void append_real_matrix(std::string& out, const char* name, const Eigen::MatrixXd& m) {
  out += std::string(name) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) +
         "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += " ";
      out += fmt_g17(m(r, c));
    }
    out += "\n";
  }
}

class LineReader {
 public:
  LineReader(const std::string& content, std::string path)
      : in_(content), path_(std::move(path)) {}

  std::vector<std::string> tokens() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!trim(line).empty()) break;
    }
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    if (out.empty()) throw DataError(path_ + ": unexpected end of file");
    return out;
  }

  std::vector<std::string> expect(const std::string& head, std::size_t n_extra) {
    auto toks = tokens();
    if (toks[0] != head || toks.size() != n_extra + 1)
      throw DataError(where() + ": expected '" + head + "' record");
    return toks;
  }

  Eigen::MatrixXcd complex_matrix(const std::string& head) {
    const auto dims = expect(head, 2);
    const auto rows = parse_int(dims[1], where());
    const auto cols = parse_int(dims[2], where());
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto row = tokens();
      if (row.size() != static_cast<std::size_t>(2 * cols))
        throw DataError(where() + ": expected " + std::to_string(2 * cols) + " numbers");
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = {parse_double(row[static_cast<std::size_t>(2 * c)], where()),
                   parse_double(row[static_cast<std::size_t>(2 * c + 1)], where())};
    }
    return m;
  }

  Eigen::MatrixXd real_matrix(const std::string& head) {
    const auto dims = expect(head, 2);
    const auto rows = parse_int(dims[1], where());
    const auto cols = parse_int(dims[2], where());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto row = tokens();
      if (row.size() != static_cast<std::size_t>(cols))
        throw DataError(where() + ": expected " + std::to_string(cols) + " numbers");
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = parse_double(row[static_cast<std::size_t>(c)], where());
    }
    return m;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_no_); }

 private:
  std::istringstream in_;
  std::string path_;
  int line_no_ = 0;
};

inline std::string grid_record(const char* name, const Grid& g) {
  return std::string(name) + " " + std::to_string(g.nx) + " " + std::to_string(g.ny) + " " +
         fmt_g17(g.spacing) + " " + fmt_g17(g.origin.x) + " " + fmt_g17(g.origin.y) + "\n";
}

inline Grid grid_from_record(const std::vector<std::string>& t, const std::string& where) {
  return make_grid(static_cast<int>(parse_int(t[1], where)),
                   static_cast<int>(parse_int(t[2], where)), parse_double(t[3], where),
                   {parse_double(t[4], where), parse_double(t[5], where)});
}

}  // namespace detail

inline void save_twin_model(const TwinModel& model, const std::string& path) {
  std::string out = "rmtwin-model v1\n";
  out += "omega " + detail::fmt_g17(model.omega) + "\n";
  out += "n_train " + std::to_string(model.n_train) + "\n";
  out += detail::grid_record("grid_in", model.grid_in);
  out += detail::grid_record("grid_out", model.grid_out);
  out += std::string("variogram ") + variogram_kind_name(model.variogram.kind) + " " +
         detail::fmt_g17(model.variogram.nugget) + " " + detail::fmt_g17(model.variogram.sill) +
         " " + detail::fmt_g17(model.variogram.range) + " " +
         (model.variogram.degenerate ? "1" : "0") + "\n";
  out += std::string("variogram_fit ") + variogram_kind_name(model.variogram_kind) + " " +
         std::to_string(model.variogram_bins) + " " + detail::fmt_g17(model.variogram_max_lag) +
         " " + (model.refit_variogram_per_frame ? "1" : "0") + "\n";

  out += "cdmd " + std::to_string(model.cdmd.state_dim) + " " + std::to_string(model.cdmd.rank) +
         " " + std::to_string(model.cdmd.n_train) + " " +
         detail::fmt_g17(model.cdmd.train_residual) + "\n";
  detail::append_complex_matrix(out, "cdmd_eigenvalues", model.cdmd.eigenvalues);
  detail::append_complex_matrix(out, "cdmd_amplitudes", model.cdmd.amplitudes);
  detail::append_complex_matrix(out, "cdmd_modes", model.cdmd.modes);

  out += "edmd " + std::to_string(model.edmd.rank) + " " + std::to_string(model.edmd.n_train) +
         " " + detail::fmt_g17(model.edmd.eigfun_residual) + " " +
         detail::fmt_g17(model.edmd.train_residual) + "\n";
  out += std::string("kernel ") + kernel_kind_name(model.edmd.kernel.kind) + " " +
         detail::fmt_g17(model.edmd.kernel.bandwidth) + " " +
         std::to_string(model.edmd.kernel.degree) + " " +
         detail::fmt_g17(model.edmd.kernel.offset) + "\n";
  detail::append_real_matrix(out, "edmd_training_x", model.edmd.training_x);
  detail::append_complex_matrix(out, "edmd_eigenvalues", model.edmd.eigenvalues);
  detail::append_complex_matrix(out, "edmd_amplitudes", model.edmd.amplitudes);
  detail::append_complex_matrix(out, "edmd_eigfun_coeffs", model.edmd.eigfun_coeffs);
  detail::append_complex_matrix(out, "edmd_modes", model.edmd.modes);
  write_file_atomic(path, out);
}

inline TwinModel load_twin_model(const std::string& path) {
  detail::LineReader in(read_file(path), path);
  {
    const auto head = in.tokens();
    if (head.size() != 2 || head[0] != "rmtwin-model" || head[1] != "v1")
      throw DataError(path + ": not a twin model file");
  }
  TwinModel model;
  model.omega = detail::parse_double(in.expect("omega", 1)[1], in.where());
  model.n_train = static_cast<int>(detail::parse_int(in.expect("n_train", 1)[1], in.where()));
  model.grid_in = detail::grid_from_record(in.expect("grid_in", 5), in.where());
  model.grid_out = detail::grid_from_record(in.expect("grid_out", 5), in.where());
  {
    const auto t = in.expect("variogram", 5);
    model.variogram.kind = parse_variogram_kind(t[1], in.where());
    model.variogram.nugget = detail::parse_double(t[2], in.where());
    model.variogram.sill = detail::parse_double(t[3], in.where());
    model.variogram.range = detail::parse_double(t[4], in.where());
    model.variogram.degenerate = t[5] == "1";
  }
  {
    const auto t = in.expect("variogram_fit", 4);
    model.variogram_kind = parse_variogram_kind(t[1], in.where());
    model.variogram_bins = static_cast<int>(detail::parse_int(t[2], in.where()));
    model.variogram_max_lag = detail::parse_double(t[3], in.where());
    model.refit_variogram_per_frame = t[4] == "1";
  }
  {
    const auto t = in.expect("cdmd", 4);
    model.cdmd.state_dim = static_cast<int>(detail::parse_int(t[1], in.where()));
    model.cdmd.rank = static_cast<int>(detail::parse_int(t[2], in.where()));
    model.cdmd.n_train = static_cast<int>(detail::parse_int(t[3], in.where()));
    model.cdmd.train_residual = detail::parse_double(t[4], in.where());
  }
  model.cdmd.eigenvalues = in.complex_matrix("cdmd_eigenvalues");
  model.cdmd.amplitudes = in.complex_matrix("cdmd_amplitudes");
  model.cdmd.modes = in.complex_matrix("cdmd_modes");
  {
    const auto t = in.expect("edmd", 4);
    model.edmd.rank = static_cast<int>(detail::parse_int(t[1], in.where()));
    model.edmd.n_train = static_cast<int>(detail::parse_int(t[2], in.where()));
    model.edmd.eigfun_residual = detail::parse_double(t[3], in.where());
    model.edmd.train_residual = detail::parse_double(t[4], in.where());
  }
  {
    const auto t = in.expect("kernel", 4);
    model.edmd.kernel.kind = parse_kernel_kind(t[1], in.where());
    model.edmd.kernel.bandwidth = detail::parse_double(t[2], in.where());
    model.edmd.kernel.degree = static_cast<int>(detail::parse_int(t[3], in.where()));
    model.edmd.kernel.offset = detail::parse_double(t[4], in.where());
  }
  model.edmd.training_x = in.real_matrix("edmd_training_x");
  model.edmd.eigenvalues = in.complex_matrix("edmd_eigenvalues");
  model.edmd.amplitudes = in.complex_matrix("edmd_amplitudes");
  model.edmd.eigfun_coeffs = in.complex_matrix("edmd_eigfun_coeffs");
  model.edmd.modes = in.complex_matrix("edmd_modes");

  // Interpolation machinery is recomputed, not stored; it is a deterministic
  // function of the grids and the variogram.
  auto system =
      std::make_shared<KrigingSystem>(model.grid_in.cell_positions(), model.variogram);
  model.basis = std::make_shared<const Eigen::MatrixXd>(system->target_basis(model.grid_out));
  model.kriging = std::move(system);
  return model;
}

// ---------------------------------------------------------------------------
// metric and power reports
// ---------------------------------------------------------------------------

inline std::string format_metric_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::fmt_g17(v);
}

inline void save_metric_report(const std::vector<MetricReport>& rows, const std::string& path) {
  std::string out = "time_index,mse,psnr,ssim,corr\n";
  for (const auto& r : rows)
    out += std::to_string(r.time_index) + "," + format_metric_value(r.mse) + "," +
           format_metric_value(r.psnr) + "," + format_metric_value(r.ssim) + "," +
           format_metric_value(r.corr) + "\n";
  write_file_atomic(path, out);
}

inline std::vector<MetricReport> load_metric_report(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "time_index,mse,psnr,ssim,corr")
    throw DataError(path + ":1: not a metric report");
  std::vector<MetricReport> rows;
  int line_no = 1;
  auto value = [&](const std::string& tok, const std::string& where) {
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    return detail::parse_double(tok, where);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto f = detail::split(line, ',');
    if (f.size() != 5) throw DataError(where + ": expected 5 fields");
    MetricReport r;
    r.time_index = static_cast<int>(detail::parse_int(f[0], where));
    r.mse = value(f[1], where);
    r.psnr = value(f[2], where);
    r.ssim = value(f[3], where);
    r.corr = value(f[4], where);
    rows.push_back(r);
  }
  return rows;
}

struct PowerRow {
  std::uint64_t seed = 0;
  int k = 0;
  double rate_twin = 0.0;
  double rate_oracle = 0.0;
};

inline void save_power_report(const std::vector<PowerRow>& rows, const std::string& path) {
  std::string out = "seed,k,rate_twin,rate_oracle\n";
  for (const auto& r : rows)
    out += std::to_string(r.seed) + "," + std::to_string(r.k) + "," +
           detail::fmt_g17(r.rate_twin) + "," + detail::fmt_g17(r.rate_oracle) + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// PGM export: 8-bit grayscale with the dB range recorded for inversion
// ---------------------------------------------------------------------------

inline void export_pgm(const RadioMap& map, const std::string& path) {
  const double lo = map.values.minCoeff();
  const double hi = map.values.maxCoeff();
  const double range = hi - lo;
  std::string out = "P5\n# dbrange " + detail::fmt_g17(lo) + " " + detail::fmt_g17(hi) + "\n" +
                    std::to_string(map.values.cols()) + " " + std::to_string(map.values.rows()) +
                    "\n255\n";
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.values.cols(); ++c) {
      // constant maps render uniform mid-gray
      const double unit = range > 0.0 ? (map.values(r, c) - lo) / range : 0.5;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(unit * 255.0)));
    }
  }
  write_file_atomic(path, out);
}

struct PgmImage {
  int width = 0;
  int height = 0;
  double min_db = 0.0;
  double max_db = 0.0;
  std::vector<unsigned char> pixels;
};

inline PgmImage load_pgm(const std::string& path) {
  const std::string data = read_file(path);
  std::istringstream in(data);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError(path + ": not a binary PGM file");
  std::string hash, tag;
  in >> hash >> tag;
  if (hash != "#" || tag != "dbrange") throw DataError(path + ": missing dbrange comment");
  PgmImage img;
  int maxval = 0;
  in >> img.min_db >> img.max_db >> img.width >> img.height >> maxval;
  if (!in || maxval != 255) throw DataError(path + ": malformed PGM header");
  in.get();  // single whitespace byte before the raster
  const auto offset = static_cast<std::size_t>(in.tellg());
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (data.size() - offset < n) throw DataError(path + ": truncated PGM raster");
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(offset),
                    data.begin() + static_cast<std::ptrdiff_t>(offset + n));
  return img;
}

}  // namespace rmtwin
