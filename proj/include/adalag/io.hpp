#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/marginal.hpp"
#include "adalag/model.hpp"

namespace adalag {

/// Decimal rendering with 17 significant digits; round-trips binary64 exactly
/// and is byte-stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trajectory_csv_header(int state_dim, int obs_dim) {
  std::string h = "t";
  for (int i = 0; i < state_dim; ++i) h += ",x_" + std::to_string(i);
  for (int i = 0; i < obs_dim; ++i) h += ",y_" + std::to_string(i);
  return h;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int nx = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const int ny = traj.observations.empty() ? 0 : static_cast<int>(traj.observations[0].size());
  os << trajectory_csv_header(nx, ny) << "\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    os << t;
    for (int i = 0; i < nx; ++i) os << "," << format_double(traj.states[t][i]);
    for (int i = 0; i < ny; ++i) os << "," << format_double(traj.observations[t][i]);
    os << "\n";
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw InvalidParameterError("cannot open " + path + " for writing");
  write_trajectory_csv(os, traj);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

/// Reads the y_* columns of a trajectory-format CSV (state columns, when
/// present, are ignored). Rows must be in time order.
inline std::vector<Eigen::VectorXd> read_observations_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidParameterError("empty observation file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  std::vector<int> y_cols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i].rfind("y_", 0) == 0) y_cols.push_back(static_cast<int>(i));
  if (y_cols.empty())
    throw InvalidParameterError("observation file has no y_* columns in its header");

  std::vector<Eigen::VectorXd> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    Eigen::VectorXd y(y_cols.size());
    for (std::size_t k = 0; k < y_cols.size(); ++k) {
      if (static_cast<std::size_t>(y_cols[k]) >= fields.size())
        throw InvalidParameterError("short CSV row in observation file");
      y[k] = std::stod(fields[y_cols[k]]);
    }
    out.push_back(std::move(y));
  }
  return out;
}

inline std::vector<Eigen::VectorXd> read_observations_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidParameterError("cannot open " + path);
  return read_observations_csv(is);
}

inline constexpr const char* kEmissionHeader = "s,stop_time,lag,estimate,variance_at_stop,truncated";

/// One emission-stream record; written as each marginal finalizes.
inline std::string format_emission(const SmoothedMarginal& m) {
  return std::to_string(m.s) + "," + std::to_string(m.stop_time) + "," + std::to_string(m.lag) +
         "," + format_double(m.estimate) + "," + format_double(m.variance_at_stop) + "," +
         (m.truncated_by_horizon ? "1" : "0");
}

}  // namespace adalag
