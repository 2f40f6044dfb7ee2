#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lureid/errors.hpp"
#include "lureid/kernel.hpp"
#include "lureid/model.hpp"
#include "lureid/rng.hpp"

namespace lureid {

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::string scenario;
  double process_noise_sigma = 0.0;
  double measurement_noise_sigma = 0.0;
};

/// Measured trajectory: states x_0..x_T (rows) and inputs u_0..u_{T-1}.
struct Dataset {
  Matrix states;
  Matrix inputs;
  DatasetMeta meta;

  Eigen::Index T() const noexcept { return inputs.rows(); }
  Eigen::Index n_x() const noexcept { return states.cols(); }
  Eigen::Index n_u() const noexcept { return inputs.cols(); }

  /// Rows x_0..x_{T-1}.
  Matrix regressors() const { return states.topRows(T()); }
  /// Rows x_1..x_T.
  Matrix successors() const { return states.bottomRows(T()); }

  void validate() const {
    if (T() < 1) throw InvalidInputError("dataset has no transitions (T = 0)");
    if (states.rows() != T() + 1) {
      throw InvalidInputError("dataset has " + std::to_string(states.rows()) +
                              " state rows for " + std::to_string(T()) + " inputs");
    }
    if (!states.allFinite() || !inputs.allFinite()) {
      throw InvalidInputError("dataset contains non-finite entries");
    }
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.states == b.states && a.inputs == b.inputs;
  }
};

/// u_t = sum_k a_k sin(w_k t + phi_k) + e_t,  e_t ~ N(0, noise_sigma^2).
struct InputSignalSpec {
  std::vector<double> amplitudes{0.5, 0.3};
  std::vector<double> frequencies{0.1, 0.25};
  std::vector<double> phases{0.0, std::numbers::pi / 3.0};
  double noise_sigma = 0.05;

  void validate() const {
    if (amplitudes.empty() || amplitudes.size() != frequencies.size() ||
        amplitudes.size() != phases.size()) {
      throw InvalidInputError(
          "input signal: amplitudes, frequencies and phases must share a nonzero length");
    }
    if (noise_sigma < 0.0) throw InvalidInputError("input signal: noise_sigma must be >= 0");
  }
};

inline Matrix synth_input(const InputSignalSpec& spec, Eigen::Index horizon, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, Stream::input_noise);
  Matrix u(horizon, 1);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    double v = 0.0;
    for (std::size_t k = 0; k < spec.amplitudes.size(); ++k) {
      v += spec.amplitudes[k] * std::sin(spec.frequencies[k] * static_cast<double>(t) + spec.phases[k]);
    }
    if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
    u(t, 0) = v;
  }
  return u;
}

struct Scenario {
  std::string name;
  LureSystemSpec system;
  Vector theta_true;
  Eigen::Index horizon = 50;
  KernelSpec kernel;
  InputSignalSpec input_signal;
  std::uint64_t seed = 0;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"experiment1", "experiment2", "linear_sanity"};
  return names;
}

/// Three-state example: A(theta) has the sparsity
///   [0 t1 t2; t3 t4 0; 0 t5 t6],  B = [0.1 0.1 0.2]^T,  F = [-0.2 0 0.2]^T.
inline AffineLinearPart example_linear_part() {
  AffineLinearPart lin;
  lin.A0 = Matrix::Zero(3, 3);
  lin.B0 = Matrix(3, 1);
  lin.B0 << 0.1, 0.1, 0.2;
  const int pattern[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 1}, {2, 2}};
  for (const auto& [r, c] : pattern) {
    Matrix a = Matrix::Zero(3, 3);
    a(r, c) = 1.0;
    lin.A_basis.push_back(a);
    lin.B_basis.push_back(Matrix::Zero(3, 1));
  }
  return lin;
}

inline Vector example_theta_true() {
  Vector th(6);
  th << -0.12, 0.3, 0.1, 0.8, 0.1, 0.6;
  return th;
}

inline Scenario builtin_scenario(std::string_view name) {
  Scenario s;
  s.name = std::string(name);
  s.system.linear = example_linear_part();
  s.system.C = Matrix::Identity(3, 3);
  s.system.F = Matrix(3, 1);
  s.system.F << -0.2, 0.0, 0.2;
  s.system.process_noise_sigma = 0.0;
  s.theta_true = example_theta_true();
  s.horizon = 50;
  if (name == "experiment1") {
    s.system.nonlinearity = "exp1";
    s.system.measurement_noise_sigma = 0.01;
    s.kernel = KernelSpec(KernelFamily::gaussian, 1.0, 3);
  } else if (name == "experiment2") {
    s.system.nonlinearity = "exp2";
    s.system.measurement_noise_sigma = 0.01;
    s.kernel = KernelSpec(KernelFamily::laplacian, 100.0, 3);
  } else if (name == "linear_sanity") {
    s.system.nonlinearity = "zero";
    s.system.measurement_noise_sigma = 0.0;
    s.kernel = KernelSpec(KernelFamily::gaussian, 1.0, 3);
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InvalidInputError("unknown scenario '" + std::string(name) + "' (valid: " + valid + ")");
  }
  return s;
}

struct GeneratedData {
  Dataset dataset;
  Vector theta_true;
  Trajectory truth;
};

/// x0 ~ U[0,1]^n_x, then simulate with the scenario's noise levels.
inline GeneratedData generate_scenario(const Scenario& s, std::uint64_t seed) {
  s.system.validate();
  if (s.horizon < 1) throw InvalidInputError("scenario horizon must be >= 1");
  Rng init(seed, Stream::initial_state);
  Vector x0(s.system.linear.n_x());
  for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = init.uniform();
  const Matrix u = synth_input(s.input_signal, s.horizon, seed);
  SimulationResult sim = simulate_system_with_truth(s.system, s.theta_true, x0, u, seed);
  Dataset d{std::move(sim.measured.states), u,
            DatasetMeta{seed, s.name, s.system.process_noise_sigma,
                        s.system.measurement_noise_sigma}};
  return {std::move(d), s.theta_true, std::move(sim.truth)};
}

struct DatasetSplit {
  Dataset train;
  Dataset validation;
};

/// Chronological split over transitions. The training part gets
/// ceil(ratio * T) transitions; validation starts at the last training state.
inline DatasetSplit split(const Dataset& d, double ratio) {
  d.validate();
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InvalidInputError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  // The small offset keeps e.g. 0.7 * 10 = 7.000000000000001 from rounding up to 8.
  const auto n_train = static_cast<Eigen::Index>(std::ceil(ratio * static_cast<double>(d.T()) - 1e-9));
  if (n_train < 1 || n_train >= d.T()) {
    throw InvalidInputError("split ratio " + std::to_string(ratio) + " with T = " +
                            std::to_string(d.T()) + " leaves an empty segment");
  }
  const Eigen::Index n_val = d.T() - n_train;
  DatasetSplit out;
  out.train = Dataset{d.states.topRows(n_train + 1), d.inputs.topRows(n_train), d.meta};
  out.validation = Dataset{d.states.bottomRows(n_val + 1), d.inputs.bottomRows(n_val), d.meta};
  return out;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ", column '" + column +
                     "': cannot parse '" + s + "' as a number");
  }
}

}  // namespace detail

/// Header t,u_1..u_{n_u},x_1..x_{n_x}; one row per step t = 0..T. The final
/// row has empty input fields.
inline void write_csv(std::ostream& out, const Matrix& states, const Matrix& inputs) {
  out << "t";
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) out << ",u_" << j + 1;
  for (Eigen::Index j = 0; j < states.cols(); ++j) out << ",x_" << j + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < states.rows(); ++t) {
    out << t;
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
      out << ',';
      if (t < inputs.rows()) out << detail::format_double(inputs(t, j));
    }
    for (Eigen::Index j = 0; j < states.cols(); ++j) out << ',' << detail::format_double(states(t, j));
    out << '\n';
  }
}

inline void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open '" + path.string() + "' for writing");
  write_csv(out, d.states, d.inputs);
}

inline void save_csv(const Trajectory& tr, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open '" + path.string() + "' for writing");
  write_csv(out, tr.states, tr.inputs);
}

inline Dataset read_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  const std::vector<std::string> header = detail::split_fields(line);
  if (header.empty() || header[0] != "t") {
    throw ParseError(source + ": first column must be 't', got '" +
                     (header.empty() ? std::string() : header[0]) + "'");
  }
  std::size_t n_u = 0;
  std::size_t n_x = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expected_u = "u_" + std::to_string(n_u + 1);
    const std::string expected_x = "x_" + std::to_string(n_x + 1);
    if (n_x == 0 && header[c] == expected_u) {
      ++n_u;
    } else if (header[c] == expected_x) {
      ++n_x;
    } else {
      throw ParseError(source + ": unexpected header column '" + header[c] + "' (expected '" +
                       (n_x == 0 ? expected_u + "' or '" : std::string()) + expected_x + "')");
    }
  }
  if (n_u == 0) throw ParseError(source + ": header has no input column 'u_1'");
  if (n_x == 0) throw ParseError(source + ": header has no state column 'x_1'");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(detail::split_fields(line));
  }
  if (rows.size() < 2) {
    throw InvalidInputError(source + ": dataset needs at least two state rows (T >= 1), got " +
                            std::to_string(rows.size()));
  }
  const auto steps = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.states.resize(steps, static_cast<Eigen::Index>(n_x));
  d.inputs.resize(steps - 1, static_cast<Eigen::Index>(n_u));
  d.meta.scenario = source;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& f = rows[static_cast<std::size_t>(t)];
    const std::size_t line_no = static_cast<std::size_t>(t) + 2;
    if (f.size() != header.size()) {
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(f.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    if (detail::parse_double(f[0], line_no, "t") != static_cast<double>(t)) {
      throw ParseError(source + ": line " + std::to_string(line_no) + ": expected t = " +
                       std::to_string(t));
    }
    for (std::size_t j = 0; j < n_u; ++j) {
      const std::string& cell = f[1 + j];
      if (t == steps - 1) {
        if (!cell.empty()) {
          throw ParseError(source + ": final row must leave '" + header[1 + j] + "' empty");
        }
        continue;
      }
      d.inputs(t, static_cast<Eigen::Index>(j)) = detail::parse_double(cell, line_no, header[1 + j]);
    }
    for (std::size_t j = 0; j < n_x; ++j) {
      d.states(t, static_cast<Eigen::Index>(j)) =
          detail::parse_double(f[1 + n_u + j], line_no, header[1 + n_u + j]);
    }
  }
  d.validate();
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open dataset '" + path.string() + "'");
  return read_csv(in, path.string());
}

}  // namespace lureid
