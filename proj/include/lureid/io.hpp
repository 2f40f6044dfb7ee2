#pragma once

// JSON and CSV encodings of scenarios, models and sweep reports.
// Non-finite numbers are written as JSON null.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lureid/data.hpp"
#include "lureid/errors.hpp"
#include "lureid/ident.hpp"
#include "lureid/kernel.hpp"
#include "lureid/model.hpp"
#include "lureid/pipeline.hpp"
#include "lureid/rng.hpp"

namespace lureid::io {

using json = nlohmann::ordered_json;

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

inline json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const json& j, const std::string& what, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw ParseError(what + ": expected an array of rows");
  if (j.empty()) return Matrix(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from_json(j[i], what + " row " + std::to_string(i));
    if (row.size() != cols) throw ParseError(what + ": ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ParseError(what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": field '" + key + "': " + e.what());
  }
}

inline json to_json(const KernelSpec& k) {
  return json{{"family", std::string(to_string(k.family))}, {"sigma", k.sigma}};
}

inline KernelSpec kernel_from_json(const json& j, Eigen::Index input_dim) {
  return KernelSpec(kernel_family_from_string(get_field<std::string>(j, "family", "kernel")),
                    get_field<double>(j, "sigma", "kernel"), input_dim);
}

inline json to_json(const InputSignalSpec& s) {
  return json{{"amplitudes", s.amplitudes},
              {"frequencies", s.frequencies},
              {"phases", s.phases},
              {"noise_sigma", s.noise_sigma}};
}

inline json to_json(const Scenario& s) {
  return json{{"name", s.name},
              {"theta_true", to_json(s.theta_true)},
              {"horizon", s.horizon},
              {"seed", s.seed},
              {"input_signal", to_json(s.input_signal)},
              {"noise",
               {{"process_sigma", s.system.process_noise_sigma},
                {"measurement_sigma", s.system.measurement_noise_sigma}}},
              {"kernel", to_json(s.kernel)},
              {"rng", std::string(kRngAlgorithm)}};
}

/// Starts from the built-in scenario named by "name" and overrides whatever
/// fields are present.
inline Scenario scenario_from_json(const json& j) {
  const auto name = get_field<std::string>(j, "name", "scenario");
  Scenario s = builtin_scenario(name);
  if (j.contains("theta_true")) {
    s.theta_true = vector_from_json(j["theta_true"], "scenario.theta_true");
    s.system.linear.check_theta(s.theta_true);
  }
  if (j.contains("horizon")) s.horizon = get_field<Eigen::Index>(j, "horizon", "scenario");
  if (j.contains("seed")) s.seed = get_field<std::uint64_t>(j, "seed", "scenario");
  if (j.contains("input_signal")) {
    const json& in = j["input_signal"];
    if (in.contains("amplitudes")) s.input_signal.amplitudes = get_field<std::vector<double>>(in, "amplitudes", "input_signal");
    if (in.contains("frequencies")) s.input_signal.frequencies = get_field<std::vector<double>>(in, "frequencies", "input_signal");
    if (in.contains("phases")) s.input_signal.phases = get_field<std::vector<double>>(in, "phases", "input_signal");
    if (in.contains("noise_sigma")) s.input_signal.noise_sigma = get_field<double>(in, "noise_sigma", "input_signal");
    s.input_signal.validate();
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (n.contains("process_sigma")) s.system.process_noise_sigma = get_field<double>(n, "process_sigma", "noise");
    if (n.contains("measurement_sigma")) s.system.measurement_noise_sigma = get_field<double>(n, "measurement_sigma", "noise");
  }
  if (j.contains("kernel")) {
    KernelSpec k = s.kernel;
    if (j["kernel"].contains("family")) {
      k.family = kernel_family_from_string(get_field<std::string>(j["kernel"], "family", "kernel"));
    }
    if (j["kernel"].contains("sigma")) k.sigma = get_field<double>(j["kernel"], "sigma", "kernel");
    k.validate();
    s.kernel = k;
  }
  if (j.contains("rng") && get_field<std::string>(j, "rng", "scenario") != kRngAlgorithm) {
    throw ParseError("scenario: unsupported rng '" + j["rng"].get<std::string>() + "'");
  }
  s.system.validate();
  return s;
}

inline json to_json(const AffineLinearPart& lin) {
  json a_basis = json::array();
  json b_basis = json::array();
  for (const auto& m : lin.A_basis) a_basis.push_back(to_json(m));
  for (const auto& m : lin.B_basis) b_basis.push_back(to_json(m));
  return json{{"A0", to_json(lin.A0)}, {"A_basis", a_basis}, {"B0", to_json(lin.B0)}, {"B_basis", b_basis}};
}

inline AffineLinearPart linear_from_json(const json& j) {
  AffineLinearPart lin;
  lin.A0 = matrix_from_json(j.at("A0"), "linear.A0");
  lin.B0 = matrix_from_json(j.at("B0"), "linear.B0");
  for (const auto& m : j.at("A_basis")) lin.A_basis.push_back(matrix_from_json(m, "linear.A_basis"));
  for (const auto& m : j.at("B_basis")) lin.B_basis.push_back(matrix_from_json(m, "linear.B_basis"));
  lin.validate();
  return lin;
}

inline json to_json(const ModelMetrics& m) {
  return json{{"a_norm", number(m.a_norm)},
              {"ell_delta", number(m.ell_delta)},
              {"contraction_margin", number(m.contraction_margin)}};
}

inline json to_json(const IdentifiedModel& m) {
  return json{{"gamma", m.gamma},
              {"theta", to_json(m.theta)},
              {"metrics", to_json(m.metrics)},
              {"contractive", is_contractive(m)},
              {"kernel", to_json(m.residual.spec)},
              {"linear", to_json(m.linear)},
              {"omega", to_json(m.residual.omega)},
              {"points", to_json(m.residual.points)}};
}

inline IdentifiedModel model_from_json(const json& j) {
  IdentifiedModel m;
  m.linear = linear_from_json(get_field<json>(j, "linear", "model"));
  m.theta = vector_from_json(get_field<json>(j, "theta", "model"), "model.theta");
  m.linear.check_theta(m.theta);
  m.gamma = get_field<double>(j, "gamma", "model");
  m.residual.spec = kernel_from_json(get_field<json>(j, "kernel", "model"), m.linear.n_x());
  m.residual.omega = matrix_from_json(get_field<json>(j, "omega", "model"), "model.omega", m.linear.n_x());
  m.residual.points = matrix_from_json(get_field<json>(j, "points", "model"), "model.points", m.linear.n_x());
  const json metrics = get_field<json>(j, "metrics", "model");
  m.metrics = ModelMetrics::from(get_field<double>(metrics, "a_norm", "model.metrics"),
                                 get_field<double>(metrics, "ell_delta", "model.metrics"));
  return m;
}

inline json to_json(const SweepConfig& c) {
  return json{{"gamma_min", c.gamma_min},
              {"gamma_max", c.gamma_max},
              {"n_gamma", c.n_gamma},
              {"mode", std::string(ident::to_string(c.mode))},
              {"epsilon", c.epsilon},
              {"split_ratio", c.split_ratio},
              {"selection", c.selection},
              {"seed", c.seed}};
}

inline json to_json(const SweepRecord& r) {
  return json{{"gamma", r.gamma},
              {"feasible", r.feasible},
              {"a_norm", number(r.a_norm)},
              {"ell_delta", number(r.ell_delta)},
              {"theta_error", number(r.theta_error)},
              {"val_rmse", number(r.val_rmse)},
              {"train_rmse", number(r.train_rmse)},
              {"theta", to_json(r.theta)},
              {"message", r.message}};
}

/// The report's own config is merged over `config_echo`.
inline json to_json(const SweepReport& rep, json config_echo = json::object()) {
  const json own = to_json(rep.config);
  for (const auto& [k, v] : own.items()) config_echo[k] = v;
  json records = json::array();
  for (const auto& r : rep.records) records.push_back(to_json(r));
  return json{{"config", config_echo},
              {"records", records},
              {"feasible_set", rep.feasible_set},
              {"gamma_star", rep.gamma_star ? json(*rep.gamma_star) : json(nullptr)},
              {"selected_model", rep.selected ? to_json(*rep.selected) : json(nullptr)},
              {"gamma_best_any", rep.gamma_best_any ? json(*rep.gamma_best_any) : json(nullptr)},
              {"kernel_check",
               {{"holds", rep.kernel_check.holds},
                {"worst_ratio", number(rep.kernel_check.worst_ratio)},
                {"pairs", rep.kernel_check.pairs_used}}}};
}

/// model.json written by identify and sweep: one fit plus its scores.
inline json fit_document(const SweepRecord& r, const std::optional<IdentifiedModel>& model,
                         json config_echo) {
  return json{{"config", std::move(config_echo)},
              {"gamma", r.gamma},
              {"feasible", r.feasible},
              {"val_rmse", number(r.val_rmse)},
              {"train_rmse", number(r.train_rmse)},
              {"theta_error", number(r.theta_error)},
              {"message", r.message},
              {"model", model ? to_json(*model) : json(nullptr)}};
}

struct FitSummary {
  double gamma = 0.0;
  bool feasible = false;
  std::optional<double> val_rmse;
  std::optional<double> theta_error;
  std::optional<IdentifiedModel> model;
};

inline std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw ParseError(std::string("field '") + key + "' is not a number");
  return j[key].get<double>();
}

inline FitSummary fit_summary_from_json(const json& j) {
  FitSummary f;
  f.gamma = get_field<double>(j, "gamma", "fit");
  f.feasible = get_field<bool>(j, "feasible", "fit");
  f.val_rmse = optional_number(j, "val_rmse");
  f.theta_error = optional_number(j, "theta_error");
  if (j.contains("model") && !j["model"].is_null()) f.model = model_from_json(j["model"]);
  return f;
}

inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  if (std::isnan(*v)) return "nan";
  return detail::format_double(*v);
}

/// gamma,feasible,a_norm,ell_delta,theta_error,val_rmse,train_rmse
inline void write_sweep_csv(std::ostream& out, const SweepReport& rep) {
  out << "gamma,feasible,a_norm,ell_delta,theta_error,val_rmse,train_rmse\n";
  for (const auto& r : rep.records) {
    out << detail::format_double(r.gamma) << ',' << (r.feasible ? 1 : 0) << ','
        << csv_number(r.a_norm) << ',' << csv_number(r.ell_delta) << ','
        << csv_number(r.theta_error) << ',' << csv_number(r.val_rmse) << ','
        << csv_number(r.train_rmse) << '\n';
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open '" + path.string() + "' for writing");
  out << text;
}

}  // namespace lureid::io
