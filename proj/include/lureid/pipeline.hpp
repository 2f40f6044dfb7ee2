#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lureid/data.hpp"
#include "lureid/errors.hpp"
#include "lureid/ident.hpp"
#include "lureid/kernel.hpp"
#include "lureid/model.hpp"

namespace lureid {

struct SweepConfig {
  double gamma_min = 1e-1;
  double gamma_max = 1e3;
  int n_gamma = 30;
  ident::FitMode mode = ident::FitMode::post_check;
  double epsilon = 1e-3;
  double split_ratio = 0.7;
  std::string selection = "min_val_rmse";
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0: one per hardware thread

  void validate() const {
    if (!(gamma_min > 0.0) || !std::isfinite(gamma_max) || n_gamma < 1) {
      throw InvalidInputError("sweep: need 0 < gamma_min and n_gamma >= 1");
    }
    if (n_gamma > 1 && !(gamma_min < gamma_max)) {
      throw InvalidInputError("sweep: gamma_min must be below gamma_max");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInputError("sweep: epsilon must lie in (0, 1)");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
      throw InvalidInputError("sweep: split ratio must lie in (0, 1)");
    }
    if (selection != "min_val_rmse") {
      throw InvalidInputError("sweep: unknown selection rule '" + selection + "'");
    }
  }
};

/// n_gamma log10-uniform points from gamma_min to gamma_max inclusive.
inline std::vector<double> gamma_grid(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.n_gamma == 1) return {cfg.gamma_min};
  const double lo = std::log10(cfg.gamma_min);
  const double hi = std::log10(cfg.gamma_max);
  std::vector<double> grid(static_cast<std::size_t>(cfg.n_gamma));
  for (int k = 0; k < cfg.n_gamma; ++k) {
    grid[static_cast<std::size_t>(k)] = std::pow(10.0, lo + (hi - lo) * k / (cfg.n_gamma - 1));
  }
  grid.front() = cfg.gamma_min;
  grid.back() = cfg.gamma_max;
  return grid;
}

/// Free-run rollout from the segment's first state against its measured
/// states. The anchor state itself is not scored. Divergence gives +inf.
inline double validation_rmse(const IdentifiedModel& model, const Dataset& val) {
  val.validate();
  Trajectory sim;
  try {
    sim = simulate_model(model, val.states.row(0).transpose(), val.inputs);
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
  const Matrix diff = sim.states.bottomRows(val.T()) - val.states.bottomRows(val.T());
  const double mse = diff.squaredNorm() / static_cast<double>(diff.size());
  return std::isfinite(mse) ? std::sqrt(mse) : std::numeric_limits<double>::infinity();
}

inline double parametric_error(const Vector& theta_star, const Vector& theta_true) {
  if (theta_star.size() != theta_true.size()) {
    throw InvalidInputError("parametric_error: length mismatch");
  }
  return (theta_star - theta_true).norm();
}

struct SweepRecord {
  double gamma = 0.0;
  bool feasible = false;
  std::optional<double> a_norm;
  std::optional<double> ell_delta;
  std::optional<double> theta_error;
  std::optional<double> val_rmse;
  std::optional<double> train_rmse;
  Vector theta;  // empty when no model was produced
  std::string message;

  std::optional<double> margin() const {
    if (!a_norm || !ell_delta) return std::nullopt;
    return 1.0 - *a_norm - *ell_delta;
  }
};

struct SweepReport {
  SweepConfig config;
  std::vector<SweepRecord> records;
  std::vector<double> feasible_set;
  std::optional<double> gamma_star;
  std::optional<IdentifiedModel> selected;
  // Best validation RMSE ignoring feasibility.
  std::optional<double> gamma_best_any;
  std::optional<IdentifiedModel> best_any;
  kernel::NonexpansiveReport kernel_check;
};

/// Index of the feasible record with the smallest finite validation RMSE;
/// ties go to the larger gamma.
inline std::optional<std::size_t> select_record(const std::vector<SweepRecord>& records,
                                                bool feasible_only = true) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SweepRecord& r = records[i];
    if (feasible_only && !r.feasible) continue;
    if (!r.val_rmse || !std::isfinite(*r.val_rmse)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const SweepRecord& b = records[*best];
    if (*r.val_rmse < *b.val_rmse || (*r.val_rmse == *b.val_rmse && r.gamma > b.gamma)) best = i;
  }
  return best;
}

inline kernel::Box bounding_box(const Matrix& points) {
  kernel::Box box{points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
  for (Eigen::Index i = 0; i < box.lower.size(); ++i) {
    if (box.upper(i) - box.lower(i) <= 1e-12) {
      box.lower(i) -= 0.5;
      box.upper(i) += 0.5;
    }
  }
  return box;
}

inline constexpr std::size_t kNonexpansiveSamples = 10000;

struct FitOutcome {
  SweepRecord record;
  std::optional<IdentifiedModel> model;
};

namespace detail {

inline FitOutcome fit_one(const DatasetSplit& parts, const std::shared_ptr<const GramContext>& gram,
                          const AffineLinearPart& linear, const std::optional<Vector>& theta_true,
                          const SweepConfig& cfg, double gamma) {
  FitOutcome out;
  out.record.gamma = gamma;
  try {
    const RegressionProblem p(parts.train.regressors(), parts.train.inputs,
                              parts.train.successors(), linear, gram, gamma);
    ident::FitResult fit = ident::fit(p, cfg.mode, cfg.epsilon);
    out.record.feasible = fit.feasible;
    out.record.message = fit.message;
    if (fit.model) {
      const IdentifiedModel& m = *fit.model;
      out.record.a_norm = m.metrics.a_norm;
      out.record.ell_delta = m.metrics.ell_delta;
      out.record.theta = m.theta;
      if (theta_true) out.record.theta_error = parametric_error(m.theta, *theta_true);
      out.record.val_rmse = validation_rmse(m, parts.validation);
      out.record.train_rmse = validation_rmse(m, parts.train);
      out.model = std::move(fit.model);
    }
  } catch (const Error& e) {
    out.record.feasible = false;
    out.record.message = e.what();
  }
  return out;
}

}  // namespace detail

/// Fits every gamma on the grid in cfg.mode, marks the feasible ones and
/// picks gamma* by validation RMSE. theta_true only feeds theta_error.
inline SweepReport run_sweep(const Dataset& dataset, const std::optional<Vector>& theta_true,
                             const KernelSpec& kernel, const AffineLinearPart& linear,
                             const SweepConfig& cfg) {
  cfg.validate();
  dataset.validate();
  linear.validate();
  if (dataset.T() < 10) {
    throw InvalidInputError("run_sweep: dataset needs at least 10 transitions, got " +
                            std::to_string(dataset.T()));
  }
  if (dataset.n_x() != linear.n_x() || dataset.n_u() != linear.n_u()) {
    throw InvalidInputError("run_sweep: dataset dimensions do not match the linear structure");
  }
  if (theta_true) linear.check_theta(*theta_true);

  SweepReport report;
  report.config = cfg;
  const DatasetSplit parts = split(dataset, cfg.split_ratio);
  const Matrix regressors = parts.train.regressors();
  report.kernel_check =
      kernel::check_nonexpansive(kernel, bounding_box(regressors), kNonexpansiveSamples, cfg.seed);
  const auto gram = GramContext::build(kernel, regressors);

  const std::vector<double> grid = gamma_grid(cfg);
  std::vector<FitOutcome> outcomes(grid.size());
  unsigned workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(grid.size()));
  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      outcomes[i] = detail::fit_one(parts, gram, linear, theta_true, cfg, grid[i]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  for (auto& o : outcomes) {
    if (o.record.feasible) report.feasible_set.push_back(o.record.gamma);
    report.records.push_back(o.record);
  }
  if (const auto best = select_record(report.records)) {
    report.gamma_star = report.records[*best].gamma;
    report.selected = outcomes[*best].model;
  }
  if (const auto best = select_record(report.records, false)) {
    report.gamma_best_any = report.records[*best].gamma;
    report.best_any = outcomes[*best].model;
  }
  return report;
}

/// One fit at a fixed gamma on the training part of the split, scored like a
/// sweep record.
inline FitOutcome identify_single(const Dataset& dataset, const std::optional<Vector>& theta_true,
                                  const KernelSpec& kernel, const AffineLinearPart& linear,
                                  const SweepConfig& cfg, double gamma) {
  cfg.validate();
  dataset.validate();
  linear.validate();
  if (dataset.n_x() != linear.n_x() || dataset.n_u() != linear.n_u()) {
    throw InvalidInputError("identify: dataset dimensions do not match the linear structure");
  }
  if (theta_true) linear.check_theta(*theta_true);
  const DatasetSplit parts = split(dataset, cfg.split_ratio);
  const auto gram = GramContext::build(kernel, parts.train.regressors());
  return detail::fit_one(parts, gram, linear, theta_true, cfg, gamma);
}

}  // namespace lureid
