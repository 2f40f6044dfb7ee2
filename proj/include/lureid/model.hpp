#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lureid/errors.hpp"
#include "lureid/kernel.hpp"
#include "lureid/linalg.hpp"
#include "lureid/rng.hpp"

namespace lureid {

/// Linear block whose matrices are affine in the parameter vector:
///   A(theta) = A0 + sum_i theta_i A_basis[i]
///   B(theta) = B0 + sum_i theta_i B_basis[i]
struct AffineLinearPart {
  Matrix A0;
  std::vector<Matrix> A_basis;
  Matrix B0;
  std::vector<Matrix> B_basis;

  Eigen::Index n_x() const { return A0.rows(); }
  Eigen::Index n_u() const { return B0.cols(); }
  Eigen::Index n_theta() const { return static_cast<Eigen::Index>(A_basis.size()); }

  void validate() const {
    if (A0.rows() == 0 || A0.rows() != A0.cols()) {
      throw InvalidInputError("AffineLinearPart: A0 must be square and nonempty");
    }
    if (B0.rows() != A0.rows() || B0.cols() == 0) {
      throw InvalidInputError("AffineLinearPart: B0 must have n_x rows and n_u >= 1 columns");
    }
    if (A_basis.size() != B_basis.size()) {
      throw InvalidInputError("AffineLinearPart: A_basis and B_basis lengths differ (" +
                              std::to_string(A_basis.size()) + " vs " +
                              std::to_string(B_basis.size()) + ")");
    }
    for (std::size_t i = 0; i < A_basis.size(); ++i) {
      if (A_basis[i].rows() != n_x() || A_basis[i].cols() != n_x() ||
          B_basis[i].rows() != n_x() || B_basis[i].cols() != n_u()) {
        throw InvalidInputError("AffineLinearPart: basis matrix " + std::to_string(i) +
                                " has the wrong shape");
      }
    }
  }

  void check_theta(const Vector& theta) const {
    if (theta.size() != n_theta()) {
      throw InvalidInputError("parameter vector has length " + std::to_string(theta.size()) +
                              ", expected " + std::to_string(n_theta()));
    }
  }

  Matrix assemble_A(const Vector& theta) const {
    check_theta(theta);
    Matrix a = A0;
    for (Eigen::Index i = 0; i < n_theta(); ++i) a += theta(i) * A_basis[i];
    return a;
  }

  Matrix assemble_B(const Vector& theta) const {
    check_theta(theta);
    Matrix b = B0;
    for (Eigen::Index i = 0; i < n_theta(); ++i) b += theta(i) * B_basis[i];
    return b;
  }
};

/// Static feedback map phi from the closed built-in registry.
struct Nonlinearity {
  std::string name;
  Eigen::Index n_phi = 1;
  Eigen::Index min_input_dim = 1;
  std::function<Vector(const Vector&)> map;

  Vector operator()(const Vector& y) const { return map(y); }
};

inline const std::vector<std::string>& nonlinearity_names() {
  static const std::vector<std::string> names{"zero", "exp1", "exp2"};
  return names;
}

inline Nonlinearity nonlinearity(std::string_view name) {
  if (name == "zero") {
    return {"zero", 1, 1, [](const Vector&) { return Vector::Zero(1).eval(); }};
  }
  if (name == "exp1") {
    return {"exp1", 1, 2, [](const Vector& y) {
              Vector out(1);
              out(0) = 0.5 * std::cos(0.5 * y(0)) * std::sin(y(1));
              return out;
            }};
  }
  if (name == "exp2") {
    // log(e^{5a} + e^{-5a}) evaluated as 5|a| + log1p(e^{-10|a|}).
    return {"exp2", 1, 2, [](const Vector& y) {
              const double a = std::abs(5.0 * y(1));
              Vector out(1);
              out(0) = 0.1 * (a + std::log1p(std::exp(-2.0 * a))) + 7.0;
              return out;
            }};
  }
  throw InvalidInputError("unknown nonlinearity '" + std::string(name) +
                          "' (expected zero, exp1 or exp2)");
}

/// x+ = A(theta) x + B(theta) u + F phi(C x) + v,  recorded state x + w.
struct LureSystemSpec {
  AffineLinearPart linear;
  Matrix C;
  Matrix F;
  std::string nonlinearity = "zero";
  double process_noise_sigma = 0.0;
  double measurement_noise_sigma = 0.0;

  void validate() const {
    linear.validate();
    const Nonlinearity phi = lureid::nonlinearity(nonlinearity);
    if (C.cols() != linear.n_x() || C.rows() < phi.min_input_dim) {
      throw InvalidInputError("LureSystemSpec: C has the wrong shape for nonlinearity '" +
                              nonlinearity + "'");
    }
    if (F.rows() != linear.n_x() || F.cols() != phi.n_phi) {
      throw InvalidInputError("LureSystemSpec: F must be n_x x n_phi");
    }
    if (process_noise_sigma < 0.0 || measurement_noise_sigma < 0.0) {
      throw InvalidInputError("LureSystemSpec: noise sigmas must be nonnegative");
    }
  }
};

/// Kernel residual delta(x) = Omega^T k(x), with k(x)_j = kappa(x, points_j).
struct ResidualModel {
  Matrix omega;   // T x n_x
  Matrix points;  // T x n_x
  KernelSpec spec;
};

template <typename A>
Vector eval_residual(const ResidualModel& residual, const Eigen::MatrixBase<A>& x) {
  if (x.size() != residual.spec.input_dim) {
    throw InvalidInputError("eval_residual: state has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(residual.spec.input_dim));
  }
  if (residual.omega.rows() == 0) return Vector::Zero(residual.omega.cols());
  return residual.omega.transpose() * kernel::kernel_section(residual.spec, residual.points, x);
}

struct ModelMetrics {
  double a_norm = 0.0;
  double ell_delta = 0.0;
  double contraction_margin = 1.0;

  static ModelMetrics from(double a_norm, double ell_delta) {
    return {a_norm, ell_delta, 1.0 - a_norm - ell_delta};
  }
};

struct IdentifiedModel {
  AffineLinearPart linear;
  Vector theta;
  ResidualModel residual;
  double gamma = 1.0;
  ModelMetrics metrics;

  Matrix A() const { return linear.assemble_A(theta); }
  Matrix B() const { return linear.assemble_B(theta); }
};

/// Upper bound on the state Lipschitz constant of one model step.
inline double lipschitz_bound(const IdentifiedModel& m) {
  return m.metrics.a_norm + m.metrics.ell_delta;
}

inline bool is_contractive(const IdentifiedModel& m) { return m.metrics.contraction_margin > 0.0; }

struct Trajectory {
  Matrix states;  // (T+1) x n_x
  Matrix inputs;  // T x n_u

  Eigen::Index horizon() const { return inputs.rows(); }

  void validate() const {
    if (states.rows() != inputs.rows() + 1) {
      throw InvalidInputError("Trajectory: " + std::to_string(states.rows()) +
                              " state rows for " + std::to_string(inputs.rows()) +
                              " input rows");
    }
  }
};

inline constexpr double kDivergenceNorm = 1e12;

namespace detail {

inline void guard_divergence(const Vector& x, std::size_t step) {
  if (!x.allFinite() || x.norm() > kDivergenceNorm) {
    throw DivergenceError("simulation diverged at step " + std::to_string(step), step);
  }
}

inline void check_sim_args(Eigen::Index n_x, Eigen::Index n_u, const Vector& x0,
                           const Matrix& inputs) {
  if (x0.size() != n_x) {
    throw InvalidInputError("initial state has dimension " + std::to_string(x0.size()) +
                            ", expected " + std::to_string(n_x));
  }
  if (inputs.cols() != n_u && inputs.rows() > 0) {
    throw InvalidInputError("input matrix has " + std::to_string(inputs.cols()) +
                            " columns, expected " + std::to_string(n_u));
  }
}

}  // namespace detail

struct SimulationResult {
  Trajectory measured;
  Trajectory truth;
};

/// Simulates the true system; returns both the noise-free and the measured
/// trajectories. Process noise draws from Stream::process_noise and
/// measurement noise from Stream::measurement_noise, state-major.
inline SimulationResult simulate_system_with_truth(const LureSystemSpec& spec,
                                                   const Vector& theta_true, const Vector& x0,
                                                   const Matrix& inputs, std::uint64_t seed) {
  spec.validate();
  const Eigen::Index n_x = spec.linear.n_x();
  detail::check_sim_args(n_x, spec.linear.n_u(), x0, inputs);
  const Matrix a = spec.linear.assemble_A(theta_true);
  const Matrix b = spec.linear.assemble_B(theta_true);
  const Nonlinearity phi = nonlinearity(spec.nonlinearity);
  Rng process(seed, Stream::process_noise);
  Rng measurement(seed, Stream::measurement_noise);

  const Eigen::Index horizon = inputs.rows();
  Matrix truth(horizon + 1, n_x);
  Vector x = x0;
  detail::guard_divergence(x, 0);
  truth.row(0) = x.transpose();
  for (Eigen::Index t = 0; t < horizon; ++t) {
    Vector next = a * x + b * inputs.row(t).transpose() + spec.F * phi(spec.C * x);
    if (spec.process_noise_sigma > 0.0) {
      for (Eigen::Index i = 0; i < n_x; ++i) next(i) += process.normal(0.0, spec.process_noise_sigma);
    }
    detail::guard_divergence(next, static_cast<std::size_t>(t + 1));
    x = std::move(next);
    truth.row(t + 1) = x.transpose();
  }

  Matrix measured = truth;
  if (spec.measurement_noise_sigma > 0.0) {
    for (Eigen::Index t = 0; t <= horizon; ++t) {
      for (Eigen::Index i = 0; i < n_x; ++i) {
        measured(t, i) += measurement.normal(0.0, spec.measurement_noise_sigma);
      }
    }
  }
  return {{measured, inputs}, {truth, inputs}};
}

inline Trajectory simulate_system(const LureSystemSpec& spec, const Vector& theta_true,
                                  const Vector& x0, const Matrix& inputs, std::uint64_t seed) {
  return simulate_system_with_truth(spec, theta_true, x0, inputs, seed).measured;
}

/// One step of the identified model: A x + B u + delta(x).
inline Vector model_step(const IdentifiedModel& model, const Matrix& a, const Matrix& b,
                         const Vector& x, const Vector& u) {
  return a * x + b * u + eval_residual(model.residual, x);
}

/// Free-run rollout x^_{t+1} = A x^_t + B u_t + delta(x^_t).
inline Trajectory simulate_model(const IdentifiedModel& model, const Vector& x0,
                                 const Matrix& inputs) {
  const Eigen::Index n_x = model.linear.n_x();
  detail::check_sim_args(n_x, model.linear.n_u(), x0, inputs);
  const Matrix a = model.A();
  const Matrix b = model.B();
  Matrix states(inputs.rows() + 1, n_x);
  Vector x = x0;
  detail::guard_divergence(x, 0);
  states.row(0) = x.transpose();
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    x = model_step(model, a, b, x, inputs.row(t).transpose());
    detail::guard_divergence(x, static_cast<std::size_t>(t + 1));
    states.row(t + 1) = x.transpose();
  }
  return {states, inputs};
}

}  // namespace lureid
