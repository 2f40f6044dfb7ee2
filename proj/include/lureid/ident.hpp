#pragma once

// Kernel-regularized identification of the affine linear part plus a kernel
// residual, and the Lipschitz/contraction certificate of the result.
//
// For a fixed parameter vector theta the optimal residual is kernel ridge
// regression on the targets R(theta) = X+ - X A(theta)^T - U B(theta)^T:
//   Omega(theta) = (K + gamma I)^{-1} R(theta)
// and theta itself minimizes the reduced objective
//   |R - K Omega|_F^2 + gamma tr(Omega^T K Omega) = gamma tr(R^T Psi R),
// with Psi = (K + gamma I)^{-1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lureid/errors.hpp"
#include "lureid/kernel.hpp"
#include "lureid/linalg.hpp"
#include "lureid/model.hpp"
#include "lureid/optimize.hpp"

namespace lureid {

/// Gram matrix of the regressor states and its PSD square root. Depends on
/// the data and kernel only, so one instance serves a whole gamma sweep.
struct GramContext {
  kernel::GramMatrix gram;
  linalg::SymMatrix sqrt_k;

  static std::shared_ptr<const GramContext> build(const KernelSpec& spec, const Matrix& states) {
    auto g = kernel::gram(spec, states);
    auto root = linalg::psd_sqrt(g.K);
    return std::make_shared<const GramContext>(GramContext{std::move(g), std::move(root)});
  }
};

/// Training data for one fit: rows t = 0..T-1 of states x_t, inputs u_t and
/// successors x_{t+1}.
class RegressionProblem {
 public:
  RegressionProblem(Matrix states, Matrix inputs, Matrix successors, AffineLinearPart linear,
                    std::shared_ptr<const GramContext> gram, double gamma)
      : states_(std::move(states)),
        inputs_(std::move(inputs)),
        successors_(std::move(successors)),
        linear_(std::move(linear)),
        gram_(std::move(gram)),
        gamma_(gamma),
        psi_((validate(), gram_->gram.K.shifted(gamma_))) {}

  RegressionProblem(Matrix states, Matrix inputs, Matrix successors, AffineLinearPart linear,
                    const KernelSpec& spec, double gamma)
      : RegressionProblem(states, std::move(inputs), std::move(successors), std::move(linear),
                          GramContext::build(spec, states), gamma) {}

  const Matrix& states() const noexcept { return states_; }
  const Matrix& inputs() const noexcept { return inputs_; }
  const Matrix& successors() const noexcept { return successors_; }
  const AffineLinearPart& linear() const noexcept { return linear_; }
  const kernel::GramMatrix& gram() const noexcept { return gram_->gram; }
  const Matrix& K() const noexcept { return gram_->gram.K.matrix(); }
  const Matrix& sqrt_K() const noexcept { return gram_->sqrt_k.matrix(); }
  const std::shared_ptr<const GramContext>& gram_context() const noexcept { return gram_; }
  const KernelSpec& kernel_spec() const noexcept { return gram_->gram.spec; }
  double gamma() const noexcept { return gamma_; }
  Eigen::Index T() const noexcept { return states_.rows(); }

  /// (K + gamma I)^{-1} B
  Matrix apply_psi(const Matrix& b) const { return psi_.solve(b); }

 private:
  void validate() const {
    linear_.validate();
    if (!gram_) throw InvalidInputError("RegressionProblem: missing Gram matrix");
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
      throw InvalidInputError("RegressionProblem: gamma must be positive, got " +
                              std::to_string(gamma_));
    }
    const Eigen::Index t = states_.rows();
    if (t < 1) throw InvalidInputError("RegressionProblem: no training transitions");
    if (states_.cols() != linear_.n_x() || successors_.cols() != linear_.n_x() ||
        successors_.rows() != t) {
      throw InvalidInputError("RegressionProblem: state/successor shapes do not match n_x");
    }
    if (inputs_.rows() != t || inputs_.cols() != linear_.n_u()) {
      throw InvalidInputError("RegressionProblem: input shape does not match T x n_u");
    }
    if (gram_->gram.points.rows() != t || gram_->gram.points != states_) {
      throw InvalidInputError("RegressionProblem: Gram points differ from the regressor states");
    }
  }

  Matrix states_;
  Matrix inputs_;
  Matrix successors_;
  AffineLinearPart linear_;
  std::shared_ptr<const GramContext> gram_;
  double gamma_;
  linalg::SpdFactor psi_;
};

namespace ident {

/// Row t: x_{t+1} - A(theta) x_t - B(theta) u_t.
inline Matrix residual_targets(const RegressionProblem& p, const Vector& theta) {
  const Matrix a = p.linear().assemble_A(theta);
  const Matrix b = p.linear().assemble_B(theta);
  return p.successors() - p.states() * a.transpose() - p.inputs() * b.transpose();
}

inline Matrix kernel_coefficients(const RegressionProblem& p, const Vector& theta) {
  return p.apply_psi(residual_targets(p, theta));
}

inline double reduced_objective(const RegressionProblem& p, const Vector& theta) {
  const Matrix r = residual_targets(p, theta);
  const Matrix omega = p.apply_psi(r);
  const Matrix k_omega = p.K() * omega;
  const double fit = (r - k_omega).squaredNorm();
  const double reg = (omega.array() * k_omega.array()).sum();  // tr(Omega^T K Omega)
  return fit + p.gamma() * reg;
}

/// Frobenius norm of sqrt(K) (K + gamma I)^{-1} R(theta); the RKHS norm of
/// the vector residual, which bounds its Euclidean Lipschitz constant.
inline double residual_lipschitz(const RegressionProblem& p, const Vector& theta) {
  return (p.sqrt_K() * kernel_coefficients(p, theta)).norm();
}

inline double a_norm(const RegressionProblem& p, const Vector& theta) {
  return linalg::spectral_norm(p.linear().assemble_A(theta));
}

inline double contraction_margin(const RegressionProblem& p, const Vector& theta) {
  return 1.0 - a_norm(p, theta) - residual_lipschitz(p, theta);
}

/// Assembles the identified model at theta: kernel coefficients plus metrics.
inline IdentifiedModel make_model(const RegressionProblem& p, const Vector& theta) {
  IdentifiedModel m;
  m.linear = p.linear();
  m.theta = theta;
  m.gamma = p.gamma();
  m.residual = ResidualModel{kernel_coefficients(p, theta), p.states(), p.kernel_spec()};
  m.metrics = ModelMetrics::from(a_norm(p, theta), (p.sqrt_K() * m.residual.omega).norm());
  return m;
}

/// Row of the state equation each parameter enters. Throws when a parameter
/// enters several rows or none.
inline std::vector<Eigen::Index> parameter_rows(const AffineLinearPart& linear) {
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(linear.n_theta()), -1);
  for (Eigen::Index k = 0; k < linear.n_theta(); ++k) {
    for (Eigen::Index i = 0; i < linear.n_x(); ++i) {
      const bool used = linear.A_basis[k].row(i).cwiseAbs().maxCoeff() > 0.0 ||
                        linear.B_basis[k].row(i).cwiseAbs().maxCoeff() > 0.0;
      if (!used) continue;
      if (owner[k] >= 0) {
        throw InvalidInputError("parameter " + std::to_string(k) + " enters state rows " +
                                std::to_string(owner[k]) + " and " + std::to_string(i) +
                                "; the row-wise solve needs each parameter in one row");
      }
      owner[k] = i;
    }
    if (owner[k] < 0) {
      Vector dir = Vector::Unit(linear.n_theta(), k);
      throw IdentifiabilityError(
          "parameter " + std::to_string(k) + " has all-zero basis matrices", std::move(dir));
    }
  }
  return owner;
}

/// theta* = (Xi^T Psi Xi)^{-1} Xi^T Psi X0, solved independently per state row.
inline Vector solve_affine_closed_form(const RegressionProblem& p) {
  const AffineLinearPart& lin = p.linear();
  const std::vector<Eigen::Index> owner = parameter_rows(lin);
  const Eigen::Index n_theta = lin.n_theta();
  Vector theta = Vector::Zero(n_theta);

  // Offset-free targets for every row at once.
  const Matrix x0_all = p.successors() - p.states() * lin.A0.transpose() -
                        p.inputs() * lin.B0.transpose();

  for (Eigen::Index row = 0; row < lin.n_x(); ++row) {
    std::vector<Eigen::Index> params;
    for (Eigen::Index k = 0; k < n_theta; ++k) {
      if (owner[k] == row) params.push_back(k);
    }
    if (params.empty()) continue;
    const auto n_row = static_cast<Eigen::Index>(params.size());
    Matrix xi(p.T(), n_row);
    for (Eigen::Index c = 0; c < n_row; ++c) {
      const Eigen::Index k = params[c];
      xi.col(c) = p.states() * lin.A_basis[k].row(row).transpose() +
                  p.inputs() * lin.B_basis[k].row(row).transpose();
    }
    const Matrix psi_xi = p.apply_psi(xi);
    const Matrix normal = 0.5 * (xi.transpose() * psi_xi + psi_xi.transpose() * xi);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (!(lmax > 0.0) || lmin <= 1e-12 * lmax) {
      Vector dir = Vector::Zero(n_theta);
      for (Eigen::Index c = 0; c < n_row; ++c) dir(params[c]) = eig.eigenvectors()(c, 0);
      std::string msg = "normal matrix of state row " + std::to_string(row) +
                        " is singular; unidentifiable direction over parameters [";
      for (Eigen::Index c = 0; c < n_row; ++c) {
        msg += (c ? ", " : "") + std::to_string(params[c]);
      }
      throw IdentifiabilityError(msg + "]", std::move(dir));
    }
    const Vector rhs = psi_xi.transpose() * x0_all.col(row);
    const Vector sol = normal.ldlt().solve(rhs);
    for (Eigen::Index c = 0; c < n_row; ++c) theta(params[c]) = sol(c);
  }
  return theta;
}

/// Least-squares fit of the purely linear model (the gamma -> infinity
/// limit), solved jointly over all rows. Used as the default warm start.
inline Vector linear_least_squares(const RegressionProblem& p) {
  const AffineLinearPart& lin = p.linear();
  const Eigen::Index t = p.T();
  const Eigen::Index n_x = lin.n_x();
  const Matrix x0_all = p.successors() - p.states() * lin.A0.transpose() -
                        p.inputs() * lin.B0.transpose();
  // Time-major stacking: entry t * n_x + i.
  Matrix xi(t * n_x, lin.n_theta());
  Vector target(t * n_x);
  for (Eigen::Index k = 0; k < lin.n_theta(); ++k) {
    const Matrix contrib = p.states() * lin.A_basis[k].transpose() +
                           p.inputs() * lin.B_basis[k].transpose();
    for (Eigen::Index s = 0; s < t; ++s) xi.block(s * n_x, k, n_x, 1) = contrib.row(s).transpose();
  }
  for (Eigen::Index s = 0; s < t; ++s) target.segment(s * n_x, n_x) = x0_all.row(s).transpose();
  return xi.completeOrthogonalDecomposition().solve(target);
}

struct NumericSolveResult {
  Vector theta;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<Eigen::Index> flat_directions;
};

struct NumericOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-6;
};

/// Quasi-Newton minimization of the reduced objective from theta0.
/// Throws NonConvergenceError (carrying the best iterate) if the gradient
/// tolerance is not met.
inline NumericSolveResult solve_reduced_numeric(const RegressionProblem& p, const Vector& theta0,
                                                const NumericOptions& opt = {}) {
  p.linear().check_theta(theta0);
  if (!theta0.allFinite()) throw InvalidInputError("solve_reduced_numeric: non-finite theta0");
  const optimize::Objective f = [&p](const Vector& th) { return reduced_objective(p, th); };
  optimize::BfgsOptions bopt;
  bopt.max_iterations = opt.max_iterations;
  bopt.gradient_tol = opt.gradient_tol;
  const optimize::BfgsResult r = optimize::minimize_bfgs(f, theta0, bopt);
  if (!r.converged) {
    throw NonConvergenceError("solve_reduced_numeric: gradient norm " +
                                  std::to_string(r.gradient_norm) + " after " +
                                  std::to_string(r.iterations) + " iterations",
                              r.x);
  }
  return {r.x, r.value, r.gradient_norm, r.iterations, optimize::flat_directions(f, r.x)};
}

/// Unconstrained minimizer: closed form when every parameter belongs to one
/// state row, quasi-Newton from the linear least-squares start otherwise.
inline Vector solve_unconstrained(const RegressionProblem& p) {
  bool row_separable = true;
  try {
    parameter_rows(p.linear());
  } catch (const IdentifiabilityError&) {
    throw;
  } catch (const InvalidInputError&) {
    row_separable = false;
  }
  if (row_separable) return solve_affine_closed_form(p);
  return solve_reduced_numeric(p, linear_least_squares(p)).theta;
}

/// R(theta) = R0 - sum_k theta_k M_k is affine, so Psi R and sqrt(K) Psi R
/// are too. Precomputing their pieces makes the objective and constraint
/// O(T n_x n_theta) per evaluation, with no solves.
class AffineResidualCache {
 public:
  explicit AffineResidualCache(const RegressionProblem& p)
      : linear_(p.linear()), gamma_(p.gamma()) {
    const AffineLinearPart& lin = p.linear();
    const Eigen::Index rows = p.T() * lin.n_x();
    const Matrix r0 = p.successors() - p.states() * lin.A0.transpose() -
                      p.inputs() * lin.B0.transpose();
    const Matrix w0 = p.apply_psi(r0);
    r0_ = flatten(r0);
    w0_ = flatten(w0);
    s0_ = flatten(p.sqrt_K() * w0);
    m_.resize(rows, lin.n_theta());
    w_.resize(rows, lin.n_theta());
    s_.resize(rows, lin.n_theta());
    for (Eigen::Index k = 0; k < lin.n_theta(); ++k) {
      const Matrix mk = p.states() * lin.A_basis[k].transpose() +
                        p.inputs() * lin.B_basis[k].transpose();
      const Matrix wk = p.apply_psi(mk);
      m_.col(k) = flatten(mk);
      w_.col(k) = flatten(wk);
      s_.col(k) = flatten(p.sqrt_K() * wk);
    }
  }

  /// gamma <R, Psi R>, equal to the reduced objective.
  double objective(const Vector& theta) const {
    return gamma_ * (r0_ - m_ * theta).dot(w0_ - w_ * theta);
  }

  double residual_lipschitz(const Vector& theta) const { return (s0_ - s_ * theta).norm(); }

  double a_norm(const Vector& theta) const {
    return linalg::spectral_norm(linear_.assemble_A(theta));
  }

  double constraint(const Vector& theta) const { return a_norm(theta) + residual_lipschitz(theta); }

 private:
  static Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

  AffineLinearPart linear_;
  double gamma_;
  Vector r0_, w0_, s0_;
  Matrix m_, w_, s_;
};

struct ConstrainedResult {
  bool feasible = false;
  std::optional<Vector> theta;  // set only when feasible
  double constraint_value = std::numeric_limits<double>::quiet_NaN();
  bool constraint_active = false;
  bool converged = true;  // false: best feasible iterate returned with a warning
  std::string message;
};

struct ConstrainedOptions {
  int penalty_rounds = 8;
  double penalty_growth = 10.0;
  double initial_penalty = 10.0;
  double feasibility_tol = 1e-6;
  int restoration_steps = 50;
};

/// Minimizes the reduced objective subject to
///   |A(theta)|_2 + residual_lipschitz(theta) <= 1 - epsilon
/// by exterior quadratic penalty rounds, a constraint restoration pass, and
/// a hard final check. Never returns a theta that violates the bound by
/// more than feasibility_tol.
inline ConstrainedResult solve_constrained(const RegressionProblem& p, double epsilon,
                                           std::optional<Vector> theta0 = std::nullopt,
                                           const ConstrainedOptions& opt = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidInputError("solve_constrained: epsilon must lie in (0, 1), got " +
                            std::to_string(epsilon));
  }
  const double bound = 1.0 - epsilon;
  const AffineResidualCache cache(p);
  const auto constraint = [&cache](const Vector& th) { return cache.constraint(th); };

  const Vector start = theta0 ? *theta0 : solve_unconstrained(p);
  p.linear().check_theta(start);
  ConstrainedResult out;
  const double g_start = constraint(start);
  if (g_start <= bound) {
    out.feasible = true;
    out.theta = start;
    out.constraint_value = g_start;
    return out;
  }
  out.constraint_active = true;

  const double f_ref = std::max(cache.objective(start), 1e-12);
  Vector theta = start;
  double mu = opt.initial_penalty;
  bool all_converged = true;
  for (int round = 0; round < opt.penalty_rounds; ++round) {
    const optimize::Objective penalized = [&](const Vector& th) {
      const double v = std::max(0.0, constraint(th) - bound);
      return cache.objective(th) / f_ref + mu * v * v;
    };
    optimize::BfgsOptions bopt;
    bopt.gradient_tol = 1e-10;
    bopt.max_iterations = 500;
    const optimize::BfgsResult r = optimize::minimize_bfgs(penalized, theta, bopt);
    all_converged = all_converged && (r.converged || r.line_search_failed);
    theta = r.x;
    if (constraint(theta) - bound <= 0.0) break;
    mu *= opt.penalty_growth;
  }

  // Pull the exterior-penalty point back onto the feasible side with
  // Gauss-Newton steps on the constraint, aiming slightly inside.
  const double target = bound - 1e-9;
  for (int k = 0; k < opt.restoration_steps; ++k) {
    const double g = constraint(theta);
    if (g <= bound) break;
    const Vector grad = optimize::fd_gradient(constraint, theta);
    const double gg = grad.squaredNorm();
    if (!(gg > 0.0)) break;
    theta -= ((g - target) / gg) * grad;
  }

  const double g_final = constraint(theta);
  out.constraint_value = g_final;
  if (g_final <= bound + opt.feasibility_tol) {
    out.feasible = true;
    out.theta = theta;
    out.converged = all_converged;
    if (!all_converged) out.message = "penalty iterations did not fully converge; returning best feasible iterate";
  } else {
    out.feasible = false;
    out.message = "no parameter vector meets |A|_2 + l_delta <= " + std::to_string(bound) +
                  " (best " + std::to_string(g_final) + ")";
  }
  return out;
}

enum class FitMode { post_check, constrained };

inline std::string_view to_string(FitMode m) {
  return m == FitMode::post_check ? "post_check" : "constrained";
}

inline FitMode fit_mode_from_string(std::string_view s) {
  if (s == "post_check") return FitMode::post_check;
  if (s == "constrained") return FitMode::constrained;
  throw InvalidInputError("unknown mode '" + std::string(s) +
                          "' (expected post_check or constrained)");
}

struct FitResult {
  bool feasible = false;
  std::optional<IdentifiedModel> model;
  std::string message;
};

/// post_check: unconstrained solve, then the contraction test.
/// constrained: solve_constrained; no model when infeasible.
inline FitResult fit(const RegressionProblem& p, FitMode mode, double epsilon = 1e-3) {
  FitResult out;
  if (mode == FitMode::post_check) {
    out.model = make_model(p, solve_unconstrained(p));
    out.feasible = is_contractive(*out.model);
    return out;
  }
  const ConstrainedResult c = solve_constrained(p, epsilon);
  out.feasible = c.feasible;
  out.message = c.message;
  if (c.feasible) out.model = make_model(p, *c.theta);
  return out;
}

}  // namespace ident
}  // namespace lureid
