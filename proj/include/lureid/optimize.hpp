#pragma once

// Smooth unconstrained minimization by BFGS with central finite-difference
// gradients and an Armijo backtracking line search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lureid/linalg.hpp"

namespace lureid::optimize {

using Objective = std::function<double(const Vector&)>;

struct BfgsOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-6;
  double relative_step = 1e-6;  // h_i = relative_step * (1 + |x_i|)
  int max_backtracks = 60;
};

struct BfgsResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

inline Vector fd_gradient(const Objective& f, const Vector& x, double relative_step = 1e-6) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = relative_step * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline BfgsResult minimize_bfgs(const Objective& f, const Vector& x0,
                                const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = x0;
  res.value = f(x0);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  Vector g = fd_gradient(f, res.x, opt.relative_step);
  res.gradient_norm = g.norm();
  Matrix h_inv = Matrix::Identity(n, n);
  bool first_step = true;
  bool steepest = true;

  while (res.gradient_norm > opt.gradient_tol) {
    if (res.iterations >= opt.max_iterations) return res;
    Vector d = -h_inv * g;
    if (g.dot(d) >= 0.0) {
      h_inv.setIdentity();
      steepest = true;
      d = -g;
    }
    const double slope = g.dot(d);
    double step = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    for (int k = 0; k < opt.max_backtracks; ++k) {
      x_new = res.x + step * d;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted) {
      // Steepest descent restart once before giving up.
      if (!steepest) {
        h_inv.setIdentity();
        first_step = true;
        steepest = true;
        continue;
      }
      res.line_search_failed = true;
      return res;
    }
    const Vector g_new = fd_gradient(f, x_new, opt.relative_step);
    const Vector s = x_new - res.x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_step) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix i_n = Matrix::Identity(n, n);
      h_inv = (i_n - rho * s * y.transpose()) * h_inv * (i_n - rho * y * s.transpose()) +
              rho * s * s.transpose();
      first_step = false;
      steepest = false;
    }
    res.x = x_new;
    res.value = f_new;
    g = g_new;
    res.gradient_norm = g.norm();
  }
  res.converged = true;
  return res;
}

/// Coordinates along which f has (numerically) zero curvature at x.
inline std::vector<Eigen::Index> flat_directions(const Objective& f, const Vector& x) {
  std::vector<Eigen::Index> flat;
  const double f0 = f(x);
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-3 * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    const double curvature = (up - 2.0 * f0 + down) / (h * h);
    if (std::abs(curvature) <= 1e-10 * std::max(1.0, std::abs(f0))) flat.push_back(i);
  }
  return flat;
}

}  // namespace lureid::optimize
