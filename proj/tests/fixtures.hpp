#pragma once

#include <random>

#include "lureid/lureid.hpp"

namespace fixture {

using namespace lureid;

/// x+ = theta x + b u, one state, one input.
inline AffineLinearPart scalar_linear(double b = 1.0) {
  AffineLinearPart lin;
  lin.A0 = Matrix::Zero(1, 1);
  lin.A_basis = {Matrix::Ones(1, 1)};
  lin.B0 = Matrix::Constant(1, 1, b);
  lin.B_basis = {Matrix::Zero(1, 1)};
  return lin;
}

/// Problem on every transition of a generated scenario.
inline RegressionProblem full_problem(const GeneratedData& g, const Scenario& s, double gamma) {
  return RegressionProblem(g.dataset.regressors(), g.dataset.inputs, g.dataset.successors(),
                           s.system.linear, s.kernel, gamma);
}

inline RegressionProblem train_problem(const GeneratedData& g, const Scenario& s, double gamma,
                                       double ratio = 0.7) {
  const DatasetSplit parts = split(g.dataset, ratio);
  return RegressionProblem(parts.train.regressors(), parts.train.inputs, parts.train.successors(),
                           s.system.linear, s.kernel, gamma);
}

/// Unconstrained fit on the training part of experiment 1.
inline IdentifiedModel experiment1_model(std::uint64_t seed, double gamma) {
  const Scenario s = builtin_scenario("experiment1");
  const GeneratedData g = generate_scenario(s, seed);
  const RegressionProblem p = train_problem(g, s, gamma);
  return ident::make_model(p, ident::solve_unconstrained(p));
}

inline Vector uniform_in(std::mt19937_64& eng, const kernel::Box& box) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vector z(box.lower.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = box.lower(i) + ud(eng) * (box.upper(i) - box.lower(i));
  return z;
}

/// Largest |delta(x) - delta(y)| / |x - y| over seeded pairs from the box.
inline double sampled_residual_lipschitz(const ResidualModel& r, const kernel::Box& box, int pairs,
                                         std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = uniform_in(eng, box);
    const Vector y = uniform_in(eng, box);
    const double d = (x - y).norm();
    if (d <= 1e-12) continue;
    worst = std::max(worst, (eval_residual(r, x) - eval_residual(r, y)).norm() / d);
  }
  return worst;
}

}  // namespace fixture
