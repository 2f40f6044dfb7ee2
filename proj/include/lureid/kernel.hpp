#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lureid/errors.hpp"
#include "lureid/linalg.hpp"
#include "lureid/rng.hpp"

namespace lureid {

enum class KernelFamily { gaussian, laplacian };

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::gaussian ? "gaussian" : "laplacian";
}

inline KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "laplacian") return KernelFamily::laplacian;
  throw InvalidInputError("unknown kernel family '" + std::string(name) +
                          "' (expected gaussian or laplacian)");
}

/// Scalar kernel on state vectors. The distance is tied to the family:
///   gaussian   exp(-|x - x'|_2^2 / (2 sigma^2))
///   laplacian  exp(-|x - x'|_1 / sigma)
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double sigma = 1.0;
  Eigen::Index input_dim = 1;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, double s, Eigen::Index dim) : family(f), sigma(s), input_dim(dim) {
    validate();
  }

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw InvalidInputError("KernelSpec: bandwidth must be positive, got " +
                              std::to_string(sigma));
    }
    if (input_dim < 1) throw InvalidInputError("KernelSpec: input_dim must be positive");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

namespace kernel {

namespace detail {

inline void check_dim(const KernelSpec& spec, Eigen::Index got, const char* what) {
  if (got != spec.input_dim) {
    throw InvalidInputError(std::string("kernel: ") + what + " has dimension " +
                            std::to_string(got) + ", expected " +
                            std::to_string(spec.input_dim));
  }
}

// No dimension checks; callers validate once.
template <typename A, typename B>
double eval_unchecked(const KernelSpec& spec, const Eigen::MatrixBase<A>& z1,
                      const Eigen::MatrixBase<B>& z2) {
  double acc = 0.0;
  if (spec.family == KernelFamily::gaussian) {
    for (Eigen::Index i = 0; i < z1.size(); ++i) {
      const double d = z1(i) - z2(i);
      acc += d * d;
    }
    return std::exp(-acc / (2.0 * spec.sigma * spec.sigma));
  }
  for (Eigen::Index i = 0; i < z1.size(); ++i) acc += std::abs(z1(i) - z2(i));
  return std::exp(-acc / spec.sigma);
}

}  // namespace detail

template <typename A, typename B>
double eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& z1,
            const Eigen::MatrixBase<B>& z2) {
  detail::check_dim(spec, z1.size(), "first argument");
  detail::check_dim(spec, z2.size(), "second argument");
  return detail::eval_unchecked(spec, z1, z2);
}

/// Points are stored row-wise: row t is the t-th state vector.
struct GramMatrix {
  linalg::SymMatrix K;
  Matrix points;
  KernelSpec spec;
};

inline GramMatrix gram(const KernelSpec& spec, const Matrix& points) {
  spec.validate();
  if (points.rows() == 0) throw InvalidInputError("gram: empty point list");
  detail::check_dim(spec, points.cols(), "point set");
  const Eigen::Index n = points.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = detail::eval_unchecked(spec, points.row(i), points.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return GramMatrix{linalg::SymMatrix(std::move(k)), points, spec};
}

/// Entry j is kappa(x, points.row(j)).
template <typename A>
Vector kernel_section(const KernelSpec& spec, const Matrix& points,
                      const Eigen::MatrixBase<A>& x) {
  detail::check_dim(spec, x.size(), "query point");
  if (points.rows() > 0) detail::check_dim(spec, points.cols(), "point set");
  Vector out(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    out(j) = detail::eval_unchecked(spec, x, points.row(j));
  }
  return out;
}

/// Axis-aligned box [lower, upper] in state space.
struct Box {
  Vector lower;
  Vector upper;
};

struct NonexpansiveReport {
  bool holds = true;
  double worst_ratio = 0.0;
  std::optional<std::pair<Vector, Vector>> worst_pair;
  std::size_t pairs_used = 0;
};

/// Ratio |k(z1,z1) - 2 k(z1,z2) + k(z2,z2)| / |z1 - z2|_2, or nothing when
/// the pair is closer than 1e-12.
inline std::optional<double> nonexpansive_ratio(const KernelSpec& spec, const Vector& z1,
                                                const Vector& z2) {
  detail::check_dim(spec, z1.size(), "first point");
  detail::check_dim(spec, z2.size(), "second point");
  const double dist = (z1 - z2).norm();
  if (dist <= 1e-12) return std::nullopt;
  const double feature = std::abs(detail::eval_unchecked(spec, z1, z1) -
                                  2.0 * detail::eval_unchecked(spec, z1, z2) +
                                  detail::eval_unchecked(spec, z2, z2));
  return feature / dist;
}

/// Samples n_samples point pairs uniformly from the box and reports the
/// largest nonexpansive_ratio. Holds when that ratio is at most one.
inline NonexpansiveReport check_nonexpansive(const KernelSpec& spec, const Box& box,
                                             std::size_t n_samples, std::uint64_t seed) {
  spec.validate();
  detail::check_dim(spec, box.lower.size(), "box lower corner");
  detail::check_dim(spec, box.upper.size(), "box upper corner");
  if (n_samples < 1) throw InvalidInputError("check_nonexpansive: n_samples must be >= 1");
  if ((box.upper - box.lower).minCoeff() <= 0.0) {
    throw InvalidInputError("check_nonexpansive: degenerate box");
  }

  Rng rng(seed, Stream::sampling);
  const auto draw = [&]() {
    Vector z(spec.input_dim);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.uniform(box.lower(i), box.upper(i));
    return z;
  };

  NonexpansiveReport report;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector z1 = draw();
    const Vector z2 = draw();
    const auto r = nonexpansive_ratio(spec, z1, z2);
    if (!r) continue;
    const double ratio = *r;
    ++report.pairs_used;
    if (ratio > report.worst_ratio || !report.worst_pair) {
      report.worst_ratio = ratio;
      report.worst_pair = std::make_pair(z1, z2);
    }
  }
  report.holds = report.worst_ratio <= 1.0;
  return report;
}

}  // namespace kernel
}  // namespace lureid
