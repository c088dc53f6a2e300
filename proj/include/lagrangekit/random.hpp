// Copyright (c) LagrangeKit contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace lagrangekit {

/// std::mt19937_64's output sequence is fixed by the C++ standard, unlike the
/// standard distributions, so every variate is derived from raw draws here.
using Rng = std::mt19937_64;

/// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Box-Muller, cosine branch; two draws per variate.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * standard_normal(rng);
  return v;
}

}  // namespace lagrangekit
