#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "deontic/rng.hpp"
#include "deontic/tensor.hpp"

namespace deontic::train {

inline double glorot_limit(long fan_in, long fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Glorot/Xavier uniform: entries i.i.d. U(-L, L), L = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> glorot_init(long fan_in,
                                                                                   long fan_out,
                                                                                   Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("glorot_init: fans must be positive");
  const double limit = glorot_limit(fan_in, fan_out);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
  return m;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> glorot_init(long fan_in,
                                                                                   long fan_out,
                                                                                   std::uint64_t seed) {
  Rng rng(seed);
  return glorot_init<Scalar>(fan_in, fan_out, rng);
}

}  // namespace deontic::train
