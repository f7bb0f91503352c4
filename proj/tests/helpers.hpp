#pragma once

#include <cstdint>

#include "ecmar/matalg.hpp"
#include "ecmar/random.hpp"

namespace testutil {

inline ecmar::Matrix randn(Eigen::Index r, Eigen::Index c, ecmar::SeedStream& rng) {
  ecmar::Matrix a(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rng.normal();
  return a;
}

inline ecmar::Matrix randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  ecmar::SeedStream rng(seed);
  return randn(r, c, rng);
}

inline ecmar::Matrix random_spd(Eigen::Index d, ecmar::SeedStream& rng) {
  const ecmar::Matrix a = randn(d, d, rng);
  return a * a.transpose() + ecmar::Matrix::Identity(d, d);
}

inline double max_abs(const ecmar::Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace testutil
