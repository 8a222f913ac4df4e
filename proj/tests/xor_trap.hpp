#pragma once

// Two binary features whose interaction carries the hazard signal, plus a
// weak decoy so a myopic root split picks the wrong variable.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "ost/dataset.hpp"

namespace fixture {

inline ost::Dataset xor_trap(std::size_t n, std::uint64_t seed) {
  using ost::FeatureKind;
  ost::Dataset ds;
  ds.schema.features = {{"x1", FeatureKind::numeric, {}},
                        {"x2", FeatureKind::numeric, {}},
                        {"z", FeatureKind::numeric, {}}};
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = coin(rng), x2 = coin(rng), z = std::floor(u(rng) * 10.0);
    double rate = x1 != x2 ? 0.6 : 0.1;
    if (z >= 5) rate *= 1.25;
    const double life = -std::log1p(-u(rng)) / rate;
    const double censor = 2.0 + 8.0 * u(rng);
    const double t = std::min({life, censor, 10.0});
    ds.push_back("X" + std::to_string(i), {t, life <= std::min(censor, 10.0), 1.0}, std::vector<double>{x1, x2, z});
  }
  return ds;
}

}  // namespace fixture
