#pragma once

#include <cmath>
#include <numbers>

#include "cartanlab/cartanlab.hpp"

namespace fixtures {

using namespace cartanlab;

// Companion matrix of x^3 - 3x - 1 and B = C^2 - 2I.
inline IntMatrix companion() { return IntMatrix{{0, 1, 0}, {0, 0, 1}, {1, 3, 0}}; }
inline IntMatrix second() { return companion() * companion() - IntMatrix::identity(3).scaled(2); }

inline CartanAction preset_action() { return build_cartan_action(std::vector<IntMatrix>{companion(), second()}); }

// Roots of x^3 - 3x - 1 in closed form: 2 cos(theta) with cos(3 theta) = 1/2.
inline std::vector<double> cubic_roots() {
  const double pi = std::numbers::pi;
  return {2 * std::cos(pi / 9), 2 * std::cos(5 * pi / 9), 2 * std::cos(7 * pi / 9)};
}

inline PerturbedAction<3> conjugated(double eps) {
  return make_conjugated_action(TorusDiffeo<3>(cyclic_sine_field<3>(), eps), preset_action());
}

// Stable eigenvector of A in the closed form (1, r, r^2) for C, since C is a
// companion matrix; B shares eigenvectors.
inline Vec<3> companion_eigenvector(double r) { return Vec<3>(1.0, r, r * r).normalized(); }

}  // namespace fixtures
