#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cartanlab/parallel.hpp"
#include "cartanlab/perturbed_action.hpp"
#include "cartanlab/random.hpp"

namespace cartanlab {

struct DensityReport {
  /// max |g(x) - g(f^{-1} x) |det Df^{-1}(x)|| over samples and generators.
  double transfer_residual = 0.0;
  /// Quasi-Monte Carlo mean of g over the torus.
  double integral = 0.0;
  std::size_t samples = 0;
};

/// Checks the known invariant density g = 1/|det Dphi(phi^{-1} x)| of a
/// conjugated action on M low-discrepancy points.
template <int Dim>
DensityReport invariant_density_check(const PerturbedAction<Dim>& alpha, std::size_t samples) {
  require(alpha.kind() == PerturbedAction<Dim>::Kind::Conjugated, ErrorCode::InvalidInput,
          "the density oracle needs the conjugated family");
  DensityReport out;
  out.samples = samples;
  if (samples == 0) return out;
  KroneckerSequence seq(Dim);
  std::vector<double> g(samples), res(samples);
  parallel_for(samples, [&](std::size_t n) {
    Vec<Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = seq.coord(n, i);
    g[n] = alpha.oracle_density(x);
    double worst = 0.0;
    for (int j = 0; j < alpha.rank(); ++j) {
      auto back = alpha.generator_step(j, -1, x);
      double pulled = alpha.oracle_density(back.point) * std::abs(back.jacobian.determinant());
      worst = std::max(worst, std::abs(g[n] - pulled));
    }
    res[n] = worst;
  });
  double sum = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    sum += g[n];
    out.transfer_residual = std::max(out.transfer_residual, res[n]);
  }
  out.integral = sum / static_cast<double>(samples);
  return out;
}

}  // namespace cartanlab
