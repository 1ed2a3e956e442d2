#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cartanlab {

/// SplitMix64 finalizer. Used to derive independent per-item seeds from a
/// single run seed so parallel work is reproducible.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based split: seed for work item `index` of stream `stream`.
constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

/// Uniform doubles in [0,1) with a portable bit recipe (std distributions are
/// implementation-defined, which would break cross-platform reproducibility).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Additive-recurrence low-discrepancy sequence in [0,1)^dim built from the
/// generalized golden ratio (the unique positive root of x^(d+1) = x + 1).
class KroneckerSequence {
 public:
  explicit KroneckerSequence(int dim) : alpha_(dim) {
    double g = 1.5;
    for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (dim + 1));
    double p = 1.0;
    for (int i = 0; i < dim; ++i) {
      p /= g;
      alpha_[i] = p;
    }
  }

  int dim() const { return static_cast<int>(alpha_.size()); }

  /// Point n (n >= 0), offset by 1/2 so the origin is not sampled first.
  double coord(std::uint64_t n, int i) const {
    double v = 0.5 + alpha_[i] * static_cast<double>(n + 1);
    return v - std::floor(v);
  }

 private:
  std::vector<double> alpha_;
};

}  // namespace cartanlab
