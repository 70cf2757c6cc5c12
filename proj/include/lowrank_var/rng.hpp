#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lrvar {

// SplitMix64 output function.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a path of labels,
// e.g. derive_seed(base, {r0, n, lambda_bits, replication}).
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

// Bit pattern of a double, for folding real-valued labels into seeds.
std::uint64_t double_bits(double x);

// mt19937_64 with portable variate generation: the uniform and normal draws
// are computed here rather than through <random> distributions, so a seed
// gives the same stream with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via the polar method.
  double normal();
  // Beta(lambda, 1) by inversion: F(x) = x^lambda.
  double beta_lambda_one(double lambda);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrvar
