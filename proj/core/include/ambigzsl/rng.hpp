#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ambigzsl {

// Derives an independent stream seed from a master seed and a stream name.
// Stable across platforms; used to keep optional components (e.g. the
// ambiguity regularizer) from perturbing the random state of the rest of
// the training loop.
uint64_t derive_stream_seed(uint64_t master_seed, std::string_view stream_name);

// Seeded random stream with samplers owned by this project so that draws
// are reproducible independent of the standard library implementation.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n); n >= 1.
  int uniform_int(int n);

  // Standard normal via Box-Muller (no cached spare, fully deterministic).
  double normal();
  double normal(double mean, double stddev);

  // Gamma(alpha, 1) via Marsaglia-Tsang; alpha > 0.
  double gamma(double alpha);
  // Beta(a, b) from two gamma draws; a, b > 0.
  double beta(double a, double b);

  // Fisher-Yates over [0, n) index vector.
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace ambigzsl
