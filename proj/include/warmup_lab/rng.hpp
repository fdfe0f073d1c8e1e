#pragma once

#include "warmup_lab/core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace wl {

// Project-wide generator. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the transforms below are written out explicitly
// because std::*_distribution algorithms differ between standard libraries.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64+box_muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  Index uniform_index(Index n);           // {0, ..., n-1}
  double normal();                        // standard normal
  Vec normal_vec(Index n);
  Mat normal_mat(Index rows, Index cols);
  // k distinct indices from {0..n-1}, uniformly, in draw order.
  std::vector<Index> sample_without_replacement(Index n, Index k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives independent child seeds (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Random matrix with orthonormal columns (rows >= cols).
Mat random_orthonormal(Rng& rng, Index rows, Index cols);

}  // namespace wl
