#include "warmup_lab/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace wl {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Index Rng::uniform_index(Index n) {
  require(n > 0, ErrorCode::precondition, "uniform_index needs n > 0");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % un);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<Index>(x % un);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Vec Rng::normal_vec(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Mat Rng::normal_mat(Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

std::vector<Index> Rng::sample_without_replacement(Index n, Index k) {
  require(k >= 0 && k <= n, ErrorCode::precondition, "batch larger than population");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const Index j = i + uniform_index(n - i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Mat random_orthonormal(Rng& rng, Index rows, Index cols) {
  require(rows >= cols, ErrorCode::precondition, "orthonormal columns need rows >= cols");
  const Mat g = rng.normal_mat(rows, cols);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  // Fix column signs so the result is a deterministic function of g.
  const Mat r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace wl
