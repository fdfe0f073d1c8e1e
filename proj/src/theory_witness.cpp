#include "warmup_lab/theory.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

namespace wl {

namespace {

// The witnesses sit where the gradient vanishes exactly while e^w reaches
// 1e273 (m = 100); 2048 bits keep the rounding residual of the gradient far
// below any sensible L0. Beyond m = 112 the affine ratio no longer fits in a
// double, so the family is capped at 100.
using Wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<2048, boost::multiprecision::digit_base_2>>;
constexpr int kMaxWitness = 100;

}  // namespace

double counterexample_violation_ratio(CounterexampleKind kind, int m, double L0, double L1) {
  require(m >= 1, ErrorCode::precondition, "witness index starts at 1");
  require(m <= kMaxWitness, ErrorCode::capacity,
          fmt::format("witness index {} exceeds the supported maximum {}", m, kMaxWitness));
  require(L0 >= 0.0 && L1 >= 0.0 && L0 + L1 > 0.0, ErrorCode::precondition,
          "L0 and L1 must be non-negative and not both zero");
  const Wide pi = boost::multiprecision::default_ops::get_constant_pi<typename Wide::backend_type>();
  Wide hess, grad;
  switch (kind) {
    case CounterexampleKind::sum_sin_square: {
      // f' = 2 sin(w^2), f'' = 4 w cos(w^2) at w = sqrt(m pi).
      const Wide w = sqrt(Wide(m) * pi);
      hess = 4 * w * cos(w * w);
      grad = 2 * sin(w * w);
      break;
    }
    case CounterexampleKind::affine_cos_exp: {
      // f' = e^w (cos w - sin w), f'' = -2 sin(w) e^w at w = pi/4 + 2 pi m.
      const Wide w = pi / 4 + 2 * pi * m;
      const Wide e = exp(w);
      hess = -2 * sin(w) * e;
      grad = e * (cos(w) - sin(w));
      break;
    }
    default:
      fail(ErrorCode::capability,
           fmt::format("{} has no scalar witness family", counterexample_name(kind)));
  }
  const Wide ratio = abs(hess) / (Wide(L0) + Wide(L1) * abs(grad));
  return ratio.convert_to<double>();
}

}  // namespace wl
