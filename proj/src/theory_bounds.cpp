#include "warmup_lab/theory.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wl {

const char* bound_kind_name(BoundKind k) {
  switch (k) {
    case BoundKind::upper_aiming: return "upper_aiming";
    case BoundKind::upper_pl: return "upper_pl";
    case BoundKind::upper_nonconvex: return "upper_nonconvex";
    case BoundKind::lower_nonconvex: return "lower_nonconvex";
    case BoundKind::lower_convex: return "lower_convex";
    case BoundKind::lower_pl: return "lower_pl";
  }
  return "unknown";
}

BoundKind parse_bound_kind(const std::string& name) {
  for (BoundKind k : {BoundKind::upper_aiming, BoundKind::upper_pl, BoundKind::upper_nonconvex,
                      BoundKind::lower_nonconvex, BoundKind::lower_convex, BoundKind::lower_pl})
    if (name == bound_kind_name(k)) return k;
  fail(ErrorCode::input, fmt::format("unknown bound kind '{}'", name));
}

namespace {

double need(const std::optional<double>& v, const char* name, BoundKind kind, bool allow_zero = false) {
  if (!v) fail(ErrorCode::input, fmt::format("{} needs input {}", bound_kind_name(kind), name));
  const bool ok = allow_zero ? *v >= 0.0 : *v > 0.0;
  require(ok && std::isfinite(*v), ErrorCode::precondition,
          fmt::format("{} needs {} {} (got {})", bound_kind_name(kind), name, allow_zero ? ">= 0" : "> 0", *v));
  return *v;
}

}  // namespace

BoundPrediction predict_bound(BoundKind kind, const BoundInputs& in) {
  BoundPrediction p;
  p.kind = kind;
  p.inputs = in;
  switch (kind) {
    case BoundKind::upper_aiming: {
      const double H0 = need(in.H0, "H0", kind), H1 = need(in.H1, "H1", kind, true);
      const double theta = need(in.theta, "theta", kind), dist = need(in.dist0, "dist0", kind, true);
      const double eps = need(in.eps, "eps", kind);
      p.iters = 20.0 * H0 * dist * dist / (theta * theta * eps) + 40.0 * H1 * dist * dist / (theta * theta);
      break;
    }
    case BoundKind::upper_pl: {
      const double H0 = need(in.H0, "H0", kind), H1 = need(in.H1, "H1", kind, true);
      const double delta = need(in.delta0, "delta0", kind, true), mu = need(in.mu, "mu", kind);
      const double eps = need(in.eps, "eps", kind);
      if (H1 > 0.0) {
        p.iters = 40.0 * H1 * delta / mu + 20.0 * H0 / mu * std::max(0.0, std::log(H0 / (2.0 * H1 * eps)));
      } else {
        // H1 -> 0 limit: the smooth PL rate for step 1/(10 H0).
        p.iters = delta > eps ? 20.0 * H0 / mu * std::log(delta / eps) : 0.0;
      }
      break;
    }
    case BoundKind::upper_nonconvex: {
      const double H0 = need(in.H0, "H0", kind), H1 = need(in.H1, "H1", kind, true);
      const double delta = need(in.delta0, "delta0", kind, true), eps = need(in.eps, "eps", kind);
      const double k = 20.0 * (H0 + 2.0 * H1 * delta) * delta /
                       (eps * eps * (1.0 + H1 * delta / (2.0 * H0 + 4.0 * H1 * delta)));
      p.iters = std::max(6.0, k);
      break;
    }
    case BoundKind::lower_nonconvex:
    case BoundKind::lower_convex:
    case BoundKind::lower_pl: {
      const double H1 = need(in.H1, "H1", kind), delta = need(in.delta0, "delta0", kind);
      const double eps = need(in.eps, "eps", kind);
      require(eps <= delta, ErrorCode::precondition,
              fmt::format("{} needs eps <= delta0 (got eps = {}, delta0 = {})", bound_kind_name(kind), eps, delta));
      const double denom = std::log(delta) + 1.0;
      require(denom > 0.0, ErrorCode::precondition,
              fmt::format("{} needs log(delta0) + 1 > 0 (delta0 > 1/e)", bound_kind_name(kind)));
      const double lead = H1 * delta / denom;
      if (kind == BoundKind::lower_nonconvex) {
        p.iters = lead * (delta - 2.0 * eps * eps) / (8.0 * eps * eps);
      } else if (kind == BoundKind::lower_convex) {
        p.iters = lead * (delta - eps) / (4.0 * eps);
      } else {
        const double mu = need(in.mu, "mu", kind);
        p.iters = lead / (4.0 * mu) * std::log(delta / eps);
      }
      p.iters = std::max(0.0, p.iters);
      break;
    }
  }
  require(std::isfinite(p.iters), ErrorCode::internal, "bound evaluated to a non-finite value");
  return p;
}

}  // namespace wl
