#include "warmup_lab/schedules.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wl {

namespace {

void check_rate(double x, const char* what) {
  require(std::isfinite(x) && x > 0.0, ErrorCode::precondition, fmt::format("{} must be positive and finite", what));
}

void check_floor(double floor, double peak) {
  require(std::isfinite(floor) && floor > 0.0 && floor <= peak, ErrorCode::precondition,
          "floor must lie in (0, peak]");
}

void check_horizon(std::uint64_t iter, std::uint64_t total) {
  if (iter >= total)
    fail(ErrorCode::out_of_horizon, fmt::format("iteration {} is beyond the schedule horizon of {}", iter, total));
}

// Linear interpolation from a to b with fraction t in [0, 1].
double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

StepPolicy StepPolicy::constant(double eta) {
  check_rate(eta, "constant step");
  return {ConstantStep{eta}};
}

StepPolicy StepPolicy::adaptive(double H0, double H1, double theta, double f_star) {
  check_rate(H0, "H0");
  require(std::isfinite(H1) && H1 >= 0.0, ErrorCode::precondition, "H1 must be non-negative");
  require(theta > 0.0 && theta <= 1.0, ErrorCode::precondition, "theta must lie in (0, 1]");
  require(std::isfinite(f_star), ErrorCode::precondition, "f_star must be finite");
  return {TheoreticalAdaptive{H0, H1, theta, f_star}};
}

StepPolicy StepPolicy::clipped(const StepPolicy& base, double C) {
  check_rate(C, "clip level C");
  return {PracticalClipped{std::make_shared<const StepPolicy>(base), C}};
}

StepPolicy StepPolicy::linear_warmup(double peak, std::uint64_t warmup_iters, std::uint64_t total_iters,
                                     double floor) {
  check_rate(peak, "peak");
  check_floor(floor, peak);
  require(warmup_iters >= 1 && warmup_iters < total_iters, ErrorCode::precondition,
          "linear warm-up needs 1 <= warmup_iters < total_iters");
  return {LinearWarmup{peak, warmup_iters, total_iters, floor}};
}

StepPolicy StepPolicy::wsd(double peak, std::uint64_t warmup_iters, std::uint64_t decay_iters,
                           std::uint64_t total_iters, double floor) {
  check_rate(peak, "peak");
  if (floor < 0.0) floor = 1e-5 * peak;
  check_floor(floor, peak);
  require(decay_iters >= 1 && warmup_iters + decay_iters <= total_iters, ErrorCode::precondition,
          "WSD needs decay_iters >= 1 and warmup_iters + decay_iters <= total_iters");
  return {Wsd{peak, warmup_iters, decay_iters, total_iters, floor}};
}

StepPolicy StepPolicy::cosine(double peak, std::uint64_t total_iters, double floor) {
  check_rate(peak, "peak");
  check_floor(floor, peak);
  require(total_iters >= 2, ErrorCode::precondition, "cosine schedule needs at least two iterations");
  return {Cosine{peak, total_iters, floor}};
}

std::string StepPolicy::kind() const {
  struct Visitor {
    std::string operator()(const ConstantStep&) const { return "constant"; }
    std::string operator()(const TheoreticalAdaptive&) const { return "adaptive"; }
    std::string operator()(const PracticalClipped&) const { return "clipped"; }
    std::string operator()(const LinearWarmup&) const { return "linear"; }
    std::string operator()(const Wsd&) const { return "wsd"; }
    std::string operator()(const Cosine&) const { return "cosine"; }
  };
  return std::visit(Visitor{}, v);
}

std::string StepPolicy::id() const {
  struct Visitor {
    std::string operator()(const ConstantStep& p) const { return fmt::format("constant(eta={})", p.eta); }
    std::string operator()(const TheoreticalAdaptive& p) const {
      return fmt::format("adaptive(H0={},H1={},theta={},f_star={})", p.H0, p.H1, p.theta, p.f_star);
    }
    std::string operator()(const PracticalClipped& p) const {
      return fmt::format("clipped(C={},base={})", p.C, p.base->id());
    }
    std::string operator()(const LinearWarmup& p) const {
      return fmt::format("linear(peak={},warmup={},total={},floor={})", p.peak, p.warmup_iters, p.total_iters,
                         p.floor);
    }
    std::string operator()(const Wsd& p) const {
      return fmt::format("wsd(peak={},warmup={},decay={},total={},floor={})", p.peak, p.warmup_iters, p.decay_iters,
                         p.total_iters, p.floor);
    }
    std::string operator()(const Cosine& p) const {
      return fmt::format("cosine(peak={},total={},floor={})", p.peak, p.total_iters, p.floor);
    }
  };
  return std::visit(Visitor{}, v);
}

std::optional<std::uint64_t> StepPolicy::horizon() const {
  if (const auto* p = std::get_if<LinearWarmup>(&v)) return p->total_iters;
  if (const auto* p = std::get_if<Wsd>(&v)) return p->total_iters;
  if (const auto* p = std::get_if<Cosine>(&v)) return p->total_iters;
  if (const auto* p = std::get_if<PracticalClipped>(&v)) return p->base->horizon();
  return std::nullopt;
}

bool StepPolicy::needs_loss() const {
  return std::holds_alternative<TheoreticalAdaptive>(v) || std::holds_alternative<PracticalClipped>(v);
}

double step_size(const StepPolicy& policy, const StepState& state) {
  struct Visitor {
    const StepState& s;

    double operator()(const ConstantStep& p) const { return p.eta; }

    double operator()(const TheoreticalAdaptive& p) const {
      require(std::isfinite(s.current_loss), ErrorCode::input, "current loss is not finite");
      const double ref = s.batch_f_star.value_or(p.f_star);
      double gap = s.current_loss - ref;
      if (gap < -1e-12)
        fail(ErrorCode::inconsistency,
             fmt::format("loss {} lies below the supplied optimum {} (gap {})", s.current_loss, ref, gap));
      gap = std::max(gap, 0.0);
      return p.theta / (10.0 * p.H0 + 20.0 * p.H1 * gap);
    }

    double operator()(const PracticalClipped& p) const {
      require(std::isfinite(s.current_loss), ErrorCode::input, "current loss is not finite");
      const double base = step_size(*p.base, s);
      return base / std::max(1.0, s.current_loss / p.C);
    }

    double operator()(const LinearWarmup& p) const {
      check_horizon(s.iter, p.total_iters);
      if (s.iter < p.warmup_iters) return p.peak * double(s.iter + 1) / double(p.warmup_iters);
      const double t = double(s.iter - p.warmup_iters + 1) / double(p.total_iters - p.warmup_iters);
      return lerp(p.peak, p.floor, t);
    }

    double operator()(const Wsd& p) const {
      check_horizon(s.iter, p.total_iters);
      if (s.iter < p.warmup_iters) return p.peak * double(s.iter + 1) / double(p.warmup_iters);
      const std::uint64_t decay_start = p.total_iters - p.decay_iters;
      if (s.iter < decay_start) return p.peak;
      const double t = double(s.iter - decay_start + 1) / double(p.decay_iters);
      return lerp(p.peak, p.floor, t);
    }

    double operator()(const Cosine& p) const {
      check_horizon(s.iter, p.total_iters);
      const double t = double(s.iter) / double(p.total_iters - 1);
      return p.floor + (p.peak - p.floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
  };
  return std::visit(Visitor{state}, policy.v);
}

double max_safe_constant_step(double f_w0, double H1) {
  // f_w0 = 1 is admitted: the runway starts exactly at loss 1.
  require(f_w0 >= 1.0, ErrorCode::precondition, "max_safe_constant_step needs f_w0 >= 1");
  require(H1 > 0.0, ErrorCode::precondition, "max_safe_constant_step needs H1 > 0");
  return 2.0 * (std::log(f_w0) + 1.0) / (f_w0 * H1);
}

}  // namespace wl
