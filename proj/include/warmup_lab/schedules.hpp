#pragma once

#include "warmup_lab/core.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

namespace wl {

struct StepPolicy;

struct ConstantStep {
  double eta = 0.0;
};

// eta_k = theta / (10 H0 + 20 H1 (f(w_k) - f*)).
struct TheoreticalAdaptive {
  double H0 = 0.0;
  double H1 = 0.0;
  double theta = 1.0;
  double f_star = 0.0;
};

// base_k / max{1, current_loss / C}.
struct PracticalClipped {
  std::shared_ptr<const StepPolicy> base;
  double C = 0.0;
};

struct LinearWarmup {
  double peak = 0.0;
  std::uint64_t warmup_iters = 0;
  std::uint64_t total_iters = 0;
  double floor = 0.0;
};

// Warm-up, stable at peak, then linear decay to floor over the last decay_iters.
struct Wsd {
  double peak = 0.0;
  std::uint64_t warmup_iters = 0;
  std::uint64_t decay_iters = 0;
  std::uint64_t total_iters = 0;
  double floor = 0.0;
};

struct Cosine {
  double peak = 0.0;
  std::uint64_t total_iters = 0;
  double floor = 0.0;
};

struct StepPolicy {
  using Variant = std::variant<ConstantStep, TheoreticalAdaptive, PracticalClipped, LinearWarmup, Wsd, Cosine>;
  Variant v;

  static StepPolicy constant(double eta);
  static StepPolicy adaptive(double H0, double H1, double theta, double f_star);
  static StepPolicy clipped(const StepPolicy& base, double C);
  static StepPolicy linear_warmup(double peak, std::uint64_t warmup_iters, std::uint64_t total_iters, double floor);
  // floor < 0 selects the default 1e-5 * peak.
  static StepPolicy wsd(double peak, std::uint64_t warmup_iters, std::uint64_t decay_iters, std::uint64_t total_iters,
                        double floor = -1.0);
  static StepPolicy cosine(double peak, std::uint64_t total_iters, double floor);

  // Short human-readable identifier, e.g. "constant(eta=0.1)".
  std::string id() const;
  std::string kind() const;
  // Finite schedules refuse iterations at or beyond this horizon.
  std::optional<std::uint64_t> horizon() const;
  bool needs_loss() const;
};

struct StepState {
  std::uint64_t iter = 0;
  double current_loss = 0.0;
  std::optional<double> batch_f_star;
};

double step_size(const StepPolicy& policy, const StepState& state);

// Divergence threshold 2 (log f_w0 + 1) / (f_w0 H1) for constant-step GD on
// the exponential-quadratic construction.
double max_safe_constant_step(double f_w0, double H1);

}  // namespace wl
