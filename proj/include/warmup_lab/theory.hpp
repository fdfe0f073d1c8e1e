#pragma once

#include "warmup_lab/core.hpp"
#include "warmup_lab/optimize.hpp"
#include "warmup_lab/problems.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wl {

// ---------------------------------------------------------------------------
// Constant calculators. When f_star is absent the gap-form certificate is
// emitted with reference level 0 and flagged conservative.

// Strongly balanced deep linear network: H0 = 2 barH0 + H1 (1 + f*).
SmoothnessCertificate deep_linear_constants(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                            std::optional<double> f_star);
// One leaky-ReLU (slope b) before the output layer, lambda_min(W1^T W1) >= h.
SmoothnessCertificate semi_linear_constants(const DatasetPair& data, const std::vector<Index>& layer_dims, double b,
                                            double h, std::optional<double> f_star);
// l - 1 leaky-ReLUs, lambda_min(W_i^T W_i) >= h_i for i < l; rho = l - 1.
SmoothnessCertificate deep_leaky_constants(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                           const std::vector<double>& slopes, const std::vector<double>& h,
                                           std::optional<double> f_star);
SmoothnessCertificate two_layer_mse_constants(const ActivationSpec& act, double x_spec, double lambda1,
                                              double lambda2, std::optional<double> f_star = std::nullopt);
SmoothnessCertificate two_layer_ce_constants(const ActivationSpec& act, double x_spec, double lambda1,
                                             double lambda2, std::optional<double> f_star = std::nullopt);

// ---------------------------------------------------------------------------
// Transforms

// Root of nu = exp(-nu), solved once to 1e-14.
double lambert_nu();
// (L0, L1)-smoothness implies (H0, H1)-smoothness with these constants.
std::pair<double, double> l0l1_to_h0h1(double L0, double L1);
// Certificate of f + g with optimum h_star >= f* + g*.
SmoothnessCertificate sum_params(const SmoothnessCertificate& f, const SmoothnessCertificate& g, double h_star);
// Certificate of w -> g(A w) with optimum f_star >= g*.
SmoothnessCertificate affine_params(const SmoothnessCertificate& g, const Mat& A, double f_star);
// rho-certificate reduced to rho = 1 on the sublevel set {f <= f(w0)}.
std::pair<double, double> rho_reduction(double K0, double K_rho, double rho, double delta0);

// ---------------------------------------------------------------------------
// Iteration-count predictions

enum class BoundKind { upper_aiming, upper_pl, upper_nonconvex, lower_nonconvex, lower_convex, lower_pl };

const char* bound_kind_name(BoundKind k);
BoundKind parse_bound_kind(const std::string& name);

struct BoundInputs {
  std::optional<double> H0, H1, delta0, eps, theta, mu, dist0;
};

struct BoundPrediction {
  BoundKind kind = BoundKind::upper_aiming;
  double iters = 0.0;
  BoundInputs inputs;
};

BoundPrediction predict_bound(BoundKind kind, const BoundInputs& inputs);

// ---------------------------------------------------------------------------
// Lemma checkers. Points outside a lemma's scope are reported, not skipped.

struct LemmaViolation {
  Index index = 0;  // point index or iteration
  double lhs = 0.0;
  double rhs = 0.0;
  double excess = 0.0;
};

struct LemmaReport {
  std::string check;
  Index n_checked = 0;
  std::vector<Index> out_of_scope;
  std::vector<LemmaViolation> violations;
  double worst_margin = kInf;  // min over checked points of rhs - lhs
  bool pass() const { return violations.empty(); }
};

// ||grad f||^2 <= (9/4)(H0 + 3 H1 gap) gap.
LemmaReport check_gradient_bound(const Objective& obj, const SmoothnessCertificate& cert,
                                 const std::vector<Vec>& points);
// f(w - eta g) <= f(w) - eta ||g||^2 + (H0 + H1 gap) eta^2 ||g||^2 when eta ||g|| <= 1/sqrt(H1).
LemmaReport check_descent_step(const Objective& obj, const SmoothnessCertificate& cert, const Vec& w, double eta);
// f(w_{k+1}) <= f(w_k) - (eta_k/2) ||grad f(w_k)||^2 + 1e-9 (1 + |f(w_k)|) along the records.
LemmaReport check_trajectory_descent(const Trajectory& traj);

enum class ConditionKind { aiming, pl, interpolation };

struct ConditionSpec {
  ConditionKind kind = ConditionKind::aiming;
  double theta = 1.0;  // aiming
  double mu = 0.0;     // pl
};

// aiming: <grad f(w), w - proj(w)> >= theta (f(w) - f*); pl: ||grad f||^2 / 2 >= mu (f(w) - f*);
// interpolation: every component is minimised at proj(w).
LemmaReport check_condition(const ConditionSpec& spec, const Objective& obj, const std::vector<Vec>& points);

// While f(w_k) - f* >= H0 / (2 H1): gap_{k+1} <= (1 - theta^3 / (80 H1 dist0^2)) gap_k.
LemmaReport check_linear_decrease(const Objective& obj, const SmoothnessCertificate& cert, double theta,
                                  double dist0, const Trajectory& traj);

// ---------------------------------------------------------------------------
// (L0, L1) violation at counterexample witnesses

// ||hess f(w_m)|| / (L0 + L1 ||grad f(w_m)||) at witness m of the scalar
// counterexamples (sum_sin_square, affine_cos_exp). The witness is formed and
// evaluated with a 2048-bit mantissa (m <= 100): in double precision the rounding of w_m
// leaves a gradient of order e^{w_m} * 1e-16, which caps the ratio near
// 1 / (L1 * 1e-16) once e^{w_m} >> L0.
double counterexample_violation_ratio(CounterexampleKind kind, int m, double L0, double L1);

}  // namespace wl
