#pragma once

#include "warmup_lab/core.hpp"
#include "warmup_lab/optimize.hpp"
#include "warmup_lab/problems.hpp"
#include "warmup_lab/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wl {

enum class SmoothnessMethod { trajectory_secant, power_iteration, dense_eig };

const char* smoothness_method_name(SmoothnessMethod m);

struct SmoothnessSample {
  double loss_gap = 0.0;  // f(w) - f*, or the raw loss when f* is unknown
  double smoothness = 0.0;
  std::uint64_t iter = 0;
  SmoothnessMethod method = SmoothnessMethod::trajectory_secant;
};

// ---------------------------------------------------------------------------
// Local smoothness along a trajectory

enum class TraceMode { deterministic, stochastic };

struct SmoothnessTrace {
  std::vector<SmoothnessSample> samples;
  std::size_t skipped = 0;  // consecutive pairs with a step below 1e-14
};

// Secant ||g(w_{k+1}) - g(w_k)|| / ||w_{k+1} - w_k|| over consecutive
// snapshots. Deterministic mode uses full gradients; stochastic mode uses
// grad f_{S_k}(w_{k+1}) - grad f_{S_{k-1}}(w_k) with the recorded batches.
// Loss gaps are measured from `reference` when given, else from obj.f_star(),
// else the raw loss is used.
SmoothnessTrace local_smoothness_trace(const Objective& obj, const Trajectory& traj, TraceMode mode,
                                       std::optional<double> reference = std::nullopt);

// ---------------------------------------------------------------------------
// Hessian spectral norm

struct SpectralEstimate {
  double value = 0.0;
  bool converged = true;
  Index iterations = 0;
  SmoothnessMethod method = SmoothnessMethod::dense_eig;
};

// Dense symmetric eigensolve when dim <= 50 (analytic Hessian if the objective
// has one, else finite differences); power iteration otherwise.
SpectralEstimate hessian_spectral_norm(const Objective& obj, const Vec& w, double tol = 1e-9,
                                       Index max_iters = 5000, std::uint64_t seed = 0);
// Power iteration on finite-difference Hessian-vector products, two restarts.
SpectralEstimate power_iteration_spectral_norm(const Objective& obj, const Vec& w, double tol = 1e-9,
                                               Index max_iters = 5000, std::uint64_t seed = 0);
// Largest |eigenvalue| of the analytic Hessian, or of dense_hessian_fd.
double dense_spectral_norm(const Objective& obj, const Vec& w);

// ---------------------------------------------------------------------------
// (H0, H1) fits

enum class FitMode { ols, envelope };

struct H0H1Fit {
  double H0_hat = 0.0;
  double H1_hat = 0.0;
  double r_squared = 0.0;
  double max_violation = 0.0;  // largest amount a sample exceeds the fitted line
  FitMode mode = FitMode::ols;
  double rho = 1.0;
};

const char* fit_mode_name(FitMode m);
H0H1Fit fit_h0h1(const std::vector<SmoothnessSample>& samples, FitMode mode, double rho = 1.0);

// ---------------------------------------------------------------------------
// Region samplers

class PointSampler {
 public:
  virtual ~PointSampler() = default;
  // Throws ErrorCode::sampler when the region constraints cannot be met.
  virtual Vec sample(Rng& rng) const = 0;
  virtual std::string region() const = 0;
};

using SamplerPtr = std::shared_ptr<const PointSampler>;

// Uniform on the box [lo, hi]^dim.
SamplerPtr box_sampler(Index dim, double lo, double hi);
// Isotropic Gaussian with standard deviation `scale`.
SamplerPtr gaussian_sampler(Index dim, double scale);
// Cycles through a fixed list of points (e.g. trajectory snapshots).
SamplerPtr list_sampler(std::vector<Vec> points);
// Strongly balanced weights with Frobenius norm per layer drawn from [lo, hi].
SamplerPtr strongly_balanced_sampler(std::shared_ptr<const LeakyChain> net, double scale_lo, double scale_hi);
// Weakly balanced, strongly balanced from layer 2 on, lambda_min(W1^T W1) >= h.
SamplerPtr semi_linear_region_sampler(std::shared_ptr<const LeakyChain> net, double h, double scale_lo,
                                      double scale_hi);
// Weakly balanced, lambda_min(W_i^T W_i) >= h_i for i < l.
SamplerPtr deep_leaky_region_sampler(std::shared_ptr<const LeakyChain> net, std::vector<double> h, double scale_lo,
                                     double scale_hi);

// Smallest |pre-activation| admitted by the leaky-network samplers.
constexpr double kSamplerKinkMargin = 1e-4;
constexpr int kSamplerMaxAttempts = 10000;

// ---------------------------------------------------------------------------
// Certificate verification

struct CertificateViolation {
  Vec w;
  double f = 0.0;
  double smoothness = 0.0;
  double bound = 0.0;
  double excess = 0.0;
};

struct CertificateReport {
  Index n_points = 0;
  std::vector<CertificateViolation> violations;
  double worst_ratio = 0.0;   // max smoothness / bound over all points
  double max_gap = 0.0;       // largest loss gap visited
  bool pass() const { return violations.empty(); }
};

// Checks ||hess f(w)||_2 <= H0 + H1 (f(w) - f*)^rho + tol at n_points samples.
CertificateReport verify_certificate(const Objective& obj, const SmoothnessCertificate& cert,
                                     const PointSampler& sampler, Index n_points, double tol, std::uint64_t seed);

// Checks the (L0, L1) inequality ||hess f(w)||_2 <= L0 + L1 ||grad f(w)|| at the given points.
CertificateReport verify_l0l1(const Objective& obj, double L0, double L1, const std::vector<Vec>& points,
                              double tol);

}  // namespace wl
