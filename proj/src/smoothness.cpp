#include "warmup_lab/smoothness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wl {

const char* smoothness_method_name(SmoothnessMethod m) {
  switch (m) {
    case SmoothnessMethod::trajectory_secant: return "trajectory_secant";
    case SmoothnessMethod::power_iteration: return "power_iteration";
    case SmoothnessMethod::dense_eig: return "dense_eig";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Trajectory secant

SmoothnessTrace local_smoothness_trace(const Objective& obj, const Trajectory& traj, TraceMode mode,
                                       std::optional<double> reference) {
  const double ref = reference ? *reference : obj.f_star().value_or(0.0);
  if (mode == TraceMode::stochastic)
    require(!traj.batches.empty(), ErrorCode::precondition, "stochastic trace needs a trajectory with batches");
  SmoothnessTrace out;
  for (std::size_t j = 0; j + 1 < traj.snapshots.size(); ++j) {
    const Snapshot& a = traj.snapshots[j];
    const Snapshot& b = traj.snapshots[j + 1];
    if (b.iter != a.iter + 1) continue;
    const std::uint64_t k = a.iter;
    const double step = (b.w - a.w).norm();
    if (step < 1e-14) {
      ++out.skipped;
      continue;
    }
    double num;
    if (mode == TraceMode::deterministic) {
      num = (obj.gradient(b.w) - obj.gradient(a.w)).norm();
    } else {
      // grad f_{S_k}(w_{k+1}) - grad f_{S_{k-1}}(w_k); needs S_k and S_{k-1}.
      if (k == 0 || k >= traj.batches.size()) continue;
      num = (obj.batch_gradient(traj.batches[k], b.w) - obj.batch_gradient(traj.batches[k - 1], a.w)).norm();
    }
    SmoothnessSample s;
    s.iter = k;
    s.loss_gap = std::max(0.0, traj.records.at(k).f - ref);
    s.smoothness = num / step;
    s.method = SmoothnessMethod::trajectory_secant;
    if (std::isfinite(s.smoothness) && std::isfinite(s.loss_gap)) out.samples.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral norm

double dense_spectral_norm(const Objective& obj, const Vec& w) {
  Mat H;
  if (auto a = obj.analytic_hessian(w)) {
    H = 0.5 * (*a + a->transpose());
  } else {
    H = dense_hessian_fd(obj, w, default_fd_step(w));
  }
  require(H.allFinite(), ErrorCode::evaluation, "non-finite Hessian entries");
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

SpectralEstimate power_iteration_spectral_norm(const Objective& obj, const Vec& w, double tol, Index max_iters,
                                               std::uint64_t seed) {
  require(tol > 0.0, ErrorCode::precondition, "tolerance must be positive");
  require(max_iters >= 1, ErrorCode::precondition, "max_iters must be positive");
  const double h = default_fd_step(w);
  Rng rng(seed);
  SpectralEstimate best;
  best.method = SmoothnessMethod::power_iteration;
  best.converged = true;
  for (int restart = 0; restart < 2; ++restart) {
    Vec v = rng.normal_vec(w.size());
    v.normalize();
    double prev = 0.0, est = 0.0;
    bool converged = false;
    Index it = 0;
    while (it < max_iters) {
      ++it;
      const Vec u = finite_diff_hvp(obj, w, v, h);
      est = u.norm();  // |Rayleigh quotient| of H^2 at the normalised iterate
      if (est == 0.0) {
        converged = true;
        break;
      }
      v = u / est;
      if (std::abs(est - prev) <= tol * est) {
        converged = true;
        break;
      }
      prev = est;
    }
    best.iterations += it;
    best.converged = best.converged && converged;
    best.value = std::max(best.value, est);
  }
  return best;
}

SpectralEstimate hessian_spectral_norm(const Objective& obj, const Vec& w, double tol, Index max_iters,
                                       std::uint64_t seed) {
  require(tol > 0.0, ErrorCode::precondition, "tolerance must be positive");
  if (obj.dim() <= 50) {
    SpectralEstimate e;
    e.value = dense_spectral_norm(obj, w);
    e.method = SmoothnessMethod::dense_eig;
    return e;
  }
  return power_iteration_spectral_norm(obj, w, tol, max_iters, seed);
}

// ---------------------------------------------------------------------------
// Fits

const char* fit_mode_name(FitMode m) { return m == FitMode::ols ? "ols" : "envelope"; }

H0H1Fit fit_h0h1(const std::vector<SmoothnessSample>& samples, FitMode mode, double rho) {
  require(rho > 0.0, ErrorCode::precondition, "rho must be positive");
  if (samples.size() < 3) fail(ErrorCode::fit, fmt::format("need at least 3 samples, got {}", samples.size()));
  const Index n = static_cast<Index>(samples.size());
  Vec x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = std::pow(samples[i].loss_gap, rho);
    y[i] = samples[i].smoothness;
  }
  const double xm = x.mean(), ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  if (!(sxx > 1e-300 * n)) fail(ErrorCode::fit, "loss gaps are all equal; the fit is degenerate");
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();

  H0H1Fit fit;
  fit.mode = mode;
  fit.rho = rho;
  fit.H1_hat = sxy / sxx;
  fit.H0_hat = ym - fit.H1_hat * xm;
  if (fit.H1_hat < 0.0) {
    fit.H1_hat = 0.0;
    fit.H0_hat = ym;
  }
  if (mode == FitMode::envelope) fit.H0_hat = (y.array() - fit.H1_hat * x.array()).maxCoeff();
  fit.H0_hat = std::max(0.0, fit.H0_hat);

  const Vec resid = y.array() - (fit.H0_hat + fit.H1_hat * x.array());
  const double ss_res = resid.squaredNorm();
  const double ss_tot = (y.array() - ym).square().sum();
  if (ss_tot > 0.0)
    fit.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  else
    fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
  fit.max_violation = std::max(0.0, resid.maxCoeff());
  return fit;
}

// ---------------------------------------------------------------------------
// Samplers

namespace {

class BoxSampler final : public PointSampler {
 public:
  BoxSampler(Index dim, double lo, double hi) : dim_(dim), lo_(lo), hi_(hi) {}
  Vec sample(Rng& rng) const override {
    Vec w(dim_);
    for (Index i = 0; i < dim_; ++i) w[i] = rng.uniform(lo_, hi_);
    return w;
  }
  std::string region() const override { return fmt::format("box [{}, {}]^{}", lo_, hi_, dim_); }

 private:
  Index dim_;
  double lo_, hi_;
};

class GaussianSampler final : public PointSampler {
 public:
  GaussianSampler(Index dim, double scale) : dim_(dim), scale_(scale) {}
  Vec sample(Rng& rng) const override { return scale_ * rng.normal_vec(dim_); }
  std::string region() const override { return fmt::format("gaussian(scale={})", scale_); }

 private:
  Index dim_;
  double scale_;
};

class ListSampler final : public PointSampler {
 public:
  explicit ListSampler(std::vector<Vec> points) : points_(std::move(points)) {}
  Vec sample(Rng& rng) const override { return points_[static_cast<std::size_t>(rng.uniform_index(Index(points_.size())))]; }
  std::string region() const override { return fmt::format("list of {} points", points_.size()); }

 private:
  std::vector<Vec> points_;
};

// U diag(sigma) V^T with orthonormal U (rows x k), V (cols x k), k = cols,
// sigma drawn from [0.5, 1] and the whole matrix scaled to Frobenius norm t.
Mat well_conditioned(Rng& rng, Index rows, Index cols, double t) {
  const Mat U = random_orthonormal(rng, rows, cols);
  const Mat V = random_orthonormal(rng, cols, cols);
  Vec sigma(cols);
  for (Index j = 0; j < cols; ++j) sigma[j] = rng.uniform(0.5, 1.0);
  sigma *= t / sigma.norm();
  return U * sigma.asDiagonal() * V.transpose();
}

class NetSampler : public PointSampler {
 public:
  NetSampler(std::shared_ptr<const LeakyChain> net, double lo, double hi) : net_(std::move(net)), lo_(lo), hi_(hi) {
    require(net_ != nullptr, ErrorCode::precondition, "sampler needs a network");
    require(0.0 < lo_ && lo_ <= hi_, ErrorCode::precondition, "sampler scale range must satisfy 0 < lo <= hi");
  }

  Vec sample(Rng& rng) const override {
    for (int attempt = 0; attempt < kSamplerMaxAttempts; ++attempt) {
      const double t = rng.uniform(lo_, hi_);
      Vec w = draw(rng, t);
      if (net_->kink_distance(w) < kSamplerKinkMargin) continue;
      if (accept(w)) return w;
    }
    fail(ErrorCode::sampler,
         fmt::format("no point of region '{}' found in {} attempts", region(), kSamplerMaxAttempts));
  }

 protected:
  virtual Vec draw(Rng& rng, double t) const = 0;
  virtual bool accept(const Vec&) const { return true; }

  std::shared_ptr<const LeakyChain> net_;
  double lo_, hi_;
};

class StronglyBalancedSampler final : public NetSampler {
 public:
  using NetSampler::NetSampler;
  std::string region() const override { return "strongly balanced"; }

 protected:
  Vec draw(Rng& rng, double t) const override {
    return make_balanced_init(net_->layer_dims(), t, BalanceMode::strong, rng.next_u64()).data();
  }
};

class SemiLinearSampler final : public NetSampler {
 public:
  SemiLinearSampler(std::shared_ptr<const LeakyChain> net, double h, double lo, double hi)
      : NetSampler(std::move(net), lo, hi), h_(h) {
    const auto& dims = net_->layer_dims();
    require(h > 0.0, ErrorCode::precondition, "lambda_min floor h must be positive");
    if (dims[0] < dims[1])
      fail(ErrorCode::sampler, fmt::format("lambda_min(W1^T W1) is 0 whenever c = {} < n1 = {}", dims[0], dims[1]));
  }
  std::string region() const override {
    return fmt::format("weakly balanced, strongly balanced from layer 2, lambda_min(W1^T W1) >= {}", h_);
  }

 protected:
  Vec draw(Rng& rng, double t) const override {
    const auto& dims = net_->layer_dims();
    const std::vector<Index> tail_dims(dims.begin() + 1, dims.end());
    const Index r = *std::min_element(tail_dims.begin(), tail_dims.end());
    Vec s(r);
    for (Index j = 0; j < r; ++j) s[j] = rng.uniform(0.2, 1.0);
    s *= t / s.norm();
    const Vec tail = balanced_from_profile(tail_dims, s, rng.next_u64()).data();
    const Mat W1 = well_conditioned(rng, dims[0], dims[1], t);
    Vec w(W1.size() + tail.size());
    w << Eigen::Map<const Vec>(W1.data(), W1.size()), tail;
    return w;
  }
  bool accept(const Vec& w) const override { return net_->diagnostics(w).lambda_min_wtw[0] >= h_; }

 private:
  double h_;
};

class DeepLeakySampler final : public NetSampler {
 public:
  DeepLeakySampler(std::shared_ptr<const LeakyChain> net, std::vector<double> h, double lo, double hi)
      : NetSampler(std::move(net), lo, hi), h_(std::move(h)) {
    const auto& dims = net_->layer_dims();
    const std::size_t l = dims.size() - 1;
    require(h_.size() + 1 == l, ErrorCode::precondition,
            fmt::format("need {} lambda_min floors (one per layer below the input layer)", l - 1));
    for (std::size_t i = 1; i < l; ++i)
      if (dims[i - 1] < dims[i])
        fail(ErrorCode::sampler, fmt::format("lambda_min(W{0}^T W{0}) is 0 because n{1} = {2} < n{0} = {3}", i,
                                             i - 1, dims[i - 1], dims[i]));
  }
  std::string region() const override { return "weakly balanced with lambda_min(W_i^T W_i) floors"; }

 protected:
  Vec draw(Rng& rng, double t) const override {
    const auto& dims = net_->layer_dims();
    const std::size_t l = dims.size() - 1;
    std::vector<Mat> W;
    for (std::size_t i = 1; i <= l; ++i) {
      if (i < l) {
        W.push_back(well_conditioned(rng, dims[i - 1], dims[i], t));
      } else {
        Mat m = rng.normal_mat(dims[i - 1], dims[i]);
        W.push_back(m * (t / m.norm()));
      }
    }
    return pack_layers(W);
  }
  bool accept(const Vec& w) const override {
    const auto d = net_->diagnostics(w);
    for (std::size_t i = 0; i < h_.size(); ++i)
      if (d.lambda_min_wtw[i] < h_[i]) return false;
    return true;
  }

 private:
  std::vector<double> h_;
};

}  // namespace

SamplerPtr box_sampler(Index dim, double lo, double hi) {
  require(dim >= 1 && lo < hi, ErrorCode::precondition, "box sampler needs dim >= 1 and lo < hi");
  return std::make_shared<BoxSampler>(dim, lo, hi);
}

SamplerPtr gaussian_sampler(Index dim, double scale) {
  require(dim >= 1 && scale > 0.0, ErrorCode::precondition, "gaussian sampler needs dim >= 1 and scale > 0");
  return std::make_shared<GaussianSampler>(dim, scale);
}

SamplerPtr list_sampler(std::vector<Vec> points) {
  if (points.empty()) fail(ErrorCode::sampler, "list sampler needs at least one point");
  return std::make_shared<ListSampler>(std::move(points));
}

SamplerPtr strongly_balanced_sampler(std::shared_ptr<const LeakyChain> net, double scale_lo, double scale_hi) {
  return std::make_shared<StronglyBalancedSampler>(std::move(net), scale_lo, scale_hi);
}

SamplerPtr semi_linear_region_sampler(std::shared_ptr<const LeakyChain> net, double h, double scale_lo,
                                      double scale_hi) {
  return std::make_shared<SemiLinearSampler>(std::move(net), h, scale_lo, scale_hi);
}

SamplerPtr deep_leaky_region_sampler(std::shared_ptr<const LeakyChain> net, std::vector<double> h, double scale_lo,
                                     double scale_hi) {
  return std::make_shared<DeepLeakySampler>(std::move(net), std::move(h), scale_lo, scale_hi);
}

// ---------------------------------------------------------------------------
// Verification

CertificateReport verify_certificate(const Objective& obj, const SmoothnessCertificate& cert,
                                     const PointSampler& sampler, Index n_points, double tol, std::uint64_t seed) {
  require(n_points >= 1, ErrorCode::precondition, "need at least one point");
  require(tol >= 0.0, ErrorCode::precondition, "tolerance must be non-negative");
  Rng rng(seed);
  CertificateReport rep;
  rep.n_points = n_points;
  for (Index i = 0; i < n_points; ++i) {
    const Vec w = sampler.sample(rng);
    const double f = obj.value(w);
    require(std::isfinite(f), ErrorCode::evaluation, fmt::format("non-finite loss at sample {}", i));
    const double s = hessian_spectral_norm(obj, w, 1e-9, 5000, mix_seed(seed, static_cast<std::uint64_t>(i))).value;
    const double bound = cert.bound(f);
    rep.max_gap = std::max(rep.max_gap, f - cert.f_star);
    rep.worst_ratio = std::max(rep.worst_ratio, bound > 0.0 ? s / bound : (s > 0.0 ? kInf : 0.0));
    if (s > bound + tol) rep.violations.push_back({w, f, s, bound, s - bound});
  }
  return rep;
}

CertificateReport verify_l0l1(const Objective& obj, double L0, double L1, const std::vector<Vec>& points, double tol) {
  require(L0 >= 0.0 && L1 >= 0.0, ErrorCode::precondition, "L0 and L1 must be non-negative");
  CertificateReport rep;
  rep.n_points = static_cast<Index>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec& w = points[i];
    const double s = hessian_spectral_norm(obj, w).value;
    const double bound = L0 + L1 * obj.gradient(w).norm();
    rep.worst_ratio = std::max(rep.worst_ratio, bound > 0.0 ? s / bound : (s > 0.0 ? kInf : 0.0));
    if (s > bound + tol) rep.violations.push_back({w, obj.value(w), s, bound, s - bound});
  }
  return rep;
}

}  // namespace wl
