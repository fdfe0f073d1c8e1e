#include "warmup_lab/problems.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wl {

namespace {

double sgn(double w) { return w < 0.0 ? -1.0 : 1.0; }

}  // namespace

// ---------------------------------------------------------------------------
// ExpQuadratic: H1 w^2 / 2 + 1/2 inside |w| <= 1/sqrt(H1), exp(sqrt(H1)|w| - 1) outside.

ExpQuadratic::ExpQuadratic(double H1, double M) : H1_(H1), M_(M) {
  require(H1 > 0.0, ErrorCode::precondition, "ExpQuadratic needs H1 > 0");
  require(M > 1.0, ErrorCode::precondition, "ExpQuadratic needs M > 1");
}

double ExpQuadratic::f(double w) const {
  const double s = std::sqrt(H1_);
  const double a = std::abs(w);
  if (a * s <= 1.0) return 0.5 * H1_ * w * w + 0.5;
  return std::exp(s * a - 1.0);
}

double ExpQuadratic::df(double w) const {
  const double s = std::sqrt(H1_);
  const double a = std::abs(w);
  if (a * s <= 1.0) return H1_ * w;
  return sgn(w) * s * std::exp(s * a - 1.0);
}

double ExpQuadratic::d2f(double w) const {
  const double s = std::sqrt(H1_);
  const double a = std::abs(w);
  if (a * s <= 1.0) return H1_;
  return H1_ * std::exp(s * a - 1.0);
}

std::optional<SmoothnessCertificate> ExpQuadratic::certificate() const {
  // The pair (H1/2, H1) bounds f'' by H0 + H1 * f, i.e. measured from level 0
  // rather than from the minimum value 1/2 (at w = 0, f'' = H1 > H1/2).
  SmoothnessCertificate c;
  c.H0 = H1_ / 2.0;
  c.H1 = H1_;
  c.f_star = 0.0;
  c.region = "all of R";
  return c;
}

double ExpQuadratic::recommended_w0() const { return (std::log(M_) + 1.0) / std::sqrt(H1_); }

std::shared_ptr<ExpQuadratic> make_exp_quadratic(double H1, double M) {
  return std::make_shared<ExpQuadratic>(H1, M);
}

// ---------------------------------------------------------------------------
// Runway: quadratic bowl, flat linear runway of slope m, exponential wall.

Runway::Runway(double H0, double H1, double delta) : H0_(H0), H1_(H1), delta_(delta) {
  require(H0 > 0.0 && H1 > 0.0, ErrorCode::precondition, "runway needs H0, H1 > 0");
  require(delta > 0.0 && delta < 1.0, ErrorCode::precondition, "runway needs 0 < delta < 1");
  m_ = std::sqrt(2.0 * H0 * delta);
  X1_ = std::sqrt(2.0 * delta / H0);
  X2_ = X1_ + (1.0 - delta) / m_;
  A_ = m_ / std::sqrt(H1);
  B_ = 1.0 - A_;
}

double Runway::f(double w) const {
  const double a = std::abs(w);
  if (a <= X1_) return 0.5 * H0_ * a * a;
  if (a <= X2_) return m_ * (a - X1_) + delta_;
  return A_ * std::exp(std::sqrt(H1_) * (a - X2_)) + B_;
}

double Runway::df(double w) const {
  const double a = std::abs(w);
  if (a <= X1_) return H0_ * w;
  if (a <= X2_) return sgn(w) * m_;
  return sgn(w) * A_ * std::sqrt(H1_) * std::exp(std::sqrt(H1_) * (a - X2_));
}

double Runway::d2f(double w) const {
  const double a = std::abs(w);
  if (a <= X1_) return H0_;
  if (a <= X2_) return 0.0;
  return H1_ * A_ * std::exp(std::sqrt(H1_) * (a - X2_));
}

std::optional<SmoothnessCertificate> Runway::certificate() const {
  // On the wall f'' = H1 (f - B), so a negative offset B is absorbed into H0.
  SmoothnessCertificate c;
  c.H0 = std::max(H0_, H1_ * std::max(0.0, -B_));
  c.H1 = H1_;
  c.f_star = 0.0;
  c.region = "all of R";
  return c;
}

std::shared_ptr<Runway> make_runway(double H0, double H1, double delta) {
  return std::make_shared<Runway>(H0, H1, delta);
}

// ---------------------------------------------------------------------------
// PlLowerBound: mu-quadratic core glued C^1 to exponential tails at w_c.

PlLowerBound::PlLowerBound(double C0, double mu, double H1) : C0_(C0), mu_(mu), H1_(H1) {
  require(C0 > 0.0, ErrorCode::precondition, "PL construction needs C0 > 0");
  require(mu > 0.0 && mu <= 1.0, ErrorCode::precondition, "PL construction needs 0 < mu <= 1");
  require(H1 > 0.0, ErrorCode::precondition, "PL construction needs H1 > 0");
  wc_ = std::sqrt(2.0 * C0 / mu);
  A_ = std::sqrt(2.0 * C0 * mu / H1);
  B_ = C0 - A_;
}

double PlLowerBound::f(double w) const {
  const double a = std::abs(w);
  if (a <= wc_) return 0.5 * mu_ * a * a;
  return A_ * std::exp(std::sqrt(H1_) * (a - wc_)) + B_;
}

double PlLowerBound::df(double w) const {
  const double a = std::abs(w);
  if (a <= wc_) return mu_ * w;
  return sgn(w) * A_ * std::sqrt(H1_) * std::exp(std::sqrt(H1_) * (a - wc_));
}

double PlLowerBound::d2f(double w) const {
  const double a = std::abs(w);
  if (a <= wc_) return mu_;
  return H1_ * A_ * std::exp(std::sqrt(H1_) * (a - wc_));
}

std::optional<SmoothnessCertificate> PlLowerBound::certificate() const {
  SmoothnessCertificate c;
  c.H0 = std::max(mu_, H1_ * std::max(0.0, -B_));
  c.H1 = H1_;
  c.f_star = 0.0;
  c.region = fmt::format("all of R (PL with mu = {})", mu_);
  return c;
}

std::shared_ptr<PlLowerBound> make_pl_lower_bound(double C0, double mu, double H1) {
  return std::make_shared<PlLowerBound>(C0, mu, H1);
}

// ---------------------------------------------------------------------------
// PlSinQuadratic: w^2 + 3 sin^2 w.

PlSinQuadratic::PlSinQuadratic() { mu_ = pl_constant_on_grid(*this, -10.0, 10.0, 200001); }

double PlSinQuadratic::f(double w) const {
  const double s = std::sin(w);
  return w * w + 3.0 * s * s;
}

double PlSinQuadratic::df(double w) const { return 2.0 * w + 3.0 * std::sin(2.0 * w); }

double PlSinQuadratic::d2f(double w) const { return 2.0 + 6.0 * std::cos(2.0 * w); }

std::optional<SmoothnessCertificate> PlSinQuadratic::certificate() const {
  SmoothnessCertificate c;
  c.H0 = 8.0;
  c.H1 = 0.0;
  c.f_star = 0.0;
  c.region = "all of R";
  return c;
}

std::shared_ptr<PlSinQuadratic> make_pl_sin_quadratic() { return std::make_shared<PlSinQuadratic>(); }

double pl_constant_on_grid(const ScalarObjective& obj, double lo, double hi, Index points) {
  require(points >= 2 && hi > lo, ErrorCode::precondition, "PL grid needs lo < hi and at least two points");
  const double fs = obj.f_star().value_or(0.0);
  double best = kInf;
  for (Index i = 0; i < points; ++i) {
    const double w = lo + (hi - lo) * double(i) / double(points - 1);
    const double gap = obj.f(w) - fs;
    if (gap <= 1e-14) continue;  // minimiser (and its rounding neighbourhood)
    const double g = obj.df(w);
    best = std::min(best, g * g / (2.0 * gap));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

double simpson_step(const std::function<double(double)>& fn, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = fn(lm), frm = fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(fn, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_step(fn, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double tol) {
  require(tol > 0.0, ErrorCode::precondition, "quadrature tolerance must be positive");
  if (a == b) return 0.0;
  // Split into unit-length panels first so oscillatory integrands are resolved.
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) * 4.0)));
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels;
    const double hi = a + (b - a) * (p + 1) / panels;
    const double flo = fn(lo), fhi = fn(hi), fmid = fn(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_step(fn, lo, hi, flo, fmid, fhi, whole, tol / panels, 40);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Counterexamples

namespace {

double sin_square(double u) { return std::sin(u * u); }

// f(w) = int_0^w 2 sin(u^2) du; f' = 2 sin(w^2), f'' = 4 w cos(w^2).
class SumSinSquare final : public Counterexample {
 public:
  std::string name() const override { return "sum_sin_square"; }
  CounterexampleKind kind() const override { return CounterexampleKind::sum_sin_square; }
  Index dim() const override { return 1; }
  double value(const Vec& w) const override { return 2.0 * adaptive_simpson(sin_square, 0.0, w[0], 1e-12); }
  Vec gradient(const Vec& w) const override { return Vec::Constant(1, 2.0 * std::sin(w[0] * w[0])); }
  std::optional<Mat> analytic_hessian(const Vec& w) const override {
    return Mat::Constant(1, 1, 4.0 * w[0] * std::cos(w[0] * w[0]));
  }
  Vec witness(int m) const override {
    require(m >= 1, ErrorCode::precondition, "witness index starts at 1");
    return Vec::Constant(1, std::sqrt(m * std::numbers::pi));
  }
};

class SumSinSquarePart final : public ScalarObjective {
 public:
  explicit SumSinSquarePart(int sign) : sign_(sign >= 0 ? 1.0 : -1.0) {}
  std::string name() const override { return sign_ > 0 ? "sum_sin_square_part+" : "sum_sin_square_part-"; }
  double f(double w) const override { return 0.5 * sign_ * w * w + adaptive_simpson(sin_square, 0.0, w, 1e-12); }
  double df(double w) const override { return sign_ * w + std::sin(w * w); }
  double d2f(double w) const override { return sign_ + 2.0 * w * std::cos(w * w); }

 private:
  double sign_;
};

// Restriction of g(y) = cos(y1) e^{y1} e^{y2} to y = (w, 0).
class AffineCosExp final : public Counterexample {
 public:
  std::string name() const override { return "affine_cos_exp"; }
  CounterexampleKind kind() const override { return CounterexampleKind::affine_cos_exp; }
  Index dim() const override { return 1; }
  double value(const Vec& w) const override { return std::cos(w[0]) * std::exp(w[0]); }
  Vec gradient(const Vec& w) const override {
    return Vec::Constant(1, std::exp(w[0]) * (std::cos(w[0]) - std::sin(w[0])));
  }
  std::optional<Mat> analytic_hessian(const Vec& w) const override {
    return Mat::Constant(1, 1, -2.0 * std::sin(w[0]) * std::exp(w[0]));
  }
  Vec witness(int m) const override {
    require(m >= 1, ErrorCode::precondition, "witness index starts at 1");
    return Vec::Constant(1, std::numbers::pi / 4.0 + 2.0 * std::numbers::pi * m);
  }
};

class CosExpOuter final : public Objective {
 public:
  std::string name() const override { return "cos_exp_outer"; }
  Index dim() const override { return 2; }
  double value(const Vec& y) const override { return std::cos(y[0]) * std::exp(y[0] + y[1]); }
  Vec gradient(const Vec& y) const override {
    const double e = std::exp(y[0] + y[1]);
    Vec g(2);
    g << e * (std::cos(y[0]) - std::sin(y[0])), e * std::cos(y[0]);
    return g;
  }
  std::optional<Mat> analytic_hessian(const Vec& y) const override {
    const double e = std::exp(y[0] + y[1]);
    const double c = std::cos(y[0]), s = std::sin(y[0]);
    Mat H(2, 2);
    H << -2.0 * s * e, (c - s) * e, (c - s) * e, c * e;
    return H;
  }
};

// f(u, v) = (u tanh v)^2 / 2 + lambda1 u^2 / 2 + lambda2 v^2 / 2.
class TwoLayerL2Counter final : public Counterexample {
 public:
  TwoLayerL2Counter(double lambda1, double lambda2) : l1_(lambda1), l2_(lambda2) {}
  std::string name() const override { return "two_layer_l2"; }
  CounterexampleKind kind() const override { return CounterexampleKind::two_layer_l2; }
  Index dim() const override { return 2; }
  std::vector<Shape> shapes() const override { return {{"W1", 1, 1}, {"W2", 1, 1}}; }
  double value(const Vec& w) const override {
    const double t = std::tanh(w[1]);
    return 0.5 * w[0] * w[0] * t * t + 0.5 * l1_ * w[0] * w[0] + 0.5 * l2_ * w[1] * w[1];
  }
  Vec gradient(const Vec& w) const override {
    const double u = w[0], t = std::tanh(w[1]), dt = 1.0 - t * t;
    Vec g(2);
    g << u * t * t + l1_ * u, u * u * t * dt + l2_ * w[1];
    return g;
  }
  std::optional<Mat> analytic_hessian(const Vec& w) const override {
    const double u = w[0], t = std::tanh(w[1]), dt = 1.0 - t * t, d2t = -2.0 * t * dt;
    Mat H(2, 2);
    H << t * t + l1_, 2.0 * u * t * dt, 2.0 * u * t * dt, u * u * (dt * dt + t * d2t) + l2_;
    return H;
  }
  Vec witness(int m) const override {
    require(m >= 1, ErrorCode::precondition, "witness index starts at 1");
    Vec w(2);
    w << double(m), 0.0;
    return w;
  }

 private:
  double l1_, l2_;
};

// Weakly balanced two-layer leaky network on X = I3, Y = diag(1, 2, 3).
class BalancedTwoLayer final : public Counterexample {
 public:
  BalancedTwoLayer() {
    Mat X = Mat::Identity(3, 3);
    Mat Y = Mat::Zero(3, 3);
    Y.diagonal() << 1.0, 2.0, 3.0;
    net_ = std::make_shared<LeakyChain>("balanced_two_layer", DatasetPair::make(X, Y), std::vector<Index>{3, 2, 3},
                                        std::vector<double>{kSlope}, std::nullopt, 2);
  }
  std::string name() const override { return "balanced_two_layer"; }
  CounterexampleKind kind() const override { return CounterexampleKind::balanced_two_layer; }
  Index dim() const override { return net_->dim(); }
  std::vector<Shape> shapes() const override { return net_->shapes(); }
  double value(const Vec& w) const override { return net_->value(w); }
  Vec gradient(const Vec& w) const override { return net_->gradient(w); }
  double kink_distance(const Vec& w) const override { return net_->kink_distance(w); }
  // W1(t) = [[t,0],[0,0],[0,0]], W2(t) = [[1/t,0,0],[sqrt(t^2 - 1/t^2),0,0]] with t = 1 + m;
  // ||W1||_F = ||W2||_F = t, so the family is weakly balanced.
  Vec witness(int m) const override {
    require(m >= 1, ErrorCode::precondition, "witness index starts at 1");
    const double t = 1.0 + m;
    Mat W1 = Mat::Zero(3, 2), W2 = Mat::Zero(2, 3);
    W1(0, 0) = t;
    W2(0, 0) = 1.0 / t;
    W2(1, 0) = std::sqrt(t * t - 1.0 / (t * t));
    return pack_layers({W1, W2});
  }

  static constexpr double kSlope = 0.5;

 private:
  std::shared_ptr<LeakyChain> net_;
};

}  // namespace

CounterexampleKind parse_counterexample_kind(const std::string& name) {
  if (name == "sum_sin_square") return CounterexampleKind::sum_sin_square;
  if (name == "affine_cos_exp") return CounterexampleKind::affine_cos_exp;
  if (name == "two_layer_l2") return CounterexampleKind::two_layer_l2;
  if (name == "balanced_two_layer") return CounterexampleKind::balanced_two_layer;
  fail(ErrorCode::input, fmt::format("unknown counterexample '{}'", name));
}

std::string counterexample_name(CounterexampleKind kind) {
  switch (kind) {
    case CounterexampleKind::sum_sin_square: return "sum_sin_square";
    case CounterexampleKind::affine_cos_exp: return "affine_cos_exp";
    case CounterexampleKind::two_layer_l2: return "two_layer_l2";
    case CounterexampleKind::balanced_two_layer: return "balanced_two_layer";
  }
  return "unknown";
}

std::shared_ptr<Counterexample> make_counterexample(CounterexampleKind kind) {
  switch (kind) {
    case CounterexampleKind::sum_sin_square: return std::make_shared<SumSinSquare>();
    case CounterexampleKind::affine_cos_exp: return std::make_shared<AffineCosExp>();
    case CounterexampleKind::two_layer_l2: return std::make_shared<TwoLayerL2Counter>(1e-3, 1e-3);
    case CounterexampleKind::balanced_two_layer: return std::make_shared<BalancedTwoLayer>();
  }
  fail(ErrorCode::input, "unknown counterexample kind");
}

std::shared_ptr<Counterexample> make_two_layer_l2_counterexample(double lambda1, double lambda2) {
  require(lambda1 > 0.0 && lambda2 > 0.0, ErrorCode::precondition, "regularisation weights must be positive");
  return std::make_shared<TwoLayerL2Counter>(lambda1, lambda2);
}

std::shared_ptr<ScalarObjective> make_sum_sin_square_part(int sign) {
  return std::make_shared<SumSinSquarePart>(sign);
}

std::shared_ptr<Objective> make_cos_exp_outer() { return std::make_shared<CosExpOuter>(); }

}  // namespace wl
