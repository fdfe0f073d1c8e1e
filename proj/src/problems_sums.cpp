#include "warmup_lab/problems.hpp"

#include <fmt/format.h>

#include <cmath>

namespace wl {

// ---------------------------------------------------------------------------
// Interpolating least squares

InterpolatingLeastSquares::InterpolatingLeastSquares(Index n, Index d, std::uint64_t seed) : n_(n), d_(d) {
  require(n >= 1 && d > n, ErrorCode::precondition,
          fmt::format("interpolating least squares needs d > n >= 1 (got n = {}, d = {})", n, d));
  Rng rng(seed);
  X_ = rng.normal_mat(d, n);
  w_dagger_ = rng.normal_vec(d);
  y_ = X_.transpose() * w_dagger_;
  gram_.compute(X_.transpose() * X_);
  require(gram_.info() == Eigen::Success && gram_.isPositive(), ErrorCode::construction,
          "sample Gram matrix is singular");
}

double InterpolatingLeastSquares::value(const Vec& w) const {
  return 0.5 * (X_.transpose() * w - y_).squaredNorm() / double(n_);
}

Vec InterpolatingLeastSquares::gradient(const Vec& w) const {
  return X_ * (X_.transpose() * w - y_) / double(n_);
}

double InterpolatingLeastSquares::component_value(Index i, const Vec& w) const {
  require(i >= 0 && i < n_, ErrorCode::input, "component index out of range");
  const double r = X_.col(i).dot(w) - y_[i];
  return 0.5 * r * r;
}

Vec InterpolatingLeastSquares::component_gradient(Index i, const Vec& w) const {
  require(i >= 0 && i < n_, ErrorCode::input, "component index out of range");
  return (X_.col(i).dot(w) - y_[i]) * X_.col(i);
}

Vec InterpolatingLeastSquares::project_solution(const Vec& w) const {
  const Vec r = X_.transpose() * w - y_;
  return w - X_ * gram_.solve(r);
}

std::optional<SmoothnessCertificate> InterpolatingLeastSquares::certificate() const {
  SmoothnessCertificate c;
  Eigen::SelfAdjointEigenSolver<Mat> es(X_ * X_.transpose() / double(n_), Eigen::EigenvaluesOnly);
  c.H0 = es.eigenvalues().maxCoeff();
  c.H1 = 0.0;
  c.f_star = 0.0;
  c.region = "all of R^d";
  return c;
}

SmoothnessCertificate InterpolatingLeastSquares::component_certificate(Index i) const {
  require(i >= 0 && i < n_, ErrorCode::input, "component index out of range");
  SmoothnessCertificate c;
  c.H0 = X_.col(i).squaredNorm();
  c.H1 = 0.0;
  c.f_star = 0.0;
  c.region = "all of R^d";
  return c;
}

SmoothnessCertificate InterpolatingLeastSquares::uniform_component_certificate() const {
  SmoothnessCertificate c;
  c.H0 = X_.colwise().squaredNorm().maxCoeff();
  c.H1 = 0.0;
  c.f_star = 0.0;
  c.region = "all of R^d";
  return c;
}

std::shared_ptr<InterpolatingLeastSquares> make_interpolating_least_squares(Index n, Index d, std::uint64_t seed) {
  return std::make_shared<InterpolatingLeastSquares>(n, d, seed);
}

// ---------------------------------------------------------------------------
// Quadratic

Quadratic::Quadratic(Mat A, Vec center, double f_star) : A_(std::move(A)), c_(std::move(center)), f_star_(f_star) {
  require(A_.rows() == A_.cols() && A_.rows() == c_.size(), ErrorCode::construction,
          "quadratic needs a square matrix matching the centre");
  require((A_ - A_.transpose()).norm() <= 1e-12 * (1.0 + A_.norm()), ErrorCode::construction,
          "quadratic matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(A_, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  positive_semidefinite_ = lo >= -1e-12;
  positive_definite_ = lo > 1e-12;
  spectral_ = std::max(std::abs(lo), std::abs(hi));
}

double Quadratic::value(const Vec& w) const {
  const Vec r = w - c_;
  return 0.5 * r.dot(A_ * r) + f_star_;
}

Vec Quadratic::gradient(const Vec& w) const { return A_ * (w - c_); }

std::optional<double> Quadratic::f_star() const {
  if (!positive_semidefinite_) return std::nullopt;
  return f_star_;
}

Vec Quadratic::project_solution(const Vec&) const {
  require(positive_definite_, ErrorCode::capability, "solution set is not a single point");
  return c_;
}

std::optional<SmoothnessCertificate> Quadratic::certificate() const {
  SmoothnessCertificate c;
  c.H0 = spectral_;
  c.H1 = 0.0;
  c.f_star = positive_semidefinite_ ? f_star_ : 0.0;
  c.region = "all of R^d";
  return c;
}

std::shared_ptr<Quadratic> make_quadratic(const Mat& A, const Vec& center, double f_star) {
  return std::make_shared<Quadratic>(A, center, f_star);
}

// ---------------------------------------------------------------------------
// Compositions

SumObjective::SumObjective(ObjectivePtr f, ObjectivePtr g) : f_(std::move(f)), g_(std::move(g)) {
  require(f_ && g_, ErrorCode::construction, "sum needs two objectives");
  require(f_->dim() == g_->dim(), ErrorCode::construction,
          fmt::format("cannot add objectives of dimension {} and {}", f_->dim(), g_->dim()));
}

AffineComposition::AffineComposition(ObjectivePtr g, Mat A) : g_(std::move(g)), A_(std::move(A)) {
  require(g_ != nullptr, ErrorCode::construction, "affine composition needs an outer objective");
  require(A_.rows() == g_->dim(), ErrorCode::construction,
          fmt::format("A has {} rows but the outer objective has dimension {}", A_.rows(), g_->dim()));
}

}  // namespace wl
