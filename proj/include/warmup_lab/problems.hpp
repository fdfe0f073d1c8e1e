#pragma once

#include "warmup_lab/core.hpp"
#include "warmup_lab/rng.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wl {

// ---------------------------------------------------------------------------
// Data and activations

struct DatasetPair {
  Mat X;  // d x m inputs
  Mat Y;  // c x m targets
  double lambda_min_xxt = 0.0;
  double x_spec = 0.0;  // ||X||_2
  double y_fro = 0.0;   // ||Y||_F

  static DatasetPair make(Mat X, Mat Y);
  Index d() const { return X.rows(); }
  Index m() const { return X.cols(); }
  Index c() const { return Y.rows(); }
};

// Gaussian inputs (d x m) with targets from a random teacher of the given
// kind ("linear" or "tanh", hidden width `teacher_hidden`).
DatasetPair random_dataset(Index d, Index m, Index c, std::uint64_t seed,
                           const std::string& teacher = "linear", Index teacher_hidden = 8);

struct ActivationSpec {
  enum class Kind { identity, leaky_relu, tanh };
  Kind kind = Kind::identity;
  double b = 1.0;  // leaky slope
  double C1 = 1.0, C2 = 1.0, C3 = 0.0;
  bool twice_differentiable = true;

  static ActivationSpec identity();
  static ActivationSpec leaky_relu(double b);
  static ActivationSpec tanh();

  double phi(double x) const;
  double dphi(double x) const;
  double d2phi(double x) const;
  std::string name() const;
};

// Largest |tanh''| over a dense grid; used to check the stored C3.
double tanh_second_derivative_sup_grid();

// ---------------------------------------------------------------------------
// Layered networks

enum class BalanceMode { strong, weak };

// W_i is n_{i-1} x n_i with n_0 = c (outputs) and n_l = d (inputs).
ParamPoint make_balanced_init(const std::vector<Index>& layer_dims, double scale, BalanceMode mode,
                              std::uint64_t seed);
// Strongly balanced point from an explicit singular-value profile.
ParamPoint balanced_from_profile(const std::vector<Index>& layer_dims, const Vec& singular_values,
                                 std::uint64_t seed);

struct NetDiagnostics {
  std::vector<double> lambda_min_wtw;  // lambda_min(W_i^T W_i), i = 1..l
  double weak_balance_residual = 0.0;   // max_i | ||W_i||_F - ||W_1||_F |
  double strong_balance_residual = 0.0; // max over checked pairs of ||W_i^T W_i - W_{i+1} W_{i+1}^T||_F
  double min_abs_preactivation = kInf;  // over leaky (b < 1) layers only
};

// f(W) = ||Y - W_1 phi_1(W_2 phi_2(... phi_{l-1}(W_l X)))||_F^2 with leaky-ReLU
// phi_i of slope b_i (b_i = 1 is the identity).
class LeakyChain final : public Objective {
 public:
  LeakyChain(std::string name, DatasetPair data, std::vector<Index> layer_dims, std::vector<double> slopes,
             std::optional<double> f_star, std::size_t strong_balance_from);

  std::string name() const override { return name_; }
  Index dim() const override { return dim_; }
  double value(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  std::optional<double> f_star() const override { return f_star_; }
  std::vector<Shape> shapes() const override { return shapes_; }
  double kink_distance(const Vec& w) const override;

  NetDiagnostics diagnostics(const Vec& w) const;
  const DatasetPair& data() const { return data_; }
  const std::vector<Index>& layer_dims() const { return dims_; }
  const std::vector<double>& slopes() const { return slopes_; }
  Index depth() const { return static_cast<Index>(shapes_.size()); }

 private:
  struct Forward {
    std::vector<Mat> W, Z, A;  // Z[i] feeds phi_i, A[i] = phi_i(Z[i]); 1-based, A[l] = X
    Mat F;
  };
  Forward forward(const Vec& w) const;

  std::string name_;
  DatasetPair data_;
  std::vector<Index> dims_;
  std::vector<double> slopes_;  // size l-1
  std::optional<double> f_star_;
  std::size_t strong_from_;     // strong balance checked for pairs (i, i+1), i >= strong_from_
  std::vector<Shape> shapes_;
  Index dim_ = 0;
};

std::shared_ptr<LeakyChain> make_deep_linear(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                             bool interpolating = false);
std::shared_ptr<LeakyChain> make_semi_linear(const DatasetPair& data, const std::vector<Index>& layer_dims, double b,
                                             bool interpolating = false);
std::shared_ptr<LeakyChain> make_deep_leaky(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                            const std::vector<double>& slopes, bool interpolating = false);

// Two-layer network W_1 (c x hidden), W_2 (hidden x d) with L2 regularisation.
// Components f_i = m * loss_i + L2 terms, so their mean is f.
class TwoLayerL2 final : public Objective {
 public:
  enum class Loss { mse, cross_entropy };
  TwoLayerL2(Loss loss, DatasetPair data, Index hidden, ActivationSpec act, double lambda1, double lambda2);

  std::string name() const override;
  Index dim() const override { return dim_; }
  double value(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  std::vector<Shape> shapes() const override { return shapes_; }
  Index n_components() const override { return data_.m(); }
  double component_value(Index i, const Vec& w) const override;
  Vec component_gradient(Index i, const Vec& w) const override;
  double batch_value(std::span<const Index> batch, const Vec& w) const override;
  Vec batch_gradient(std::span<const Index> batch, const Vec& w) const override;

  const DatasetPair& data() const { return data_; }
  const ActivationSpec& activation() const { return act_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  Index hidden() const { return hidden_; }

  static constexpr double kProbClamp = 1e-12;

 private:
  // Loss and gradient on a column subset, data term scaled by `weight`.
  double eval(const Mat& X, const Mat& Y, double weight, const Vec& w, Vec* grad) const;
  void select(std::span<const Index> batch, Mat& X, Mat& Y) const;

  Loss loss_;
  DatasetPair data_;
  Index hidden_;
  ActivationSpec act_;
  double lambda1_, lambda2_;
  std::vector<Shape> shapes_;
  Index dim_ = 0;
};

std::shared_ptr<TwoLayerL2> make_two_layer_mse_l2(const DatasetPair& data, Index hidden, const ActivationSpec& act,
                                                  double lambda1, double lambda2);
std::shared_ptr<TwoLayerL2> make_two_layer_ce_l2(const DatasetPair& data, Index hidden, const ActivationSpec& act,
                                                 double lambda1, double lambda2);

// ---------------------------------------------------------------------------
// One-dimensional constructions

class ScalarObjective : public Objective {
 public:
  Index dim() const override { return 1; }
  double value(const Vec& w) const override { return f(w[0]); }
  Vec gradient(const Vec& w) const override { return Vec::Constant(1, df(w[0])); }
  std::optional<Mat> analytic_hessian(const Vec& w) const override { return Mat::Constant(1, 1, d2f(w[0])); }

  virtual double f(double w) const = 0;
  virtual double df(double w) const = 0;
  virtual double d2f(double w) const = 0;
};

class ExpQuadratic final : public ScalarObjective {
 public:
  ExpQuadratic(double H1, double M);
  std::string name() const override { return "exp_quadratic"; }
  double f(double w) const override;
  double df(double w) const override;
  double d2f(double w) const override;
  std::optional<double> f_star() const override { return 0.5; }
  std::optional<SmoothnessCertificate> certificate() const override;
  bool has_projector() const override { return true; }
  Vec project_solution(const Vec&) const override { return Vec::Zero(1); }

  double H1() const { return H1_; }
  double M() const { return M_; }
  double branch_point() const { return 1.0 / std::sqrt(H1_); }
  double recommended_w0() const;

 private:
  double H1_, M_;
};

class Runway final : public ScalarObjective {
 public:
  Runway(double H0, double H1, double delta);
  std::string name() const override { return "runway"; }
  double f(double w) const override;
  double df(double w) const override;
  double d2f(double w) const override;
  std::optional<double> f_star() const override { return 0.0; }
  std::optional<SmoothnessCertificate> certificate() const override;
  bool has_projector() const override { return true; }
  Vec project_solution(const Vec&) const override { return Vec::Zero(1); }

  double X1() const { return X1_; }
  double X2() const { return X2_; }
  double slope() const { return m_; }
  double A() const { return A_; }
  double B() const { return B_; }

 private:
  double H0_, H1_, delta_, m_, X1_, X2_, A_, B_;
};

class PlLowerBound final : public ScalarObjective {
 public:
  PlLowerBound(double C0, double mu, double H1);
  std::string name() const override { return "pl_lower_bound"; }
  double f(double w) const override;
  double df(double w) const override;
  double d2f(double w) const override;
  std::optional<double> f_star() const override { return 0.0; }
  std::optional<SmoothnessCertificate> certificate() const override;
  bool has_projector() const override { return true; }
  Vec project_solution(const Vec&) const override { return Vec::Zero(1); }

  double mu() const { return mu_; }
  double w_c() const { return wc_; }
  double A() const { return A_; }
  double B() const { return B_; }

 private:
  double C0_, mu_, H1_, wc_, A_, B_;
};

class PlSinQuadratic final : public ScalarObjective {
 public:
  PlSinQuadratic();
  std::string name() const override { return "pl_sin_quadratic"; }
  double f(double w) const override;
  double df(double w) const override;
  double d2f(double w) const override;
  std::optional<double> f_star() const override { return 0.0; }
  std::optional<SmoothnessCertificate> certificate() const override;
  bool has_projector() const override { return true; }
  Vec project_solution(const Vec&) const override { return Vec::Zero(1); }
  double mu() const { return mu_; }

 private:
  double mu_;
};

std::shared_ptr<ExpQuadratic> make_exp_quadratic(double H1, double M);
std::shared_ptr<Runway> make_runway(double H0, double H1, double delta);
std::shared_ptr<PlLowerBound> make_pl_lower_bound(double C0, double mu, double H1);
std::shared_ptr<PlSinQuadratic> make_pl_sin_quadratic();

// min over the grid w in [lo, hi] (w != 0) of f'(w)^2 / (2 (f(w) - f*)).
double pl_constant_on_grid(const ScalarObjective& obj, double lo, double hi, Index points);

// ---------------------------------------------------------------------------
// Counterexamples to (L0, L1)-smoothness

enum class CounterexampleKind { sum_sin_square, affine_cos_exp, two_layer_l2, balanced_two_layer };

CounterexampleKind parse_counterexample_kind(const std::string& name);
std::string counterexample_name(CounterexampleKind kind);

class Counterexample : public Objective {
 public:
  virtual CounterexampleKind kind() const = 0;
  // Member m (m >= 1) of the witness family.
  virtual Vec witness(int m) const = 0;
};

std::shared_ptr<Counterexample> make_counterexample(CounterexampleKind kind);
// two_layer_l2 with explicit regularisation weights (the default uses 1e-3 for both).
std::shared_ptr<Counterexample> make_two_layer_l2_counterexample(double lambda1, double lambda2);

// f_{1,2}(w) = int_0^w (+-u + sin(u^2)) du, each (3,3)-(L0,L1)-smooth.
std::shared_ptr<ScalarObjective> make_sum_sin_square_part(int sign);
// Outer function g(y) = cos(y1) e^{y1} e^{y2} of the affine counterexample.
std::shared_ptr<Objective> make_cos_exp_outer();
// Adaptive Simpson quadrature to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double tol);

// ---------------------------------------------------------------------------
// Finite-sum and auxiliary objectives

class InterpolatingLeastSquares final : public Objective {
 public:
  InterpolatingLeastSquares(Index n, Index d, std::uint64_t seed);
  std::string name() const override { return "interpolating_least_squares"; }
  Index dim() const override { return d_; }
  double value(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  std::optional<double> f_star() const override { return 0.0; }
  Index n_components() const override { return n_; }
  double component_value(Index i, const Vec& w) const override;
  Vec component_gradient(Index i, const Vec& w) const override;
  std::optional<double> component_f_star() const override { return 0.0; }
  bool has_projector() const override { return true; }
  Vec project_solution(const Vec& w) const override;
  std::optional<SmoothnessCertificate> certificate() const override;
  std::optional<Mat> analytic_hessian(const Vec&) const override { return X_ * X_.transpose() / double(n_); }

  // (||x_i||^2, 0): the certificate of component i alone.
  SmoothnessCertificate component_certificate(Index i) const;
  // Common certificate valid for every component: (max_i ||x_i||^2, 0).
  SmoothnessCertificate uniform_component_certificate() const;
  const Mat& X() const { return X_; }
  const Vec& y() const { return y_; }
  const Vec& w_dagger() const { return w_dagger_; }

 private:
  Index n_, d_;
  Mat X_;  // d x n, column i is x_i
  Vec y_, w_dagger_;
  Eigen::LDLT<Mat> gram_;  // X^T X
};

std::shared_ptr<InterpolatingLeastSquares> make_interpolating_least_squares(Index n, Index d, std::uint64_t seed);

// f(w) = 0.5 (w - c)^T A (w - c) + f_star, A symmetric.
class Quadratic final : public Objective {
 public:
  Quadratic(Mat A, Vec center, double f_star);
  std::string name() const override { return "quadratic"; }
  Index dim() const override { return A_.rows(); }
  double value(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  std::optional<double> f_star() const override;
  bool has_projector() const override { return positive_definite_; }
  Vec project_solution(const Vec& w) const override;
  std::optional<SmoothnessCertificate> certificate() const override;
  std::optional<Mat> analytic_hessian(const Vec&) const override { return A_; }

 private:
  Mat A_;
  Vec c_;
  double f_star_;
  bool positive_semidefinite_, positive_definite_;
  double spectral_;
};

std::shared_ptr<Quadratic> make_quadratic(const Mat& A, const Vec& center, double f_star = 0.0);

class SumObjective final : public Objective {
 public:
  SumObjective(ObjectivePtr f, ObjectivePtr g);
  std::string name() const override { return f_->name() + "+" + g_->name(); }
  Index dim() const override { return f_->dim(); }
  double value(const Vec& w) const override { return f_->value(w) + g_->value(w); }
  Vec gradient(const Vec& w) const override { return f_->gradient(w) + g_->gradient(w); }

 private:
  ObjectivePtr f_, g_;
};

// f(w) = g(A w).
class AffineComposition final : public Objective {
 public:
  AffineComposition(ObjectivePtr g, Mat A);
  std::string name() const override { return g_->name() + "(A w)"; }
  Index dim() const override { return A_.cols(); }
  double value(const Vec& w) const override { return g_->value(A_ * w); }
  Vec gradient(const Vec& w) const override { return A_.transpose() * g_->gradient(A_ * w); }

 private:
  ObjectivePtr g_;
  Mat A_;
};

class ScaledObjective final : public Objective {
 public:
  ScaledObjective(ObjectivePtr f, double c) : f_(std::move(f)), c_(c) {}
  std::string name() const override { return f_->name() + "*c"; }
  Index dim() const override { return f_->dim(); }
  double value(const Vec& w) const override { return c_ * f_->value(w); }
  Vec gradient(const Vec& w) const override { return c_ * f_->gradient(w); }

 private:
  ObjectivePtr f_;
  double c_;
};

double spectral_norm(const Mat& A);
double lambda_min_sym(const Mat& S);

}  // namespace wl
