#include "warmup_lab/problems.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wl {

// ---------------------------------------------------------------------------
// Linear-algebra helpers

double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

double lambda_min_sym(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// ---------------------------------------------------------------------------
// Data

DatasetPair DatasetPair::make(Mat X, Mat Y) {
  require(X.cols() == Y.cols(), ErrorCode::construction,
          fmt::format("X has {} samples but Y has {}", X.cols(), Y.cols()));
  DatasetPair p;
  p.X = std::move(X);
  p.Y = std::move(Y);
  p.lambda_min_xxt = std::max(0.0, lambda_min_sym(p.X * p.X.transpose()));
  p.x_spec = spectral_norm(p.X);
  p.y_fro = p.Y.norm();
  return p;
}

DatasetPair random_dataset(Index d, Index m, Index c, std::uint64_t seed, const std::string& teacher,
                           Index teacher_hidden) {
  require(d > 0 && m > 0 && c > 0, ErrorCode::construction, "dataset dimensions must be positive");
  Rng rng(seed);
  Mat X = rng.normal_mat(d, m);
  Mat Y;
  if (teacher == "linear") {
    Y = rng.normal_mat(c, d) / std::sqrt(double(d)) * X;
  } else if (teacher == "tanh") {
    const Mat T1 = rng.normal_mat(c, teacher_hidden);
    const Mat T2 = rng.normal_mat(teacher_hidden, d) / 2.0;
    Y = T1 * (T2 * X).array().tanh().matrix();
  } else {
    fail(ErrorCode::construction, fmt::format("unknown teacher '{}' (expected linear or tanh)", teacher));
  }
  return DatasetPair::make(std::move(X), std::move(Y));
}

// ---------------------------------------------------------------------------
// Activations

ActivationSpec ActivationSpec::identity() {
  ActivationSpec a;
  a.kind = Kind::identity;
  a.C1 = 1.0;
  a.C2 = 1.0;
  a.C3 = 0.0;
  return a;
}

ActivationSpec ActivationSpec::leaky_relu(double b) {
  require(b > 0.0 && b <= 1.0, ErrorCode::precondition, "leaky-ReLU slope must lie in (0, 1]");
  ActivationSpec a;
  a.kind = Kind::leaky_relu;
  a.b = b;
  a.C1 = 1.0;
  a.C2 = 1.0;
  a.C3 = std::numeric_limits<double>::quiet_NaN();  // not twice differentiable at 0
  a.twice_differentiable = false;
  return a;
}

ActivationSpec ActivationSpec::tanh() {
  ActivationSpec a;
  a.kind = Kind::tanh;
  a.C1 = 1.0;
  a.C2 = 1.0;
  // Rounded up from 4/(3 sqrt 3) = 0.76980...; certificates need a safe bound.
  a.C3 = 0.7699;
  require(a.C3 >= tanh_second_derivative_sup_grid(), ErrorCode::internal, "tanh C3 below grid supremum");
  return a;
}

double ActivationSpec::phi(double x) const {
  switch (kind) {
    case Kind::identity: return x;
    case Kind::leaky_relu: return x >= 0.0 ? x : b * x;
    case Kind::tanh: return std::tanh(x);
  }
  return x;
}

double ActivationSpec::dphi(double x) const {
  switch (kind) {
    case Kind::identity: return 1.0;
    case Kind::leaky_relu: return x > 0.0 ? 1.0 : b;  // slope-b branch at 0
    case Kind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

double ActivationSpec::d2phi(double x) const {
  switch (kind) {
    case Kind::identity: return 0.0;
    case Kind::leaky_relu: return 0.0;
    case Kind::tanh: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
  }
  return 0.0;
}

std::string ActivationSpec::name() const {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::leaky_relu: return fmt::format("leaky_relu({})", b);
    case Kind::tanh: return "tanh";
  }
  return "unknown";
}

double tanh_second_derivative_sup_grid() {
  double best = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double x = -5.0 + 10.0 * i / 200000.0;
    const double t = std::tanh(x);
    best = std::max(best, std::abs(2.0 * t * (1.0 - t * t)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Balanced initialisation

ParamPoint balanced_from_profile(const std::vector<Index>& layer_dims, const Vec& singular_values,
                                 std::uint64_t seed) {
  const auto shapes = chain_shapes(layer_dims);
  const Index r = *std::min_element(layer_dims.begin(), layer_dims.end());
  require(singular_values.size() >= 1 && singular_values.size() <= r, ErrorCode::construction,
          fmt::format("strong balance shares one singular profile across layers, so its length must be "
                      "between 1 and min(layer_dims) = {} (got {})",
                      r, singular_values.size()));
  Rng rng(seed);
  const Index k = singular_values.size();
  std::vector<Mat> U;
  for (Index n : layer_dims) U.push_back(random_orthonormal(rng, n, k));
  std::vector<Mat> W;
  for (std::size_t i = 1; i < layer_dims.size(); ++i)
    W.push_back(U[i - 1] * singular_values.asDiagonal() * U[i].transpose());
  return ParamPoint(pack_layers(W), shapes);
}

ParamPoint make_balanced_init(const std::vector<Index>& layer_dims, double scale, BalanceMode mode,
                              std::uint64_t seed) {
  require(scale > 0.0, ErrorCode::precondition, "scale must be positive");
  const auto shapes = chain_shapes(layer_dims);
  if (mode == BalanceMode::strong) {
    const Index r = *std::min_element(layer_dims.begin(), layer_dims.end());
    Rng rng(mix_seed(seed, 1));
    Vec s(r);
    for (Index j = 0; j < r; ++j) s[j] = rng.uniform(0.2, 1.0);
    s *= scale / s.norm();
    return balanced_from_profile(layer_dims, s, seed);
  }
  Rng rng(seed);
  std::vector<Mat> W;
  for (const auto& sh : shapes) {
    Mat m = rng.normal_mat(sh.rows, sh.cols);
    W.push_back(m * (scale / m.norm()));
  }
  return ParamPoint(pack_layers(W), shapes);
}

// ---------------------------------------------------------------------------
// LeakyChain

LeakyChain::LeakyChain(std::string name, DatasetPair data, std::vector<Index> layer_dims, std::vector<double> slopes,
                       std::optional<double> f_star, std::size_t strong_balance_from)
    : name_(std::move(name)),
      data_(std::move(data)),
      dims_(std::move(layer_dims)),
      slopes_(std::move(slopes)),
      f_star_(f_star),
      strong_from_(strong_balance_from) {
  shapes_ = chain_shapes(dims_);
  require(dims_.front() == data_.c(), ErrorCode::construction,
          fmt::format("first layer dimension {} must equal the number of outputs c = {}", dims_.front(), data_.c()));
  require(dims_.back() == data_.d(), ErrorCode::construction,
          fmt::format("last layer dimension {} must equal the input dimension d = {}", dims_.back(), data_.d()));
  require(slopes_.size() + 1 == shapes_.size(), ErrorCode::construction, "need one slope per hidden activation");
  for (double b : slopes_) require(b > 0.0 && b <= 1.0, ErrorCode::precondition, "leaky slopes must lie in (0, 1]");
  for (const auto& s : shapes_) dim_ += s.size();
}

LeakyChain::Forward LeakyChain::forward(const Vec& w) const {
  const std::size_t l = shapes_.size();
  Forward fw;
  fw.W.resize(l + 1);
  fw.Z.resize(l + 1);
  fw.A.resize(l + 1);
  auto mats = unpack_layers(w, shapes_);
  for (std::size_t i = 1; i <= l; ++i) fw.W[i] = std::move(mats[i - 1]);
  fw.A[l] = data_.X;
  for (std::size_t i = l; i >= 2; --i) {
    fw.Z[i] = fw.W[i] * fw.A[i];
    const double b = slopes_[i - 2];
    fw.A[i - 1] = b == 1.0 ? fw.Z[i] : fw.Z[i].unaryExpr([b](double x) { return x >= 0.0 ? x : b * x; }).eval();
  }
  fw.F = fw.W[1] * fw.A[1];
  return fw;
}

double LeakyChain::value(const Vec& w) const {
  const Forward fw = forward(w);
  return (data_.Y - fw.F).squaredNorm();
}

Vec LeakyChain::gradient(const Vec& w) const {
  const std::size_t l = shapes_.size();
  const Forward fw = forward(w);
  std::vector<Mat> grads(l);
  Mat delta = -2.0 * (data_.Y - fw.F);
  grads[0] = delta * fw.A[1].transpose();
  for (std::size_t i = 1; i < l; ++i) {
    Mat back = fw.W[i].transpose() * delta;
    const double b = slopes_[i - 1];
    if (b != 1.0) {
      const Mat& Z = fw.Z[i + 1];
      back = back.binaryExpr(Z, [b](double g, double z) { return z > 0.0 ? g : b * g; });
    }
    delta = std::move(back);
    grads[i] = delta * fw.A[i + 1].transpose();
  }
  return pack_layers(grads);
}

double LeakyChain::kink_distance(const Vec& w) const {
  const std::size_t l = shapes_.size();
  const Forward fw = forward(w);
  double best = kInf;
  for (std::size_t i = 2; i <= l; ++i)
    if (slopes_[i - 2] != 1.0) best = std::min(best, fw.Z[i].cwiseAbs().minCoeff());
  return best;
}

NetDiagnostics LeakyChain::diagnostics(const Vec& w) const {
  const auto W = unpack_layers(w, shapes_);
  NetDiagnostics d;
  const double n1 = W[0].norm();
  for (std::size_t i = 0; i < W.size(); ++i) {
    d.lambda_min_wtw.push_back(lambda_min_sym(W[i].transpose() * W[i]));
    d.weak_balance_residual = std::max(d.weak_balance_residual, std::abs(W[i].norm() - n1));
  }
  // Pairs (i, i+1) in 1-based layer numbering, starting at strong_from_.
  for (std::size_t i = std::max<std::size_t>(strong_from_, 1); i < W.size(); ++i) {
    const Mat diff = W[i - 1].transpose() * W[i - 1] - W[i] * W[i].transpose();
    d.strong_balance_residual = std::max(d.strong_balance_residual, diff.norm());
  }
  d.min_abs_preactivation = kink_distance(w);
  return d;
}

std::shared_ptr<LeakyChain> make_deep_linear(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                             bool interpolating) {
  require(layer_dims.size() >= 2, ErrorCode::construction, "deep linear network needs at least one layer");
  std::vector<double> slopes(layer_dims.size() - 2, 1.0);
  return std::make_shared<LeakyChain>("deep_linear", data, layer_dims, slopes,
                                      interpolating ? std::optional<double>(0.0) : std::nullopt, 1);
}

std::shared_ptr<LeakyChain> make_semi_linear(const DatasetPair& data, const std::vector<Index>& layer_dims, double b,
                                             bool interpolating) {
  require(layer_dims.size() >= 3, ErrorCode::construction, "semi-linear network needs at least two layers");
  require(b > 0.0 && b <= 1.0, ErrorCode::precondition, "leaky slope b must lie in (0, 1]");
  std::vector<double> slopes(layer_dims.size() - 2, 1.0);
  slopes[0] = b;
  return std::make_shared<LeakyChain>("semi_linear", data, layer_dims, slopes,
                                      interpolating ? std::optional<double>(0.0) : std::nullopt, 2);
}

std::shared_ptr<LeakyChain> make_deep_leaky(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                            const std::vector<double>& slopes, bool interpolating) {
  require(layer_dims.size() >= 3, ErrorCode::construction, "deep leaky network needs at least two layers");
  require(slopes.size() + 2 == layer_dims.size(), ErrorCode::construction,
          fmt::format("deep leaky network with {} layers needs {} slopes (got {})", layer_dims.size() - 1,
                      layer_dims.size() - 2, slopes.size()));
  return std::make_shared<LeakyChain>("deep_leaky", data, layer_dims, slopes,
                                      interpolating ? std::optional<double>(0.0) : std::nullopt,
                                      layer_dims.size());
}

// ---------------------------------------------------------------------------
// Two-layer networks with L2 regularisation

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

TwoLayerL2::TwoLayerL2(Loss loss, DatasetPair data, Index hidden, ActivationSpec act, double lambda1, double lambda2)
    : loss_(loss), data_(std::move(data)), hidden_(hidden), act_(act), lambda1_(lambda1), lambda2_(lambda2) {
  require(hidden > 0, ErrorCode::construction, "hidden width must be positive");
  require(lambda1 >= 0.0 && lambda2 >= 0.0, ErrorCode::precondition, "regularisation weights must be non-negative");
  require(act.twice_differentiable, ErrorCode::construction,
          fmt::format("activation {} is not twice differentiable (C3 undefined)", act.name()));
  if (loss_ == Loss::cross_entropy) {
    require(data_.c() == 1, ErrorCode::construction, "cross-entropy model expects a single output row");
    for (Index j = 0; j < data_.m(); ++j) {
      const double y = data_.Y(0, j);
      require(y == 0.0 || y == 1.0, ErrorCode::construction,
              fmt::format("label {} at sample {} is outside {{0,1}}", y, j));
    }
  }
  shapes_ = {{"W1", data_.c(), hidden_}, {"W2", hidden_, data_.d()}};
  dim_ = shapes_[0].size() + shapes_[1].size();
}

std::string TwoLayerL2::name() const {
  return loss_ == Loss::mse ? "two_layer_mse_l2" : "two_layer_ce_l2";
}

double TwoLayerL2::eval(const Mat& X, const Mat& Y, double weight, const Vec& w, Vec* grad) const {
  const Eigen::Map<const Mat> W1(w.data(), shapes_[0].rows, shapes_[0].cols);
  const Eigen::Map<const Mat> W2(w.data() + shapes_[0].size(), shapes_[1].rows, shapes_[1].cols);
  const Mat Z = W2 * X;
  const Mat A = Z.unaryExpr([this](double x) { return act_.phi(x); });
  const Mat out = W1 * A;
  double data_term = 0.0;
  Mat delta;  // d(data term)/d(out)
  if (loss_ == Loss::mse) {
    const Mat R = Y - out;
    data_term = weight * R.squaredNorm();
    if (grad) delta = -2.0 * weight * R;
  } else {
    Mat P = out.unaryExpr([](double z) { return sigmoid(z); });
    for (Index j = 0; j < P.cols(); ++j) {
      const double p = std::clamp(P(0, j), kProbClamp, 1.0 - kProbClamp);
      const double y = Y(0, j);
      data_term -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    data_term *= weight;
    if (grad) delta = weight * (P - Y);  // unclamped residual
  }
  const double value = data_term + 0.5 * lambda1_ * W1.squaredNorm() + 0.5 * lambda2_ * W2.squaredNorm();
  if (grad) {
    grad->resize(dim_);
    Eigen::Map<Mat> G1(grad->data(), shapes_[0].rows, shapes_[0].cols);
    Eigen::Map<Mat> G2(grad->data() + shapes_[0].size(), shapes_[1].rows, shapes_[1].cols);
    G1 = delta * A.transpose() + lambda1_ * W1;
    const Mat dZ = Z.unaryExpr([this](double x) { return act_.dphi(x); });
    G2 = (W1.transpose() * delta).cwiseProduct(dZ) * X.transpose() + lambda2_ * W2;
  }
  return value;
}

void TwoLayerL2::select(std::span<const Index> batch, Mat& X, Mat& Y) const {
  X.resize(data_.d(), static_cast<Index>(batch.size()));
  Y.resize(data_.c(), static_cast<Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    require(batch[k] >= 0 && batch[k] < data_.m(), ErrorCode::input, "component index out of range");
    X.col(static_cast<Index>(k)) = data_.X.col(batch[k]);
    Y.col(static_cast<Index>(k)) = data_.Y.col(batch[k]);
  }
}

double TwoLayerL2::value(const Vec& w) const { return eval(data_.X, data_.Y, 1.0, w, nullptr); }

Vec TwoLayerL2::gradient(const Vec& w) const {
  Vec g;
  eval(data_.X, data_.Y, 1.0, w, &g);
  return g;
}

double TwoLayerL2::component_value(Index i, const Vec& w) const {
  const Index b[1] = {i};
  return batch_value(b, w);
}

Vec TwoLayerL2::component_gradient(Index i, const Vec& w) const {
  const Index b[1] = {i};
  return batch_gradient(b, w);
}

double TwoLayerL2::batch_value(std::span<const Index> batch, const Vec& w) const {
  require(!batch.empty(), ErrorCode::input, "empty batch");
  Mat X, Y;
  select(batch, X, Y);
  return eval(X, Y, double(data_.m()) / double(batch.size()), w, nullptr);
}

Vec TwoLayerL2::batch_gradient(std::span<const Index> batch, const Vec& w) const {
  require(!batch.empty(), ErrorCode::input, "empty batch");
  Mat X, Y;
  select(batch, X, Y);
  Vec g;
  eval(X, Y, double(data_.m()) / double(batch.size()), w, &g);
  return g;
}

std::shared_ptr<TwoLayerL2> make_two_layer_mse_l2(const DatasetPair& data, Index hidden, const ActivationSpec& act,
                                                  double lambda1, double lambda2) {
  return std::make_shared<TwoLayerL2>(TwoLayerL2::Loss::mse, data, hidden, act, lambda1, lambda2);
}

std::shared_ptr<TwoLayerL2> make_two_layer_ce_l2(const DatasetPair& data, Index hidden, const ActivationSpec& act,
                                                 double lambda1, double lambda2) {
  return std::make_shared<TwoLayerL2>(TwoLayerL2::Loss::cross_entropy, data, hidden, act, lambda1, lambda2);
}

}  // namespace wl
