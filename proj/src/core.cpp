#include "warmup_lab/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::evaluation: return "evaluation";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::construction: return "construction";
    case ErrorCode::capability: return "capability";
    case ErrorCode::inconsistency: return "inconsistency";
    case ErrorCode::input: return "input";
    case ErrorCode::sampler: return "sampler";
    case ErrorCode::out_of_horizon: return "out_of_horizon";
    case ErrorCode::fit: return "fit";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

// ---------------------------------------------------------------------------
// ParamPoint

ParamPoint::ParamPoint(std::vector<Shape> shapes) : shapes_(std::move(shapes)) {
  Index total = 0;
  for (const auto& s : shapes_) {
    require(s.rows >= 0 && s.cols >= 0, ErrorCode::construction, "negative shape extent");
    offsets_.push_back(total);
    total += s.size();
  }
  data_ = Vec::Zero(total);
}

ParamPoint::ParamPoint(Vec data, std::vector<Shape> shapes) : ParamPoint(std::move(shapes)) {
  require(data.size() == data_.size(), ErrorCode::construction,
          fmt::format("shape registry covers {} entries but data has {}", data_.size(), data.size()));
  data_ = std::move(data);
}

ParamPoint ParamPoint::flat(Vec data) {
  const Index n = data.size();
  return ParamPoint(std::move(data), {{"w", n, 1}});
}

ParamPoint ParamPoint::from_matrices(const std::vector<Mat>& mats, const std::string& prefix) {
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < mats.size(); ++i)
    shapes.push_back({fmt::format("{}{}", prefix, i + 1), mats[i].rows(), mats[i].cols()});
  return ParamPoint(pack_layers(mats), std::move(shapes));
}

Eigen::Map<Mat> ParamPoint::view(std::size_t block) {
  require(block < shapes_.size(), ErrorCode::input, "block index out of range");
  const auto& s = shapes_[block];
  return Eigen::Map<Mat>(data_.data() + offsets_[block], s.rows, s.cols);
}

Eigen::Map<const Mat> ParamPoint::view(std::size_t block) const {
  require(block < shapes_.size(), ErrorCode::input, "block index out of range");
  const auto& s = shapes_[block];
  return Eigen::Map<const Mat>(data_.data() + offsets_[block], s.rows, s.cols);
}

std::size_t ParamPoint::block_index(std::string_view name) const {
  for (std::size_t i = 0; i < shapes_.size(); ++i)
    if (shapes_[i].name == name) return i;
  fail(ErrorCode::input, fmt::format("no block named '{}'", name));
}

Eigen::Map<Mat> ParamPoint::view(std::string_view name) { return view(block_index(name)); }
Eigen::Map<const Mat> ParamPoint::view(std::string_view name) const { return view(block_index(name)); }

std::vector<Mat> ParamPoint::matrices() const { return unpack_layers(data_, shapes_); }

std::vector<Shape> chain_shapes(const std::vector<Index>& layer_dims) {
  require(layer_dims.size() >= 2, ErrorCode::construction, "need at least two layer dimensions");
  std::vector<Shape> shapes;
  for (std::size_t i = 1; i < layer_dims.size(); ++i) {
    require(layer_dims[i - 1] > 0 && layer_dims[i] > 0, ErrorCode::construction,
            "layer dimensions must be positive");
    shapes.push_back({fmt::format("W{}", i), layer_dims[i - 1], layer_dims[i]});
  }
  return shapes;
}

std::vector<Mat> unpack_layers(const Vec& w, const std::vector<Shape>& shapes) {
  std::vector<Mat> out;
  out.reserve(shapes.size());
  Index off = 0;
  for (const auto& s : shapes) {
    out.emplace_back(Eigen::Map<const Mat>(w.data() + off, s.rows, s.cols));
    off += s.size();
  }
  require(off == w.size(), ErrorCode::input,
          fmt::format("parameter vector has {} entries, shapes need {}", w.size(), off));
  return out;
}

Vec pack_layers(const std::vector<Mat>& mats) {
  Index total = 0;
  for (const auto& m : mats) total += m.size();
  Vec w(total);
  Index off = 0;
  for (const auto& m : mats) {
    Eigen::Map<Mat>(w.data() + off, m.rows(), m.cols()) = m;
    off += m.size();
  }
  return w;
}

// ---------------------------------------------------------------------------
// Certificate

double SmoothnessCertificate::bound(double f) const {
  const double gap = std::max(0.0, f - f_star);
  return H0 + H1 * (rho == 1.0 ? gap : std::pow(gap, rho));
}

// ---------------------------------------------------------------------------
// Objective defaults

double Objective::component_value(Index, const Vec&) const {
  fail(ErrorCode::capability, fmt::format("objective '{}' has no finite-sum structure", name()));
}

Vec Objective::component_gradient(Index, const Vec&) const {
  fail(ErrorCode::capability, fmt::format("objective '{}' has no finite-sum structure", name()));
}

double Objective::batch_value(std::span<const Index> batch, const Vec& w) const {
  require(!batch.empty(), ErrorCode::input, "empty batch");
  double s = 0.0;
  for (Index i : batch) s += component_value(i, w);
  return s / static_cast<double>(batch.size());
}

Vec Objective::batch_gradient(std::span<const Index> batch, const Vec& w) const {
  require(!batch.empty(), ErrorCode::input, "empty batch");
  Vec g = Vec::Zero(dim());
  for (Index i : batch) g += component_gradient(i, w);
  return g / static_cast<double>(batch.size());
}

Vec Objective::project_solution(const Vec&) const {
  fail(ErrorCode::capability, fmt::format("objective '{}' has no solution-set projector", name()));
}

// ---------------------------------------------------------------------------
// Finite differences

double default_fd_step(const Vec& w) {
  const double scale = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
  return 1e-6 * std::max(1.0, scale);
}

Vec finite_diff_gradient(const Objective& obj, const Vec& w, double h) {
  require(h > 0, ErrorCode::precondition, "finite-difference step must be positive");
  Vec g(w.size());
  Vec x = w;
  for (Index i = 0; i < w.size(); ++i) {
    x[i] = w[i] + h;
    const double fp = obj.value(x);
    x[i] = w[i] - h;
    const double fm = obj.value(x);
    x[i] = w[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorCode::evaluation, fmt::format("non-finite value while differencing coordinate {}", i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec finite_diff_hvp(const Objective& obj, const Vec& w, const Vec& v, double h) {
  require(h > 0, ErrorCode::precondition, "finite-difference step must be positive");
  const double nv = v.norm();
  require(nv > 0, ErrorCode::precondition, "direction must be non-zero");
  const Vec u = v / nv;
  const Vec gp = obj.gradient(w + h * u);
  const Vec gm = obj.gradient(w - h * u);
  if (!gp.allFinite() || !gm.allFinite())
    fail(ErrorCode::evaluation, "non-finite gradient in Hessian-vector product");
  return (gp - gm) * (nv / (2.0 * h));
}

Mat dense_hessian_fd(const Objective& obj, const Vec& w, double h, Index cap) {
  require(h > 0, ErrorCode::precondition, "finite-difference step must be positive");
  const Index n = obj.dim();
  require(n <= cap, ErrorCode::capacity,
          fmt::format("dense Hessian requested for dim {} above cap {}", n, cap));
  Mat H(n, n);
  Vec x = w;
  for (Index i = 0; i < n; ++i) {
    x[i] = w[i] + h;
    const Vec gp = obj.gradient(x);
    x[i] = w[i] - h;
    const Vec gm = obj.gradient(x);
    x[i] = w[i];
    if (!gp.allFinite() || !gm.allFinite())
      fail(ErrorCode::evaluation, fmt::format("non-finite gradient while differencing coordinate {}", i));
    H.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

double relative_error(const Vec& a, const Vec& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / denom;
}

}  // namespace wl
