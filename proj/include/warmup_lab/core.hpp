#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wl {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories shared by every module; the C API maps them 1:1 onto
// integer codes.
enum class ErrorCode {
  ok = 0,
  precondition,
  evaluation,
  capacity,
  construction,
  capability,
  inconsistency,
  input,
  sampler,
  out_of_horizon,
  fit,
  config,
  io,
  internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);
inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// ParamPoint: flat parameter vector plus the registry of named matrices that
// tile it. Matrices are stored column-major, so a view's flattening is vec(W).

struct Shape {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

class ParamPoint {
 public:
  ParamPoint() = default;
  explicit ParamPoint(std::vector<Shape> shapes);
  ParamPoint(Vec data, std::vector<Shape> shapes);
  static ParamPoint flat(Vec data);
  static ParamPoint from_matrices(const std::vector<Mat>& mats, const std::string& prefix = "W");

  Index size() const { return data_.size(); }
  const Vec& data() const { return data_; }
  Vec& data() { return data_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t n_blocks() const { return shapes_.size(); }

  Eigen::Map<Mat> view(std::size_t block);
  Eigen::Map<const Mat> view(std::size_t block) const;
  Eigen::Map<Mat> view(std::string_view name);
  Eigen::Map<const Mat> view(std::string_view name) const;
  std::vector<Mat> matrices() const;

 private:
  std::size_t block_index(std::string_view name) const;
  Vec data_;
  std::vector<Shape> shapes_;
  std::vector<Index> offsets_;
};

std::vector<Shape> chain_shapes(const std::vector<Index>& layer_dims);
// Copies of the layer matrices W_1..W_l encoded in flat vector w.
std::vector<Mat> unpack_layers(const Vec& w, const std::vector<Shape>& shapes);
Vec pack_layers(const std::vector<Mat>& mats);

// ---------------------------------------------------------------------------
// Certificate (H0, H1, f*, rho): ||hess f(w)|| <= H0 + H1 (f(w) - f_star)^rho on
// the described region. f_star is the reference level the gap is measured
// from; it must be a lower bound of the true minimum.

struct SmoothnessCertificate {
  double H0 = 0.0;
  double H1 = 0.0;
  double f_star = 0.0;
  double rho = 1.0;
  std::string region = "all of R^d";
  bool conservative = false;  // f* unknown, 0 used as reference level
  double bound(double f) const;
};

// ---------------------------------------------------------------------------
// Objective contract. Implementations are immutable after construction and
// safe to evaluate concurrently.

class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual double value(const Vec& w) const = 0;
  virtual Vec gradient(const Vec& w) const = 0;

  virtual std::optional<double> f_star() const { return std::nullopt; }
  virtual std::vector<Shape> shapes() const { return {{"w", dim(), 1}}; }

  // Finite-sum structure f = (1/n) sum_i f_i. n_components() == 0 means absent.
  virtual Index n_components() const { return 0; }
  virtual double component_value(Index i, const Vec& w) const;
  virtual Vec component_gradient(Index i, const Vec& w) const;
  virtual double batch_value(std::span<const Index> batch, const Vec& w) const;
  virtual Vec batch_gradient(std::span<const Index> batch, const Vec& w) const;
  // Common minimum of the components under interpolation.
  virtual std::optional<double> component_f_star() const { return std::nullopt; }

  virtual bool has_projector() const { return false; }
  virtual Vec project_solution(const Vec& w) const;

  virtual std::optional<SmoothnessCertificate> certificate() const { return std::nullopt; }
  virtual std::optional<Mat> analytic_hessian(const Vec&) const { return std::nullopt; }
  // Smallest |pre-activation| of a piecewise-linear network; +inf when smooth.
  virtual double kink_distance(const Vec&) const { return kInf; }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

struct EvalRecord {
  std::uint64_t iter = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double step_size = 0.0;
  std::optional<double> dist_to_solution;
};

// ---------------------------------------------------------------------------
// Finite-difference oracles.

double default_fd_step(const Vec& w);
Vec finite_diff_gradient(const Objective& obj, const Vec& w, double h);
Vec finite_diff_hvp(const Objective& obj, const Vec& w, const Vec& v, double h);
Mat dense_hessian_fd(const Objective& obj, const Vec& w, double h, Index cap = 200);

double relative_error(const Vec& a, const Vec& b);

}  // namespace wl
