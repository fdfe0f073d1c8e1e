#include "warmup_lab/theory.hpp"

#include <fmt/format.h>

#include <cmath>

namespace wl {

namespace {

void check_chain(const DatasetPair& data, const std::vector<Index>& dims, std::size_t min_layers) {
  require(dims.size() >= min_layers + 1, ErrorCode::precondition,
          fmt::format("need at least {} layers", min_layers));
  require(dims.front() == data.c() && dims.back() == data.d(), ErrorCode::precondition,
          "layer dimensions must start at c and end at d");
  require(data.lambda_min_xxt > 0.0, ErrorCode::precondition,
          "lambda_min(X X^T) must be positive (X X^T is singular)");
}

// Turns an f-form bound H0 + H1 f into the gap form around f*.
SmoothnessCertificate gap_form(double H0, double H1, std::optional<double> f_star, std::string region) {
  SmoothnessCertificate c;
  c.conservative = !f_star.has_value();
  c.f_star = f_star.value_or(0.0);
  c.H0 = H0 + H1 * c.f_star;
  c.H1 = H1;
  c.region = std::move(region);
  return c;
}

}  // namespace

SmoothnessCertificate deep_linear_constants(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                            std::optional<double> f_star) {
  check_chain(data, layer_dims, 2);
  const double l = double(layer_dims.size() - 1);
  const double d = double(data.d());
  const double X = data.x_spec, Y = data.y_fro, inv_lam = 1.0 / data.lambda_min_xxt;
  const double a = 2.0 * std::pow(d, (l - 1.0) / 2.0);
  const double big = std::pow(a, (2.0 * l - 2.0) / l) * std::pow(inv_lam, (2.0 * l - 2.0) / (2.0 * l));
  const double small = std::pow(a, (l - 2.0) / l) * std::pow(inv_lam, (l - 2.0) / (2.0 * l));
  const double y_big = std::pow(Y, (2.0 * l - 2.0) / l);
  const double y_small = std::pow(Y, (l - 2.0) / l);

  const double bar_H0 = 4.0 * l * l * (big * y_big * X * X + small * y_small * X);
  const double H1 = 4.0 * l * l * (big * X * X + small * X + small * y_small * X);

  SmoothnessCertificate c;
  c.conservative = !f_star.has_value();
  c.f_star = f_star.value_or(0.0);
  c.H1 = H1;
  c.H0 = 2.0 * bar_H0 + H1 * (1.0 + c.f_star);
  c.region = "strongly balanced";
  return c;
}

SmoothnessCertificate semi_linear_constants(const DatasetPair& data, const std::vector<Index>& layer_dims, double b,
                                            double h, std::optional<double> f_star) {
  check_chain(data, layer_dims, 2);
  require(b > 0.0 && b <= 1.0, ErrorCode::precondition, "slope b must lie in (0, 1]");
  require(h > 0.0, ErrorCode::precondition, "lambda_min floor h must be positive");
  const double l = double(layer_dims.size() - 1);
  const double X = data.x_spec, Y = data.y_fro;
  const double Q = h * b * b * data.lambda_min_xxt;
  const double D = std::pow(double(data.d()), l - 2.0);
  const double e = (l - 2.0) / (2.0 * l - 2.0);
  const double shared = 2.0 * std::pow(4.0 * D * Y * Y / Q, e) * X + 2.0 * std::pow(4.0 * D / Q, e) * X;
  const double H0 = l * l * (16.0 * D * Y * Y / Q * X * X + shared);
  const double H1 = l * l * (16.0 * D / Q * X * X + shared);
  return gap_form(H0, H1, f_star,
                  fmt::format("weakly balanced; strongly balanced from layer 2; lambda_min(W1^T W1) >= {}", h));
}

SmoothnessCertificate deep_leaky_constants(const DatasetPair& data, const std::vector<Index>& layer_dims,
                                           const std::vector<double>& slopes, const std::vector<double>& h,
                                           std::optional<double> f_star) {
  check_chain(data, layer_dims, 2);
  const std::size_t L = layer_dims.size() - 1;
  require(slopes.size() + 1 == L, ErrorCode::precondition, fmt::format("need {} slopes", L - 1));
  require(h.size() + 1 == L, ErrorCode::precondition, fmt::format("need {} lambda_min floors", L - 1));
  double prod_sqrt = 1.0, prod_sq = 1.0;
  for (std::size_t i = 0; i + 1 < L; ++i) {
    require(slopes[i] > 0.0 && slopes[i] <= 1.0, ErrorCode::precondition, "slopes must lie in (0, 1]");
    require(h[i] > 0.0, ErrorCode::precondition, "lambda_min floors must be positive");
    prod_sqrt *= std::sqrt(h[i]) * slopes[i];
    prod_sq *= h[i] * slopes[i] * slopes[i];
  }
  const double l = double(L);
  const double X = data.x_spec, Y = data.y_fro, lam = data.lambda_min_xxt;
  const double R = 2.0 * Y / (std::sqrt(lam) * prod_sqrt);
  const double P = lam * prod_sq;
  const double t1 = 2.0 * l * (l - 1.0) * std::pow(R, l - 2.0) * X;
  const double t2 = 4.0 * l * l * std::pow(R, 2.0 * l - 2.0) * X * X;
  const double t3 = 2.0 * l * (l - 1.0) * std::pow(4.0, (l - 2.0) / 2.0) / std::pow(P, (l - 2.0) / 2.0) * X;
  const double t4 = 2.0 * l * l * std::pow(4.0, (2.0 * l - 2.0) / 2.0) / std::pow(P, (2.0 * l - 2.0) / 2.0) * X * X;
  const double H0 = t1 + t2 + t3 + t4;
  const double H1 = t1 + t3 + t4;

  SmoothnessCertificate c;
  c.rho = l - 1.0;
  c.region = "weakly balanced; lambda_min(W_i^T W_i) >= h_i for i < l";
  c.conservative = !f_star.has_value();
  c.f_star = f_star.value_or(0.0);
  if (f_star && L > 2) {
    // (f* + gap)^{l-1} <= 2^{l-2} (f*^{l-1} + gap^{l-1}).
    const double k = std::pow(2.0, l - 2.0);
    c.H0 = H0 + k * H1 * std::pow(c.f_star, l - 1.0);
    c.H1 = k * H1;
  } else {
    // l = 2 is linear in f; with reference 0 the bound is H0 + H1 f^{l-1} as stated.
    c.H0 = H0 + H1 * c.f_star;
    c.H1 = H1;
  }
  return c;
}

SmoothnessCertificate two_layer_mse_constants(const ActivationSpec& act, double x_spec, double lambda1,
                                              double lambda2, std::optional<double> f_star) {
  require(lambda1 > 0.0 && lambda2 > 0.0, ErrorCode::precondition,
          "lambda1 and lambda2 must be positive (the constants divide by them)");
  require(act.twice_differentiable, ErrorCode::precondition,
          fmt::format("activation {} has no bounded second derivative", act.name()));
  const double C1 = act.C1, C2 = act.C2, C3 = act.C3, X = x_spec;
  const double H0 = 4.0 * C2 * X + 2.0 * (lambda1 + lambda2);
  const double H1 = 4.0 / lambda1 * (2.0 * C2 * C2 + C3 + 4.0 * C1 * C2) * X * X +
                    8.0 / lambda2 * (C1 * C1 + 2.0 * C1 * C2) * X * X + 2.0 * C3 * X * X + 4.0 * C2 * X;
  return gap_form(H0, H1, f_star, "all weights (L2-regularised)");
}

SmoothnessCertificate two_layer_ce_constants(const ActivationSpec& act, double x_spec, double lambda1,
                                             double lambda2, std::optional<double> f_star) {
  require(lambda1 > 0.0 && lambda2 > 0.0, ErrorCode::precondition,
          "lambda1 and lambda2 must be positive (the constants divide by them)");
  require(act.twice_differentiable, ErrorCode::precondition,
          fmt::format("activation {} has no bounded second derivative", act.name()));
  const double C1 = act.C1, C2 = act.C2, C3 = act.C3, X = x_spec;
  const double H0 = lambda1 + lambda2;
  const double H1 = 2.0 / lambda1 * (C2 * C2 + C3 + 2.0 * C1 * C2) * X * X +
                    2.0 / lambda2 * (C1 * C1 + 2.0 * C1 * C2) * X * X + 2.0 * C2 * X + C3 * X * X;
  return gap_form(H0, H1, f_star, "all weights (L2-regularised)");
}

// ---------------------------------------------------------------------------
// Transforms

double lambert_nu() {
  static const double nu = [] {
    // Damped fixed point nu <- (nu + exp(-nu)) / 2; contraction factor <= 0.8.
    double x = 0.5;
    for (int i = 0; i < 1000; ++i) {
      const double next = 0.5 * (x + std::exp(-x));
      if (std::abs(next - x) < 1e-16) return next;
      x = next;
    }
    return x;
  }();
  return nu;
}

std::pair<double, double> l0l1_to_h0h1(double L0, double L1) {
  require(L0 >= 0.0 && L1 >= 0.0, ErrorCode::precondition, "L0 and L1 must be non-negative");
  const double nu = lambert_nu();
  return {L0 + L0 * L1 / nu, (4.0 * L1 * L1 + nu * L1) / (2.0 * nu)};
}

SmoothnessCertificate sum_params(const SmoothnessCertificate& f, const SmoothnessCertificate& g, double h_star) {
  require(f.rho == 1.0 && g.rho == 1.0, ErrorCode::precondition, "summation rule needs rho = 1 certificates");
  if (h_star < f.f_star + g.f_star - 1e-12)
    fail(ErrorCode::inconsistency,
         fmt::format("h* = {} is below f* + g* = {}", h_star, f.f_star + g.f_star));
  SmoothnessCertificate c;
  c.H1 = std::max(f.H1, g.H1);
  c.H0 = f.H0 + g.H0 + c.H1 * h_star - f.H1 * f.f_star - g.H1 * g.f_star;
  require(c.H0 >= 0.0, ErrorCode::internal, "summed H0 is negative");
  c.f_star = h_star;
  c.conservative = f.conservative || g.conservative;
  c.region = "intersection of the summands' regions";
  return c;
}

SmoothnessCertificate affine_params(const SmoothnessCertificate& g, const Mat& A, double f_star) {
  require(g.rho == 1.0, ErrorCode::precondition, "affine rule needs a rho = 1 certificate");
  if (f_star < g.f_star - 1e-12)
    fail(ErrorCode::inconsistency, fmt::format("f* = {} is below g* = {}", f_star, g.f_star));
  const double a2 = std::pow(spectral_norm(A), 2);
  SmoothnessCertificate c;
  c.H0 = a2 * (g.H0 + g.H1 * (f_star - g.f_star));
  c.H1 = a2 * g.H1;
  c.f_star = f_star;
  c.conservative = g.conservative;
  c.region = "preimage of the outer region under A";
  return c;
}

std::pair<double, double> rho_reduction(double K0, double K_rho, double rho, double delta0) {
  require(rho >= 1.0, ErrorCode::precondition, "rho must be at least 1");
  require(delta0 > 0.0, ErrorCode::precondition, "delta0 must be positive");
  return {K0, K_rho * std::pow(delta0, rho - 1.0)};
}

}  // namespace wl
