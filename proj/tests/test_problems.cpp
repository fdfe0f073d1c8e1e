#include "warmup_lab/problems.hpp"
#include "warmup_lab/smoothness.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace wl;

namespace {

void check_gradient(const Objective& obj, const Vec& w, double tol = 1e-6) {
  const Vec fd = finite_diff_gradient(obj, w, default_fd_step(w));
  CHECK(relative_error(fd, obj.gradient(w)) < tol);
}

Mat leaky(const Mat& Z, double b) { return Z.unaryExpr([b](double x) { return x >= 0.0 ? x : b * x; }); }

}  // namespace

TEST_CASE("DatasetPair caches spectral summaries") {
  Mat X(2, 3);
  X << 1, 0, 0, 0, 2, 0;
  Mat Y(1, 3);
  Y << 3, 4, 0;
  const DatasetPair p = DatasetPair::make(X, Y);
  CHECK(p.d() == 2);
  CHECK(p.m() == 3);
  CHECK(p.c() == 1);
  CHECK(p.x_spec == doctest::Approx(2.0));
  CHECK(p.lambda_min_xxt == doctest::Approx(1.0));
  CHECK(p.y_fro == doctest::Approx(5.0));
  CHECK_THROWS_AS(DatasetPair::make(X, Mat::Zero(1, 2)), Error);
}

TEST_CASE("random_dataset is seeded and validates the teacher") {
  const DatasetPair a = random_dataset(3, 10, 2, 4, "tanh");
  const DatasetPair b = random_dataset(3, 10, 2, 4, "tanh");
  CHECK((a.X - b.X).norm() == 0.0);
  CHECK((a.Y - b.Y).norm() == 0.0);
  CHECK_THROWS_AS(random_dataset(3, 10, 2, 4, "relu"), Error);
}

TEST_CASE("activation constants") {
  const ActivationSpec t = ActivationSpec::tanh();
  CHECK(t.C1 == 1.0);
  CHECK(t.C2 == 1.0);
  // sup |tanh''| = 4 / (3 sqrt 3), attained where tanh^2 = 1/3; C3 rounds it up.
  const double sup = 4.0 / (3.0 * std::sqrt(3.0));
  CHECK(t.C3 >= sup);
  CHECK(t.C3 - sup < 1e-4);
  CHECK(tanh_second_derivative_sup_grid() == doctest::Approx(sup).epsilon(1e-8));
  CHECK(t.d2phi(0.3) == doctest::Approx(-2.0 * std::tanh(0.3) * (1.0 - std::pow(std::tanh(0.3), 2))));
  const ActivationSpec l = ActivationSpec::leaky_relu(0.25);
  CHECK(l.phi(-2.0) == doctest::Approx(-0.5));
  CHECK(l.phi(3.0) == doctest::Approx(3.0));
  CHECK_FALSE(l.twice_differentiable);
}

TEST_CASE("deep linear value matches the product formula") {
  const DatasetPair data = random_dataset(3, 6, 2, 1);
  auto net = make_deep_linear(data, {2, 3, 3});
  Rng rng(2);
  const Vec w = rng.normal_vec(net->dim());
  const auto W = unpack_layers(w, net->shapes());
  const double expected = (data.Y - W[0] * W[1] * data.X).squaredNorm();
  CHECK(net->value(w) == doctest::Approx(expected).epsilon(1e-12));
  check_gradient(*net, w);
}

TEST_CASE("leaky chain value matches a hand-written forward pass") {
  const DatasetPair data = random_dataset(3, 5, 2, 3);
  auto net = make_deep_leaky(data, {2, 4, 3, 3}, {0.5, 0.3});
  Rng rng(4);
  const Vec w = rng.normal_vec(net->dim());
  const auto W = unpack_layers(w, net->shapes());
  const Mat F = W[0] * leaky(W[1] * leaky(W[2] * data.X, 0.3), 0.5);
  CHECK(net->value(w) == doctest::Approx((data.Y - F).squaredNorm()).epsilon(1e-12));
  check_gradient(*net, w);
  CHECK(net->kink_distance(w) > 0.0);
}

TEST_CASE("semi-linear network has a single leaky layer") {
  const DatasetPair data = random_dataset(3, 5, 2, 5);
  auto net = make_semi_linear(data, {2, 3, 3, 3}, 0.4);
  REQUIRE(net->slopes().size() == 2);
  CHECK(net->slopes()[0] == 0.4);
  CHECK(net->slopes()[1] == 1.0);
  CHECK_THROWS_AS(make_deep_leaky(data, {2, 3, 3}, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(make_deep_linear(data, {3, 3, 3}), Error);
}

TEST_CASE("balanced initialisations satisfy their balance relations") {
  const std::vector<Index> dims = {2, 3, 3, 4};
  const ParamPoint strong = make_balanced_init(dims, 1.5, BalanceMode::strong, 9);
  const auto W = strong.matrices();
  for (std::size_t i = 0; i + 1 < W.size(); ++i)
    CHECK((W[i].transpose() * W[i] - W[i + 1] * W[i + 1].transpose()).norm() < 1e-10);
  const ParamPoint weak = make_balanced_init(dims, 1.5, BalanceMode::weak, 9);
  for (const Mat& M : weak.matrices()) CHECK(M.norm() == doctest::Approx(1.5));
  const DatasetPair data = random_dataset(4, 6, 2, 1);
  auto net = make_deep_linear(data, dims);
  const NetDiagnostics diag = net->diagnostics(strong.data());
  CHECK(diag.strong_balance_residual < 1e-10);
  CHECK(diag.weak_balance_residual < 1e-10);
}

TEST_CASE("two-layer networks: values and gradients") {
  const DatasetPair data = random_dataset(4, 8, 1, 2, "tanh");
  auto mse = make_two_layer_mse_l2(data, 5, ActivationSpec::tanh(), 1e-2, 2e-2);
  Rng rng(3);
  const Vec w = rng.normal_vec(mse->dim());
  const auto W = unpack_layers(w, mse->shapes());
  const Mat out = W[0] * (W[1] * data.X).array().tanh().matrix();
  const double expected =
      (data.Y - out).squaredNorm() + 0.5 * 1e-2 * W[0].squaredNorm() + 0.5 * 2e-2 * W[1].squaredNorm();
  CHECK(mse->value(w) == doctest::Approx(expected).epsilon(1e-12));
  check_gradient(*mse, w);

  Mat Yb = (data.Y.array() > 0.0).cast<double>().matrix();
  auto ce = make_two_layer_ce_l2(DatasetPair::make(data.X, Yb), 5, ActivationSpec::tanh(), 1e-2, 2e-2);
  double ce_expected = 0.5 * 1e-2 * W[0].squaredNorm() + 0.5 * 2e-2 * W[1].squaredNorm();
  for (Index j = 0; j < out.cols(); ++j) {
    const double p = 1.0 / (1.0 + std::exp(-out(0, j)));
    ce_expected -= Yb(0, j) * std::log(p) + (1.0 - Yb(0, j)) * std::log(1.0 - p);
  }
  CHECK(ce->value(w) == doctest::Approx(ce_expected).epsilon(1e-12));
  check_gradient(*ce, w);
}

TEST_CASE("two-layer components average to the full objective") {
  const DatasetPair data = random_dataset(3, 6, 1, 8, "tanh");
  auto net = make_two_layer_mse_l2(data, 4, ActivationSpec::tanh(), 1e-3, 1e-3);
  Rng rng(1);
  const Vec w = rng.normal_vec(net->dim());
  double mean = 0.0;
  Vec gmean = Vec::Zero(net->dim());
  for (Index i = 0; i < net->n_components(); ++i) {
    mean += net->component_value(i, w);
    gmean += net->component_gradient(i, w);
  }
  mean /= double(net->n_components());
  gmean /= double(net->n_components());
  CHECK(mean == doctest::Approx(net->value(w)).epsilon(1e-12));
  CHECK(relative_error(gmean, net->gradient(w)) < 1e-12);
}

TEST_CASE("cross-entropy model rejects non-binary labels and non-smooth activations") {
  const DatasetPair data = random_dataset(3, 6, 1, 8, "tanh");
  CHECK_THROWS_AS(make_two_layer_ce_l2(data, 4, ActivationSpec::tanh(), 1e-3, 1e-3), Error);
  CHECK_THROWS_AS(make_two_layer_mse_l2(data, 4, ActivationSpec::leaky_relu(0.5), 1e-3, 1e-3), Error);
}

TEST_CASE("ExpQuadratic is C1 at the branch point and grows exponentially") {
  auto f = make_exp_quadratic(2.0, std::exp(3.0));
  const double x = f->branch_point();
  CHECK(f->f(x - 1e-12) == doctest::Approx(f->f(x + 1e-12)).epsilon(1e-9));
  CHECK(f->df(x - 1e-12) == doctest::Approx(f->df(x + 1e-12)).epsilon(1e-9));
  CHECK(f->f(0.0) == 0.5);
  CHECK(f->f(-3.0) == f->f(3.0));
  CHECK(f->recommended_w0() == doctest::Approx((3.0 + 1.0) / std::sqrt(2.0)));
  CHECK(f->f(f->recommended_w0()) == doctest::Approx(std::exp(3.0)));
  check_gradient(*f, Vec::Constant(1, 2.5));
}

TEST_CASE("Runway pieces join continuously and the runway has slope sqrt(2 H0 delta)") {
  auto r = make_runway(1.0, 4.0, 0.005);
  CHECK(r->slope() == doctest::Approx(std::sqrt(2.0 * 0.005)));
  CHECK(r->f(r->X1()) == doctest::Approx(0.005));
  CHECK(r->f(r->X2()) == doctest::Approx(1.0));
  for (double x : {r->X1(), r->X2()}) {
    CHECK(r->f(x - 1e-10) == doctest::Approx(r->f(x + 1e-10)).epsilon(1e-8));
    CHECK(r->df(x - 1e-10) == doctest::Approx(r->df(x + 1e-10)).epsilon(1e-6));
  }
  CHECK(r->d2f(0.5 * (r->X1() + r->X2())) == 0.0);
  CHECK_THROWS_AS(make_runway(1.0, 4.0, 1.5), Error);
}

TEST_CASE("PL lower-bound construction is C1 and mu-PL on its core") {
  auto p = make_pl_lower_bound(10.0, 0.5, 1.0);
  const double wc = p->w_c();
  CHECK(wc == doctest::Approx(std::sqrt(40.0)));
  CHECK(p->f(wc - 1e-10) == doctest::Approx(p->f(wc + 1e-10)).epsilon(1e-9));
  CHECK(p->df(wc - 1e-10) == doctest::Approx(p->df(wc + 1e-10)).epsilon(1e-8));
  CHECK(pl_constant_on_grid(*p, -8.0, 8.0, 2001) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("pl_sin_quadratic: grid PL constant") {
  auto p = make_pl_sin_quadratic();
  // Independent scan: min f'^2 / (2 f) over a grid avoiding 0.
  double mu = kInf;
  for (int i = 1; i <= 100000; ++i) {
    const double w = 10.0 * i / 100000.0;
    const double g = 2.0 * w + 3.0 * std::sin(2.0 * w);
    const double f = w * w + 3.0 * std::sin(w) * std::sin(w);
    mu = std::min(mu, g * g / (2.0 * f));
  }
  CHECK(p->mu() > 0.0);
  CHECK(p->mu() == doctest::Approx(mu).epsilon(1e-3));
  check_gradient(*p, Vec::Constant(1, 1.3));
}

TEST_CASE("adaptive Simpson integrates sin(u^2) accurately") {
  // Fresnel-type check against a fine composite trapezoid.
  const int n = 2000000;
  const double b = 3.0;
  double trap = 0.5 * (std::sin(0.0) + std::sin(b * b));
  for (int i = 1; i < n; ++i) {
    const double u = b * i / n;
    trap += std::sin(u * u);
  }
  trap *= b / n;
  CHECK(adaptive_simpson([](double u) { return std::sin(u * u); }, 0.0, b, 1e-12) ==
        doctest::Approx(trap).epsilon(1e-9));
}

TEST_CASE("sum_sin_square parts add up to the counterexample") {
  auto f1 = make_sum_sin_square_part(+1), f2 = make_sum_sin_square_part(-1);
  auto sum = make_counterexample(CounterexampleKind::sum_sin_square);
  for (double w : {0.4, 1.7, 3.2}) {
    const Vec v = Vec::Constant(1, w);
    CHECK(f1->value(v) + f2->value(v) == doctest::Approx(sum->value(v)).epsilon(1e-10));
    CHECK(f1->df(w) + f2->df(w) == doctest::Approx(sum->gradient(v)[0]).epsilon(1e-12));
  }
  const Vec w3 = sum->witness(3);
  CHECK(w3[0] == doctest::Approx(std::sqrt(3.0 * std::numbers::pi)));
  CHECK(std::abs(sum->gradient(w3)[0]) < 1e-12);
}

TEST_CASE("counterexample gradients match finite differences") {
  for (auto kind : {CounterexampleKind::affine_cos_exp, CounterexampleKind::two_layer_l2,
                    CounterexampleKind::balanced_two_layer}) {
    auto c = make_counterexample(kind);
    CAPTURE(counterexample_name(kind));
    CHECK(parse_counterexample_kind(counterexample_name(kind)) == kind);
    const Vec w = c->witness(2) + Vec::Constant(c->dim(), 0.01);
    check_gradient(*c, w, 1e-5);
  }
  CHECK_THROWS_AS(parse_counterexample_kind("nope"), Error);
}

TEST_CASE("balanced_two_layer witnesses are weakly balanced") {
  auto c = make_counterexample(CounterexampleKind::balanced_two_layer);
  for (int m : {1, 5, 40}) {
    const auto W = unpack_layers(c->witness(m), c->shapes());
    CHECK(W[0].norm() == doctest::Approx(W[1].norm()).epsilon(1e-12));
  }
}

TEST_CASE("cos-exp outer function composes to the affine counterexample") {
  auto g = make_cos_exp_outer();
  Mat A(2, 1);
  A << 1.0, 0.0;
  const AffineComposition f(g, A);
  auto direct = make_counterexample(CounterexampleKind::affine_cos_exp);
  for (double w : {-1.0, 0.3, 2.2}) {
    const Vec v = Vec::Constant(1, w);
    CHECK(f.value(v) == doctest::Approx(direct->value(v)).epsilon(1e-14));
    CHECK(f.gradient(v)[0] == doctest::Approx(direct->gradient(v)[0]).epsilon(1e-14));
  }
  check_gradient(*g, (Vec(2) << 0.4, -0.2).finished());
}

TEST_CASE("interpolating least squares: projection reaches the common minimiser") {
  auto ls = make_interpolating_least_squares(10, 20, 3);
  Rng rng(8);
  const Vec w = rng.normal_vec(20);
  const Vec p = ls->project_solution(w);
  CHECK(ls->value(p) < 1e-24);
  for (Index i = 0; i < 10; ++i) CHECK(ls->component_value(i, p) < 1e-24);
  CHECK((ls->project_solution(p) - p).norm() < 1e-12);
  // The projection moves orthogonally to the solution set, i.e. within range(X).
  const Vec step = w - p;
  const Vec in_range = ls->X() * (ls->X().transpose() * ls->X()).ldlt().solve(ls->X().transpose() * step);
  CHECK((in_range - step).norm() < 1e-10);
  check_gradient(*ls, w);
  CHECK_THROWS_AS(make_interpolating_least_squares(10, 5, 1), Error);
}

TEST_CASE("interpolating least squares certificates") {
  auto ls = make_interpolating_least_squares(10, 20, 3);
  const auto cert = ls->certificate();
  REQUIRE(cert);
  const Mat H = ls->X() * ls->X().transpose() / 10.0;
  CHECK(cert->H0 == doctest::Approx(spectral_norm(H)).epsilon(1e-12));
  CHECK(cert->H1 == 0.0);
  double max_norm = 0.0;
  for (Index i = 0; i < 10; ++i) {
    CHECK(ls->component_certificate(i).H0 == doctest::Approx(ls->X().col(i).squaredNorm()));
    max_norm = std::max(max_norm, ls->X().col(i).squaredNorm());
  }
  CHECK(ls->uniform_component_certificate().H0 == doctest::Approx(max_norm));
}

TEST_CASE("quadratic objective") {
  Mat A = Mat::Zero(2, 2);
  A.diagonal() << 1.0, 3.0;
  auto q = make_quadratic(A, (Vec(2) << 1.0, -1.0).finished(), 2.0);
  CHECK(q->value((Vec(2) << 1.0, -1.0).finished()) == doctest::Approx(2.0));
  CHECK(q->value((Vec(2) << 2.0, 0.0).finished()) == doctest::Approx(2.0 + 0.5 * (1.0 + 3.0)));
  REQUIRE(q->f_star());
  CHECK(*q->f_star() == 2.0);
  CHECK(q->has_projector());
  CHECK(q->certificate()->H0 == doctest::Approx(3.0));
  Mat S = Mat::Zero(2, 2);
  S(0, 0) = 1.0;
  auto semi = make_quadratic(S, Vec::Zero(2));
  CHECK_FALSE(semi->has_projector());
}

TEST_CASE("sum, affine and scaled objectives") {
  Mat A = Mat::Identity(2, 2);
  auto q1 = make_quadratic(A, Vec::Zero(2));
  auto q2 = make_quadratic(2.0 * A, Vec::Ones(2));
  const SumObjective s(q1, q2);
  const Vec w = (Vec(2) << 0.5, -0.5).finished();
  CHECK(s.value(w) == doctest::Approx(q1->value(w) + q2->value(w)));
  check_gradient(s, w);
  Mat B(2, 3);
  B << 1, 2, 0, 0, 1, -1;
  const AffineComposition c(q2, B);
  const Vec u = (Vec(3) << 0.1, 0.2, 0.3).finished();
  CHECK(c.value(u) == doctest::Approx(q2->value(B * u)));
  check_gradient(c, u);
  const ScaledObjective sc(q1, 3.0);
  CHECK(sc.value(w) == doctest::Approx(3.0 * q1->value(w)));
}

TEST_CASE("spectral helpers") {
  Mat A(2, 2);
  A << 3, 0, 0, -4;
  CHECK(spectral_norm(A) == doctest::Approx(4.0));
  CHECK(lambda_min_sym(A) == doctest::Approx(-4.0));
}
