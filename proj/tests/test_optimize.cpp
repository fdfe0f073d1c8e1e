#include "warmup_lab/optimize.hpp"
#include "warmup_lab/problems.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace wl;

namespace {

std::shared_ptr<Quadratic> half_square() { return make_quadratic(Mat::Identity(1, 1), Vec::Zero(1)); }

ParamPoint point(std::initializer_list<double> xs) {
  Vec v(Index(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return ParamPoint::flat(v);
}

}  // namespace

TEST_CASE("unit step on half the squared norm lands on the minimiser in one step") {
  const auto q = half_square();
  StopRule stop;
  stop.grad_tol = 1e-12;
  const auto t = run_gd(*q, point({5.0}), StepPolicy::constant(1.0), stop);
  CHECK(t.stop_reason == StopReason::grad_tol);
  CHECK(t.iterations() == 1);
  REQUIRE(t.records.size() == 2);
  CHECK(t.records[0].f == 12.5);
  CHECK(t.records[0].step_size == 1.0);
  CHECK(t.records[1].step_size == 0.0);
  CHECK(t.final_w[0] == 0.0);
}

TEST_CASE("adaptive step with H1 = 0 gives the geometric recursion 0.9^k") {
  const auto q = half_square();
  StopRule stop;
  stop.max_iters = 30;
  const auto t = run_gd(*q, point({5.0}), StepPolicy::adaptive(1.0, 0.0, 1.0, 0.0), stop);
  CHECK(t.stop_reason == StopReason::max_iters);
  CHECK(t.iterations() == 30);
  REQUIRE(t.snapshots.size() == 31);
  for (const auto& s : t.snapshots) {
    CHECK(s.w[0] == doctest::Approx(5.0 * std::pow(0.9, double(s.iter))).epsilon(1e-13));
    CHECK(t.records[s.iter].iter == s.iter);
  }
  for (std::size_t k = 0; k + 1 < t.records.size(); ++k) CHECK(t.records[k].step_size == 0.1);
}

TEST_CASE("constant step above the safe threshold diverges on the exponential quadratic") {
  const auto eq = make_exp_quadratic(1.0, std::numbers::e);
  const double w0 = 2.0;
  const double eta = 1.1 * max_safe_constant_step(eq->f(w0), 1.0);
  StopRule stop;
  stop.max_iters = 20;
  const auto t = run_gd(*eq, point({w0}), StepPolicy::constant(eta), stop);
  REQUIRE(t.snapshots.size() >= 2);
  for (std::size_t k = 1; k < t.snapshots.size(); ++k)
    CHECK(std::abs(t.snapshots[k].w[0]) > std::abs(t.snapshots[k - 1].w[0]));
  CHECK(t.stop_reason == StopReason::diverged);
}

TEST_CASE("half the safe constant step does not diverge on the exponential quadratic") {
  const auto eq = make_exp_quadratic(1.0, std::exp(3.0));
  const double w0 = eq->recommended_w0();
  StopRule stop;
  stop.max_iters = 10000;
  const auto t = run_gd(*eq, point({w0}), StepPolicy::constant(0.5 * max_safe_constant_step(eq->f(w0), 1.0)), stop);
  CHECK(t.stop_reason != StopReason::diverged);
  CHECK(t.final_f() <= eq->f(w0));
}

TEST_CASE("stop conditions are checked in order: divergence, grad_tol, loss_tol, max_iters") {
  const auto q = make_quadratic(Mat::Identity(2, 2), Vec::Zero(2), 1.0);
  StopRule stop;
  stop.max_iters = 0;
  CHECK_THROWS_AS(run_gd(*q, point({1.0, 1.0}), StepPolicy::constant(0.5), stop), Error);

  stop.max_iters = 100;
  stop.loss_tol = 1e-6;
  const auto t = run_gd(*q, point({1.0, 1.0}), StepPolicy::constant(0.5), stop);
  CHECK(t.stop_reason == StopReason::loss_tol);
  CHECK(t.final_f() - 1.0 <= 1e-6);
  CHECK(t.records[t.records.size() - 2].f - 1.0 > 1e-6);

  stop.grad_tol = 10.0;  // already satisfied at w0
  const auto t0 = run_gd(*q, point({1.0, 1.0}), StepPolicy::constant(0.5), stop);
  CHECK(t0.stop_reason == StopReason::grad_tol);
  CHECK(t0.iterations() == 0);

  StopRule diverge;
  diverge.max_iters = 1000;
  diverge.divergence_guard = 1e6;
  const auto td = run_gd(*q, point({1.0, 1.0}), StepPolicy::constant(3.0), diverge);
  CHECK(td.stop_reason == StopReason::diverged);
  CHECK((std::abs(td.final_f()) > 1e6 || td.final_w.norm() > 1e6));
}

TEST_CASE("loss_tol without a known optimum is a precondition error") {
  const auto f = std::make_shared<SumObjective>(half_square(), half_square());
  StopRule stop;
  stop.loss_tol = 1e-3;
  try {
    run_gd(*f, point({1.0}), StepPolicy::constant(0.1), stop);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::precondition);
  }
}

TEST_CASE("a policy error ends the run with step_error") {
  const auto q = make_quadratic(Mat::Identity(1, 1), Vec::Zero(1), 0.0);
  StopRule stop;
  stop.max_iters = 50;
  // The schedule horizon (5) is shorter than max_iters.
  const auto t = run_gd(*q, point({1.0}), StepPolicy::cosine(0.1, 5, 0.01), stop);
  CHECK(t.stop_reason == StopReason::step_error);
  CHECK(t.iterations() == 5);
  CHECK_FALSE(t.message.empty());

  // f_star above the true optimum makes the adaptive gap negative.
  const auto bad = run_gd(*q, point({0.01}), StepPolicy::adaptive(1.0, 1.0, 1.0, 1.0), stop);
  CHECK(bad.stop_reason == StopReason::step_error);
  CHECK(bad.iterations() == 0);
}

TEST_CASE("dimension mismatch is rejected") {
  StopRule stop;
  CHECK_THROWS_AS(run_gd(*half_square(), point({1.0, 2.0}), StepPolicy::constant(0.1), stop), Error);
}

TEST_CASE("adaptive GD decreases the loss with the descent inequality") {
  const auto eq = make_exp_quadratic(1.0, std::exp(4.0));
  const auto cert = *eq->certificate();
  StopRule stop;
  stop.max_iters = 2000;
  stop.loss_tol = 1e-8;
  const auto t = run_gd(*eq, point({eq->recommended_w0()}),
                        StepPolicy::adaptive(cert.H0, cert.H1, 1.0, *eq->f_star()), stop);
  CHECK(t.stop_reason == StopReason::loss_tol);
  for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
    const auto& r = t.records[k];
    CHECK(t.records[k + 1].f <=
          r.f - 0.5 * r.step_size * r.grad_norm * r.grad_norm + 1e-9 * (1.0 + std::abs(r.f)));
  }
}

TEST_CASE("constant step on the runway needs at least the counting bound") {
  const double H0 = 1.0, H1 = 1.0, delta = 0.5;
  const auto rw = make_runway(H0, H1, delta);
  const double eta = 0.1;
  StopRule stop;
  stop.max_iters = 200000;
  stop.loss_tol = delta;
  const auto t = run_gd(*rw, point({rw->X2()}), StepPolicy::constant(eta), stop);
  REQUIRE(t.stop_reason == StopReason::loss_tol);
  const double bound = std::ceil((rw->X2() - rw->X1()) / (eta * rw->slope()));
  CHECK(double(t.iterations()) >= bound);
}

TEST_CASE("SGD with the full batch reproduces GD bit for bit") {
  const auto ls = make_interpolating_least_squares(12, 20, 3);
  const auto cert = *ls->certificate();
  const auto policy = StepPolicy::adaptive(cert.H0, cert.H1, 1.0, 0.0);
  StopRule stop;
  stop.max_iters = 60;
  const ParamPoint w0 = ParamPoint::flat(Vec::Ones(20));
  const auto gd = run_gd(*ls, w0, policy, stop);
  const auto sgd = run_sgd(*ls, w0, policy, 12, 99, stop);
  REQUIRE(gd.records.size() == sgd.records.size());
  for (std::size_t k = 0; k < gd.records.size(); ++k) {
    CHECK(gd.records[k].f == sgd.records[k].f);
    CHECK(gd.records[k].step_size == sgd.records[k].step_size);
  }
  CHECK((gd.final_w - sgd.final_w).norm() == 0.0);
}

TEST_CASE("SGD is deterministic in its seed") {
  const auto ls = make_interpolating_least_squares(30, 40, 4);
  const auto policy = StepPolicy::constant(0.01);
  StopRule stop;
  stop.max_iters = 100;
  const ParamPoint w0 = ParamPoint::flat(Vec::Ones(40));
  const auto a = run_sgd(*ls, w0, policy, 5, 17, stop);
  const auto b = run_sgd(*ls, w0, policy, 5, 17, stop);
  const auto c = run_sgd(*ls, w0, policy, 5, 18, stop);
  CHECK(trajectory_csv(a) == trajectory_csv(b));
  CHECK(a.batches == b.batches);
  CHECK(a.batches != c.batches);
  CHECK(a.batches.size() == a.iterations());
  CHECK(a.seed == 17);
  for (const auto& batch : a.batches) CHECK(batch.size() == 5);
}

TEST_CASE("SGD validates batch size and finite-sum structure") {
  const auto ls = make_interpolating_least_squares(8, 12, 1);
  StopRule stop;
  const ParamPoint w0 = ParamPoint::flat(Vec::Zero(12));
  CHECK_THROWS_AS(run_sgd(*ls, w0, StepPolicy::constant(0.1), 9, 0, stop), Error);
  CHECK_THROWS_AS(run_sgd(*ls, w0, StepPolicy::constant(0.1), 0, 0, stop), Error);
  CHECK_THROWS_AS(run_sgd(*half_square(), point({1.0}), StepPolicy::constant(0.1), 1, 0, stop), Error);
}

TEST_CASE("adaptive SGD on interpolating least squares never increases the distance to the solutions") {
  const auto ls = make_interpolating_least_squares(40, 60, 8);
  const auto cert = ls->uniform_component_certificate();
  StopRule stop;
  stop.max_iters = 300;
  auto t = run_sgd(*ls, ParamPoint::flat(Vec::Constant(60, 0.5)),
                   StepPolicy::adaptive(cert.H0, cert.H1, 1.0, 0.0), 4, 21, stop);
  attach_distance_tracking(t, *ls);
  for (std::size_t k = 1; k < t.records.size(); ++k)
    CHECK(*t.records[k].dist_to_solution <= *t.records[k - 1].dist_to_solution + 1e-12);
}

TEST_CASE("distance tracking matches a direct recomputation") {
  const auto ls = make_interpolating_least_squares(10, 25, 2);
  const auto cert = *ls->certificate();
  StopRule stop;
  stop.max_iters = 50;
  const Vec w0 = Vec::LinSpaced(25, -1.0, 1.0);
  auto t = run_gd(*ls, ParamPoint::flat(w0), StepPolicy::adaptive(cert.H0, cert.H1, 1.0, 0.0), stop);
  attach_distance_tracking(t, *ls);
  CHECK(*t.records[0].dist_to_solution == doctest::Approx((w0 - ls->project_solution(w0)).norm()).epsilon(1e-14));
  for (std::size_t k = 1; k < t.records.size(); ++k)
    CHECK(*t.records[k].dist_to_solution <= *t.records[k - 1].dist_to_solution + 1e-12);

  // A point on the solution set has distance zero.
  auto t0 = run_gd(*ls, ParamPoint::flat(ls->w_dagger()), StepPolicy::constant(0.1), stop);
  attach_distance_tracking(t0, *ls);
  CHECK(*t0.records[0].dist_to_solution < 1e-10);

  auto no_proj = run_gd(*std::make_shared<SumObjective>(half_square(), half_square()), point({1.0}),
                        StepPolicy::constant(0.1), stop);
  CHECK_THROWS_AS(attach_distance_tracking(no_proj, SumObjective(half_square(), half_square())), Error);
}

TEST_CASE("snapshots are thinned above 100 dimensions") {
  const auto q = make_quadratic(Mat::Identity(150, 150), Vec::Zero(150), 0.0);
  StopRule stop;
  stop.max_iters = 25;
  const auto t = run_gd(*q, ParamPoint::flat(Vec::Ones(150)), StepPolicy::constant(0.01), stop);
  std::vector<std::uint64_t> iters;
  for (const auto& s : t.snapshots) iters.push_back(s.iter);
  CHECK(iters == std::vector<std::uint64_t>{0, 10, 20, 25});
}

TEST_CASE("trajectory CSV and summary JSON have the documented layout") {
  const auto q = half_square();
  StopRule stop;
  stop.max_iters = 2;
  auto t = run_gd(*q, point({2.0}), StepPolicy::constant(0.5), stop);
  attach_distance_tracking(t, *q);
  const std::string csv = trajectory_csv(t);
  CHECK(csv.rfind("iter,f,grad_norm,step_size,dist_to_solution\n", 0) == 0);
  CHECK(csv.find("0,2,2,0.5,2\n") != std::string::npos);
  CHECK(csv.find("2,0.125,0.5,0,0.5\n") != std::string::npos);
  const std::string js = trajectory_summary_json(t);
  CHECK(js.find("\"stop_reason\": \"max_iters\"") != std::string::npos);
  CHECK(js.find("\"iters\": 2") != std::string::npos);
  CHECK(js.find("mt19937_64") != std::string::npos);
  CHECK(std::string(stop_reason_name(StopReason::diverged)) == "diverged");
}
