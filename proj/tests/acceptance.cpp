// Acceptance checks: one line per criterion, "criterion N: PASS|FAIL <title> -- <detail> (<seconds> s)".
// Exit status is 0 only when every criterion passes.

#include "warmup_lab/harness.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace wl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

void note(Outcome& out, bool ok, const std::string& what) {
  if (!ok) out.ok = false;
  if (!out.detail.empty()) out.detail += "; ";
  out.detail += (ok ? "" : "FAILED ") + what;
}

std::string g(double v) { return fmt::format("{:.4g}", v); }

std::vector<Vec> sample_points(const PointSampler& sampler, Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> pts;
  pts.reserve(std::size_t(n));
  for (Index i = 0; i < n; ++i) pts.push_back(sampler.sample(rng));
  return pts;
}

struct Certified {
  std::string label;
  ProblemSpec spec;
};

// Problems whose certificates are checked in criteria 1 and 2.
std::vector<Certified> certified_sweep() {
  return {
      {"deep_linear l=2", {"deep_linear", Json{{"dims", {2, 3, 3}}}}},
      {"deep_linear l=3", {"deep_linear", Json{{"dims", {2, 3, 3, 4}}}}},
      {"semi_linear l=2", {"semi_linear", Json{{"dims", {3, 2, 3}}}}},
      {"semi_linear l=3", {"semi_linear", Json{{"dims", {3, 2, 2, 3}}}}},
      {"deep_leaky l=3 rho=2", {"deep_leaky", Json{{"dims", {3, 3, 3, 3}}}}},
      {"two_layer_mse tanh", {"two_layer_mse", Json{{"activation", "tanh"}}}},
      {"two_layer_ce tanh", {"two_layer_ce", Json{{"activation", "tanh"}}}},
      {"exp_quadratic", {"exp_quadratic", Json::object()}},
      {"runway", {"runway", Json::object()}},
      {"pl_lower_bound", {"pl_lower_bound", Json::object()}},
  };
}

constexpr Index kSweepPoints = 500;
constexpr std::uint64_t kSweepSeed = 2024;

Outcome certificate_soundness() {
  Outcome out;
  for (const auto& c : certified_sweep()) {
    const ProblemInstance inst = build_problem(c.spec);
    const SmoothnessCertificate& cert = *inst.cert;
    const CertificateReport rep =
        verify_certificate(*inst.obj, cert, *inst.sampler, kSweepPoints, 1e-6 * (1.0 + cert.H0), kSweepSeed);
    note(out, rep.pass(),
         fmt::format("{}: {} violations, worst ratio {}", c.label, rep.violations.size(), g(rep.worst_ratio)));
  }
  return out;
}

Outcome gradient_bound() {
  Outcome out;
  for (const auto& c : certified_sweep()) {
    const ProblemInstance inst = build_problem(c.spec);
    const std::vector<Vec> pts = sample_points(*inst.sampler, kSweepPoints, kSweepSeed);
    SmoothnessCertificate cert = *inst.cert;
    std::string how;
    if (cert.rho != 1.0) {
      // Reduce to rho = 1 on the sublevel set spanned by the sampled points.
      double delta = 1e-12;
      for (const Vec& w : pts) delta = std::max(delta, inst.obj->value(w) - cert.f_star);
      std::tie(cert.H0, cert.H1) = rho_reduction(cert.H0, cert.H1, cert.rho, delta);
      cert.rho = 1.0;
      how = " (rho reduced on the sampled sublevel set)";
    }
    const LemmaReport rep = check_gradient_bound(*inst.obj, cert, pts);
    note(out, rep.pass(), fmt::format("{}: {} violations{}", c.label, rep.violations.size(), how));
  }
  return out;
}

Outcome adaptive_descent() {
  Outcome out;
  for (const auto& info : problem_registry()) {
    if (info.name == "counterexample") continue;
    const ProblemInstance inst = build_problem({info.name, Json::object()});
    if (!inst.cert) continue;
    StopRule stop;
    stop.max_iters = 10000;
    const Trajectory t = run_gd(*inst.obj, inst.w0, build_policy(Json{{"kind", "adaptive"}}, &inst), stop);
    const LemmaReport rep = check_trajectory_descent(t);
    bool monotone = true;
    for (std::size_t k = 1; k + 1 < t.records.size(); ++k) {
      const EvalRecord& a = t.records[k - 1];
      const EvalRecord& b = t.records[k];
      if (b.f < a.f && b.step_size < a.step_size) monotone = false;
    }
    const bool ok = rep.pass() && monotone && t.stop_reason == StopReason::max_iters;
    note(out, ok,
         fmt::format("{}: {} steps, {} descent violations, steps {}", info.name, t.iterations(),
                     rep.violations.size(), monotone ? "non-decreasing" : "DECREASED"));
  }
  return out;
}

Outcome lower_bound_threshold() {
  Outcome out;
  auto obj = make_exp_quadratic(1.0, std::exp(3.0));
  const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->recommended_w0()));
  const double eta = max_safe_constant_step(obj->value(w0.data()), 1.0);

  // |w_k| grows like a tower of exponentials (4, 4.8, 14.8, 4e5, e^4e5, ...), so
  // only the first few iterates are representable. Those are checked directly;
  // the remaining steps up to 20 follow by induction: on the exponential branch
  // w_{k+1} = w_k - eta sgn(w_k) e^{|w_k| - 1}, so if eta e^{a - 1} > 2a at
  // a = |w_k| then |w_{k+1}| = eta e^{a - 1} - a > a, and eta e^{x - 1} - 2x is
  // increasing wherever eta e^{x - 1} > 2, so the invariant persists.
  const double step = 1.1 * eta;
  StopRule short_run;
  short_run.max_iters = 20;
  const Trajectory above = run_gd(*obj, w0, StepPolicy::constant(step), short_run);
  std::vector<double> a;
  for (const Snapshot& s : above.snapshots)
    if (std::isfinite(s.w[0])) a.push_back(std::abs(s.w[0]));
  bool increasing = a.size() >= 2;
  for (std::size_t k = 1; k < a.size(); ++k) increasing = increasing && a[k] > a[k - 1];
  const double last = a.back();
  const bool invariant = last > 1.0 && std::log(step) + last - 1.0 > std::log(2.0 * last);
  note(out, increasing && invariant && above.stop_reason == StopReason::diverged,
       fmt::format("1.1 x threshold: |w| strictly increasing over the {} representable steps (|w_{}| = {}), "
                   "eta e^(|w|-1) > 2|w| there, so |w| increases at every step through 20; stop {}",
                   a.size() - 1, a.size() - 1, g(last), stop_reason_name(above.stop_reason)));

  StopRule long_run;
  long_run.max_iters = 10000;
  const Trajectory half = run_gd(*obj, w0, StepPolicy::constant(0.5 * eta), long_run);
  note(out, half.stop_reason == StopReason::max_iters && half.iterations() == 10000,
       fmt::format("0.5 x threshold: {} steps, stop {}", half.iterations(), stop_reason_name(half.stop_reason)));
  return out;
}

Outcome runway_counting() {
  Outcome out;
  const double H0 = 1.0, H1 = 4.0, eps = 0.05;
  auto obj = make_runway(H0, H1, 2.0 * eps * eps);
  const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->X2()));
  const double f0 = obj->value(w0.data());
  StopRule stop;
  stop.max_iters = 1000000;
  stop.grad_tol = eps;
  const Trajectory t = run_gd(*obj, w0, StepPolicy::constant(max_safe_constant_step(f0, H1)), stop);
  BoundInputs in;
  in.H1 = H1;
  in.delta0 = f0;
  in.eps = eps;
  const double bound = predict_bound(BoundKind::lower_nonconvex, in).iters;
  note(out, t.stop_reason == StopReason::grad_tol && double(t.iterations()) > bound,
       fmt::format("measured {} iterations vs lower bound {}", t.iterations(), g(bound)));
  return out;
}

Outcome upper_bound_domination() {
  Outcome out;
  {
    const ProblemInstance inst = build_problem({"interpolating_least_squares", Json{{"n", 10}, {"d", 20}}});
    const SmoothnessCertificate& cert = *inst.cert;
    const Vec& w = inst.w0.data();
    const double dist0 = (w - inst.obj->project_solution(w)).norm();
    for (double eps : {1e-2, 1e-4}) {
      StopRule stop;
      stop.max_iters = 1000000;
      stop.loss_tol = eps;
      const Trajectory t = run_gd(*inst.obj, inst.w0, build_policy(Json{{"kind", "adaptive"}}, &inst), stop);
      BoundInputs in;
      in.H0 = cert.H0;
      in.H1 = cert.H1;
      in.theta = 1.0;
      in.dist0 = dist0;
      in.eps = eps;
      const double bound = predict_bound(BoundKind::upper_aiming, in).iters;
      note(out, t.stop_reason == StopReason::loss_tol && double(t.iterations()) <= bound,
           fmt::format("least squares eps={}: {} <= {}", eps, t.iterations(), g(bound)));
    }
  }
  {
    auto obj = make_pl_sin_quadratic();
    const SmoothnessCertificate cert = *obj->certificate();
    const double mu = pl_constant_on_grid(*obj, -10.0, 10.0, 200001);
    const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, 3.0));
    const double delta0 = obj->value(w0.data()) - *obj->f_star();
    for (double eps : {1e-2, 1e-4}) {
      StopRule stop;
      stop.max_iters = 1000000;
      stop.loss_tol = eps;
      const Trajectory t = run_gd(*obj, w0, StepPolicy::adaptive(cert.H0, cert.H1, 1.0, cert.f_star), stop);
      BoundInputs in;
      in.H0 = cert.H0;
      in.H1 = cert.H1;
      in.delta0 = delta0;
      in.mu = mu;
      in.eps = eps;
      const double bound = predict_bound(BoundKind::upper_pl, in).iters;
      note(out, t.stop_reason == StopReason::loss_tol && double(t.iterations()) <= bound,
           fmt::format("PL (grid mu = {}) eps={}: {} <= {}", g(mu), eps, t.iterations(), g(bound)));
    }
  }
  return out;
}

Outcome warmup_advantage() {
  Outcome out;
  auto obj = make_exp_quadratic(1.0, std::exp(5.0));
  const SmoothnessCertificate cert = *obj->certificate();
  const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->recommended_w0()));
  const double f0 = obj->value(w0.data());
  StopRule stop;
  stop.max_iters = 100000;
  stop.loss_tol = 1e-3;
  const Trajectory adaptive = run_gd(*obj, w0, StepPolicy::adaptive(cert.H0, cert.H1, 1.0, cert.f_star), stop);
  const double eta = max_safe_constant_step(f0, cert.H1);
  const Trajectory constant = run_gd(*obj, w0, StepPolicy::constant(eta), stop);
  const Trajectory below = run_gd(*obj, w0, StepPolicy::constant(0.999 * eta), stop);
  auto count = [](const Trajectory& t) {
    return t.stop_reason == StopReason::loss_tol ? double(t.iterations()) : kInf;
  };
  const double ka = count(adaptive), kc = count(constant);
  note(out, std::isfinite(ka) && kc >= 2.0 * ka,
       fmt::format("gap0 = {}; adaptive {} iterations, constant at the maximal safe step {} ({}), ratio {}",
                   g(f0 - *obj->f_star()), ka, kc, stop_reason_name(constant.stop_reason), g(kc / ka)));
  out.detail += fmt::format("; info: constant at 0.999 x the maximal step takes {} iterations", count(below));
  return out;
}

Outcome stochastic_contraction() {
  Outcome out;
  const ProblemInstance inst = build_problem({"interpolating_least_squares", Json{{"n", 10}, {"d", 20}}});
  const StepPolicy policy = build_policy(Json{{"kind", "adaptive"}}, &inst);
  StopRule stop;
  stop.max_iters = 2000;
  Index bad_seeds = 0;
  double worst_rise = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Trajectory t = run_sgd(*inst.obj, inst.w0, policy, 2, seed, stop);
    attach_distance_tracking(t, *inst.obj);
    bool ok = t.iterations() == 2000;
    for (std::size_t k = 1; k < t.records.size(); ++k) {
      const auto& a = t.records[k - 1].dist_to_solution;
      const auto& b = t.records[k].dist_to_solution;
      if (!a || !b) {
        ok = false;
        continue;
      }
      worst_rise = std::max(worst_rise, *b - *a);
      if (*b > *a + 1e-12) ok = false;
    }
    if (!ok) ++bad_seeds;
  }
  note(out, bad_seeds == 0,
       fmt::format("10 seeds x 2000 steps, batch 2: {} seeds with an increase, largest step-to-step change {}",
                   bad_seeds, g(worst_rise)));
  return out;
}

Outcome experiment_rows(const std::string& name) {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / fmt::format("warmup_lab_acceptance_{}", std::random_device{}());
  const ExperimentResult res = run_experiment(name, root);
  for (const ExperimentRow& r : res.rows) {
    if (r.relation == "info") {
      note(out, true, fmt::format("{} = {}", r.quantity, g(r.measured)));
    } else {
      note(out, r.ok,
           fmt::format("{}: {} {} {}", r.quantity, g(r.measured), r.relation, r.predicted ? g(*r.predicted) : "-"));
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return out;
}

Outcome oracle_equivalence() {
  Outcome out;
  {
    const ProblemInstance inst = build_problem(
        {"two_layer_mse", Json{{"d", 4}, {"hidden", 8}, {"m", 32}, {"activation", "tanh"}}});
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec w = 1.5 * rng.normal_vec(inst.obj->dim());
      const double dense = dense_spectral_norm(*inst.obj, w);
      const double power = power_iteration_spectral_norm(*inst.obj, w, 1e-10, 20000, std::uint64_t(i)).value;
      worst = std::max(worst, std::abs(power - dense) / dense);
    }
    note(out, worst <= 1e-3,
         fmt::format("power vs dense on 100 points (dim {}): worst relative error {}", inst.obj->dim(), g(worst)));
  }
  {
    double worst = 0.0;
    std::string worst_name;
    Index checked = 0;
    auto check = [&](const std::string& label, const Objective& obj, const Vec& w) {
      const Vec fd = finite_diff_gradient(obj, w, default_fd_step(w));
      const double err = relative_error(fd, obj.gradient(w));
      ++checked;
      if (err > worst) {
        worst = err;
        worst_name = label;
      }
    };
    for (const auto& info : problem_registry()) {
      if (info.name == "counterexample") continue;
      const ProblemInstance inst = build_problem({info.name, Json::object()});
      check(info.name, *inst.obj, inst.w0.data());
      for (const Vec& w : sample_points(*inst.sampler, 5, 3)) check(info.name, *inst.obj, w);
    }
    for (CounterexampleKind kind : {CounterexampleKind::sum_sin_square, CounterexampleKind::affine_cos_exp,
                                    CounterexampleKind::two_layer_l2, CounterexampleKind::balanced_two_layer}) {
      auto obj = make_counterexample(kind);
      Rng rng(5);
      for (int i = 0; i < 5; ++i) check(counterexample_name(kind), *obj, rng.normal_vec(obj->dim()));
    }
    note(out, worst <= 1e-5,
         fmt::format("gradients vs finite differences at {} points across the zoo: worst relative error {} ({})",
                     checked, g(worst), worst_name));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome out;
  const fs::path a = fs::temp_directory_path() / fmt::format("warmup_lab_det_a_{}", std::random_device{}());
  const fs::path b = fs::temp_directory_path() / fmt::format("warmup_lab_det_b_{}", std::random_device{}());
  const std::vector<std::string> configs = {
      R"(seed = 17
optimizer = "sgd"
batch_size = 3
[problem]
name = "interpolating_least_squares"
n = 10
d = 20
[policy]
kind = "adaptive"
[stop]
max_iters = 500
)",
      R"(seed = 4
[problem]
name = "two_layer_ce"
[policy]
kind = "clipped"
C = 4.0
[policy.base]
kind = "wsd"
peak = 0.05
decay_iters = 50
total_iters = 200
[stop]
max_iters = 199
)",
  };
  for (const std::string& text : configs) {
    const ExperimentConfig cfg = parse_config(text, "determinism.toml");
    const RunRecord first = execute_run(cfg, a);
    const RunRecord second = execute_run(cfg, b);
    const std::string x = slurp(first.dir / "trajectory.csv");
    const std::string y = slurp(second.dir / "trajectory.csv");
    note(out, !x.empty() && x == y && first.id == second.id,
         fmt::format("{} ({}): {} bytes, identical = {}", cfg.problem.name, first.id, x.size(), x == y));
  }
  std::error_code ec;
  fs::remove_all(a, ec);
  fs::remove_all(b, ec);
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "certificate soundness", 300, certificate_soundness},
      {2, "gradient-bound lemma", 60, gradient_bound},
      {3, "descent along adaptive GD", 60, adaptive_descent},
      {4, "lower-bound threshold", 10, lower_bound_threshold},
      {5, "runway counting", 10, runway_counting},
      {6, "upper-bound domination", 30, upper_bound_domination},
      {7, "warm-up advantage", 30, warmup_advantage},
      {8, "stochastic per-step contraction", 30, stochastic_contraction},
      {9, "closure and counterexamples", 60, [] { return experiment_rows("closure-demo"); }},
      {10, "smoothness-vs-loss fit", 120, [] { return experiment_rows("smoothness-vs-loss"); }},
      {11, "oracle equivalence", 120, oracle_equivalence},
      {12, "determinism", 10, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome res;
    try {
      res = c.run();
    } catch (const std::exception& e) {
      res = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) note(res, false, fmt::format("took {:.1f} s, budget {:.0f} s", secs, c.budget_seconds));
    if (!res.ok) ++failed;
    std::cout << fmt::format("criterion {}: {} {} -- {} ({:.2f} s)\n", c.number, res.ok ? "PASS" : "FAIL", c.title,
                             res.detail, secs)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - std::size_t(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
