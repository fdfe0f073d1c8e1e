#include "warmup_lab/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace wl {

namespace fs = std::filesystem;

bool ExperimentResult::ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const ExperimentRow& r) { return r.ok; });
}

namespace {

std::string cell(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6g}", v);
}

void render(ExperimentResult& res, const std::string& intro) {
  std::string md = fmt::format("# {}\n\n{}\n\n", res.name, intro);
  md += "| quantity | measured | predicted | relation | status | note |\n|---|---|---|---|---|---|\n";
  for (const ExperimentRow& r : res.rows)
    md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", r.quantity, cell(r.measured),
                      r.predicted ? cell(*r.predicted) : "-", r.relation,
                      r.relation == "info" ? "info" : (r.ok ? "ok" : "FAIL"), r.note);
  res.markdown = md;
}

ExperimentRow compare(std::string quantity, double measured, double predicted, const std::string& relation,
                      std::string note = "") {
  ExperimentRow r{std::move(quantity), measured, predicted, relation, true, std::move(note)};
  if (relation == ">=") r.ok = measured >= predicted;
  else if (relation == "<=") r.ok = measured <= predicted;
  else if (relation == ">") r.ok = measured > predicted;
  else if (relation == "<") r.ok = measured < predicted;
  else if (relation == "==") r.ok = measured == predicted;
  return r;
}

ExperimentRow info(std::string quantity, double measured, std::string note = "") {
  return {std::move(quantity), measured, std::nullopt, "info", true, std::move(note)};
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

// Iterations until the run met its stop rule; +inf if it never did.
double iterations_to_target(const Trajectory& t) {
  return (t.stop_reason == StopReason::grad_tol || t.stop_reason == StopReason::loss_tol) ? double(t.iterations())
                                                                                          : kInf;
}

// ---------------------------------------------------------------------------

ExperimentResult smoothness_vs_loss(const fs::path& dir) {
  ExperimentResult res;
  res.name = "smoothness-vs-loss";
  ProblemSpec spec{"two_layer_mse", Json{{"d", 4}, {"c", 1}, {"m", 64}, {"hidden", 16}, {"lambda1", 1e-3},
                                         {"lambda2", 1e-3}, {"init_scale", 2.0}, {"data_seed", 0}}};
  const ProblemInstance inst = build_problem(spec);
  StopRule stop;
  stop.max_iters = 2000;
  // Batches span the whole data set: with m = 64 samples and a 1e-4 step, the
  // difference of two small-batch gradients is dominated by sampling noise
  // rather than curvature (reported below as an info row).
  const Index m = inst.obj->n_components();
  const Trajectory traj = run_sgd(*inst.obj, inst.w0, StepPolicy::constant(1e-4), m, 0, stop);
  const SmoothnessTrace trace = local_smoothness_trace(*inst.obj, traj, TraceMode::stochastic);
  write_text(dir / "smoothness_trace.csv", smoothness_trace_csv(trace));
  const H0H1Fit ols = fit_h0h1(trace.samples, FitMode::ols);
  const H0H1Fit env = fit_h0h1(trace.samples, FitMode::envelope);
  res.rows.push_back(info("samples", double(trace.samples.size()), "secant smoothness along 2000 SGD steps, batch = m, eta = 1e-4"));
  res.rows.push_back(compare("OLS slope H1_hat", ols.H1_hat, 0.0, ">", "smoothness grows with the loss"));
  res.rows.push_back(compare("OLS R^2", ols.r_squared, 0.5, ">="));
  res.rows.push_back(compare("envelope max violation", env.max_violation, 0.0, "<=", "envelope dominates every sample"));
  res.rows.push_back(info("envelope H0_hat", env.H0_hat));
  res.rows.push_back(info("envelope H1_hat", env.H1_hat));
  if (inst.cert) {
    res.rows.push_back(compare("envelope H1_hat vs certified H1", env.H1_hat, inst.cert->H1, "<=",
                               "certified constants are worst-case over all weights"));
  }
  const Trajectory small = run_sgd(*inst.obj, inst.w0, StepPolicy::constant(1e-4), 8, 0, stop);
  const H0H1Fit small_fit = fit_h0h1(local_smoothness_trace(*inst.obj, small, TraceMode::stochastic).samples, FitMode::ols);
  res.rows.push_back(info("OLS R^2 with batches of 8", small_fit.r_squared,
                          "batch-to-batch gradient noise over a 1e-4 step swamps the curvature signal"));
  render(res, "Two-layer tanh network with squared loss and L2 regularisation (d = 4, hidden = 16, m = 64), "
              "SGD with constant step 1e-4. Local smoothness is ||g_{S_k}(w_{k+1}) - g_{S_{k-1}}(w_k)|| / "
              "||w_{k+1} - w_k|| against the batch loss.");
  return res;
}

ExperimentResult warmup_vs_constant(const fs::path& dir) {
  ExperimentResult res;
  res.name = "warmup-vs-constant";
  const double H1 = 1.0, M = std::exp(5.0), eps = 1e-3;
  auto obj = make_exp_quadratic(H1, M);
  const SmoothnessCertificate cert = *obj->certificate();
  const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->recommended_w0()));
  const double f0 = obj->value(w0.data());
  StopRule stop;
  stop.max_iters = 100000;
  stop.loss_tol = eps;

  const Trajectory adaptive = run_gd(*obj, w0, StepPolicy::adaptive(cert.H0, cert.H1, 1.0, cert.f_star), stop);
  const double eta_max = max_safe_constant_step(f0, H1);
  const Trajectory at_threshold = run_gd(*obj, w0, StepPolicy::constant(eta_max), stop);
  const Trajectory below = run_gd(*obj, w0, StepPolicy::constant(0.999 * eta_max), stop);
  const Trajectory half = run_gd(*obj, w0, StepPolicy::constant(0.5 * eta_max), stop);
  write_text(dir / "adaptive.csv", trajectory_csv(adaptive));
  write_text(dir / "constant_threshold.csv", trajectory_csv(at_threshold));
  write_text(dir / "constant_0.999.csv", trajectory_csv(below));

  const double k_adapt = iterations_to_target(adaptive);
  const double k_thr = iterations_to_target(at_threshold);
  const double k_below = iterations_to_target(below);
  const double k_half = iterations_to_target(half);
  BoundInputs in;
  in.H0 = cert.H0;
  in.H1 = cert.H1;
  in.theta = 1.0;
  in.eps = eps;
  in.dist0 = std::abs(w0.data()[0]);
  const double upper = predict_bound(BoundKind::upper_aiming, in).iters;

  res.rows.push_back(compare("adaptive iterations to gap <= 1e-3", k_adapt, upper, "<=", "bound: upper_aiming"));
  res.rows.push_back(info("constant step at the safe threshold", eta_max, "2 (log f(w0) + 1) / (f(w0) H1)"));
  res.rows.push_back(info("constant (threshold) iterations", k_thr,
                          fmt::format("stop: {}", stop_reason_name(at_threshold.stop_reason))));
  res.rows.push_back(compare("speed-up vs constant at threshold", k_thr / k_adapt, 2.0, ">=",
                             "the threshold step bounces between +-w0 and never settles"));
  res.rows.push_back(info("constant (0.999 x threshold) iterations", k_below,
                          fmt::format("speed-up {:.3g}; just below the threshold the bouncing converges quickly",
                                      k_below / k_adapt)));
  res.rows.push_back(info("constant (0.5 x threshold) iterations", k_half,
                          fmt::format("speed-up {:.3g}; from w0 = log M + 1 this step lands on w = 0 exactly", k_half / k_adapt)));
  render(res, fmt::format("Exponential-quadratic construction with H1 = 1 and f(w0) = e^5 (gap {:.6g}), "
                          "target gap 1e-3. Adaptive step 1 / (10 H0 + 20 H1 f(w)) against constant steps "
                          "at and below the largest step for which GD does not diverge.",
                          f0 - 0.5));
  return res;
}

ExperimentResult lower_bound_demo(const fs::path& dir) {
  ExperimentResult res;
  res.name = "lower-bound-demo";
  const double H0 = 1.0, H1 = 4.0, eps = 0.05;

  // Gradient target on the runway with delta = 2 eps^2.
  {
    auto obj = make_runway(H0, H1, 2.0 * eps * eps);
    const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->X2()));
    const double f0 = obj->value(w0.data());
    StopRule stop;
    stop.max_iters = 100000;
    stop.grad_tol = eps;
    const Trajectory t = run_gd(*obj, w0, StepPolicy::constant(max_safe_constant_step(f0, H1)), stop);
    write_text(dir / "runway_gradient.csv", trajectory_csv(t));
    BoundInputs in;
    in.H1 = H1;
    in.delta0 = f0;
    in.eps = eps;
    res.rows.push_back(compare("runway: iterations to ||grad|| <= 0.05", iterations_to_target(t),
                               predict_bound(BoundKind::lower_nonconvex, in).iters, ">=", "bound: lower_nonconvex"));
  }
  // Function-value target on the convex runway with delta = eps.
  {
    auto obj = make_runway(H0, H1, eps);
    const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->X2()));
    const double f0 = obj->value(w0.data());
    StopRule stop;
    stop.max_iters = 100000;
    stop.loss_tol = eps;
    const Trajectory t = run_gd(*obj, w0, StepPolicy::constant(max_safe_constant_step(f0, H1)), stop);
    BoundInputs in;
    in.H1 = H1;
    in.delta0 = f0;
    in.eps = eps;
    res.rows.push_back(compare("convex runway: iterations to gap <= 0.05", iterations_to_target(t),
                               predict_bound(BoundKind::lower_convex, in).iters, ">=", "bound: lower_convex"));
  }
  // PL construction started at the connection point (f(w0) = C0).
  {
    const double C0 = 10.0, mu = 0.5, H1pl = 1.0, eps_pl = 1e-3;
    auto obj = make_pl_lower_bound(C0, mu, H1pl);
    const ParamPoint w0 = ParamPoint::flat(Vec::Constant(1, obj->w_c()));
    const double f0 = obj->value(w0.data());
    const double eta = max_safe_constant_step(f0, H1pl);
    StopRule stop;
    stop.max_iters = 100000;
    stop.loss_tol = eps_pl;
    const Trajectory t = run_gd(*obj, w0, StepPolicy::constant(eta), stop);
    BoundInputs in;
    in.H1 = H1pl;
    in.delta0 = f0;
    in.eps = eps_pl;
    in.mu = mu;
    const double predicted = predict_bound(BoundKind::lower_pl, in).iters;
    const double exact = std::ceil(std::log(f0 / eps_pl) / (-2.0 * std::log(1.0 - eta * mu)));
    res.rows.push_back(compare("PL construction: iterations to gap <= 1e-3", iterations_to_target(t), predicted, ">=",
                               fmt::format("bound: lower_pl; the contraction (1 - eta mu)^2 gives exactly {} "
                                           "iterations, below the stated expression whenever eta mu is not small",
                                           exact)));
  }
  render(res, "Constant-step GD at the largest step that survives the exponential-quadratic construction, "
              "run on the slowly-growing constructions. Measured counts are compared with the predicted lower bounds.");
  return res;
}

ExperimentResult closure_demo(const fs::path&) {
  ExperimentResult res;
  res.name = "closure-demo";
  const Index n_points = 500;

  // Sum rule: exponential-quadratic + (w^2 + 3 sin^2 w).
  {
    auto f = make_exp_quadratic(1.0, std::exp(3.0));
    auto g = make_pl_sin_quadratic();
    const double h_star = 0.5;  // both minimised at 0
    const SmoothnessCertificate cert = sum_params(*f->certificate(), *g->certificate(), h_star);
    const SumObjective sum(f, g);
    const CertificateReport rep =
        verify_certificate(sum, cert, *box_sampler(1, -6.0, 6.0), n_points, 1e-6 * (1.0 + cert.H0), 1);
    res.rows.push_back(compare("sum certificate violations", double(rep.violations.size()), 0.0, "==",
                               fmt::format("(H0, H1) = ({}, {}), worst ratio {:.3g}", cert.H0, cert.H1,
                                           rep.worst_ratio)));
  }
  // Affine rule: 0.5 ||y||^2 composed with a random 3 x 2 matrix.
  {
    Rng rng(3);
    const Mat A = rng.normal_mat(3, 2);
    auto g = make_quadratic(Mat::Identity(3, 3), Vec::Zero(3), 0.0);
    const SmoothnessCertificate cert = affine_params(*g->certificate(), A, 0.0);
    const AffineComposition comp(g, A);
    const CertificateReport rep =
        verify_certificate(comp, cert, *gaussian_sampler(2, 3.0), n_points, 1e-6 * (1.0 + cert.H0), 2);
    res.rows.push_back(compare("affine certificate violations", double(rep.violations.size()), 0.0, "==",
                               fmt::format("H0 = ||A||^2 = {:.6g}", cert.H0)));
  }
  // (L0, L1) violation along the witness families.
  for (CounterexampleKind kind : {CounterexampleKind::sum_sin_square, CounterexampleKind::affine_cos_exp}) {
    bool increasing = true;
    double prev = 0.0, first = 0.0;
    for (int m = 1; m <= 50; ++m) {
      const double r = counterexample_violation_ratio(kind, m, 1.0, 1.0);
      if (m == 1) first = r;
      else if (!(r > prev)) increasing = false;
      prev = r;
    }
    res.rows.push_back(compare(fmt::format("{}: ratio strictly increasing for m = 1..50", counterexample_name(kind)),
                               increasing ? 1.0 : 0.0, 1.0, "==",
                               fmt::format("ratio at m = 1: {:.3g}, at m = 50: {:.3g} (L0 = L1 = 1)", first, prev)));
  }
  // Regularised two-layer witness: huge curvature at a near-stationary point.
  {
    auto obj = make_two_layer_l2_counterexample(1e-12, 1e-3);
    const Vec w = obj->witness(1000);
    res.rows.push_back(compare("two_layer_l2 witness: ||hess||", dense_spectral_norm(*obj, w), 1e3, ">="));
    res.rows.push_back(compare("two_layer_l2 witness: ||grad||", obj->gradient(w).norm(), 1e-8, "<="));
  }
  {
    auto obj = make_counterexample(CounterexampleKind::balanced_two_layer);
    const Vec w = obj->witness(40);
    res.rows.push_back(compare("balanced_two_layer witness: ||hess||", dense_spectral_norm(*obj, w), 1e3, ">=",
                               "finite-difference Hessian"));
    res.rows.push_back(compare("balanced_two_layer witness: ||grad||", obj->gradient(w).norm(), 1e-8, "<="));
  }
  render(res, "Summation and affine-composition rules checked by sampling, and growth of the (L0, L1) violation "
              "on the counterexample families.");
  return res;
}

ExperimentResult practical_warmup(const fs::path& dir) {
  ExperimentResult res;
  res.name = "practical-warmup";
  ExperimentConfig cfg;
  cfg.problem = {"two_layer_ce", Json{{"d", 4}, {"m", 64}, {"hidden", 16}, {"init_scale", 2.0}}};
  cfg.policy = Json{{"kind", "clipped"},
                    {"C", 4.0},
                    {"base", Json{{"kind", "wsd"}, {"peak", 0.05}, {"decay_iters", 200}, {"total_iters", 1000}}}};
  cfg.stop.max_iters = 999;
  cfg.trace = "none";
  cfg.sweep = {{"policy.C", {3.5, 4.0, 4.5}}};
  const std::vector<ExperimentConfig> cfgs = expand_sweep(cfg);
  const fs::path runs = dir / "runs";
  const std::vector<RunRecord> recs = execute_runs(cfgs, runs, 0);

  std::vector<std::string> ids;
  std::vector<double> warm_lengths;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ids.push_back(recs[i].id);
    const double C = cfgs[i].policy.at("C").get<double>();
    // Warm-up length: iterations spent with the loss above C (clipping active).
    const ProblemInstance inst = build_problem(cfgs[i].problem);
    const Trajectory t = run_gd(*inst.obj, inst.w0, build_policy(cfgs[i].policy, &inst), cfgs[i].stop);
    std::uint64_t warm = 0;
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
      if (t.records[k].f <= C) break;
      warm = t.records[k].iter + 1;
      if (k > 0 && t.records[k].step_size < t.records[k - 1].step_size && t.records[k].f < t.records[k - 1].f)
        monotone = false;
    }
    res.rows.push_back(info(fmt::format("C = {}: warm-up iterations", C), double(warm),
                            fmt::format("run {}", recs[i].id)));
    res.rows.push_back(compare(fmt::format("C = {}: step non-decreasing during warm-up", C), monotone ? 1.0 : 0.0,
                               1.0, "==", "the effective step grows as the loss falls"));
    res.rows.push_back(info(fmt::format("C = {}: final loss", C), t.final_f()));
    warm_lengths.push_back(double(warm));
  }
  bool shorter = true;
  for (std::size_t i = 1; i < warm_lengths.size(); ++i) shorter = shorter && warm_lengths[i] < warm_lengths[i - 1];
  res.rows.push_back(compare("warm-up length strictly decreasing in C", shorter ? 1.0 : 0.0, 1.0, "==",
                             "larger C clips less, so the warm-up ends sooner"));
  const Report rep = emit_report(ids, runs);
  write_text(dir / "steps.csv", rep.csv);
  render(res, "Clipped warm-up base_k / max(1, f(w_k) / C) on a WSD base (peak 0.05, 200 decay steps), "
              "two-layer tanh network with cross-entropy loss, C swept over {3.5, 4, 4.5}.");
  res.markdown += "\n" + rep.markdown;
  return res;
}

using Runner = ExperimentResult (*)(const fs::path&);

const std::vector<std::pair<std::string, Runner>>& experiments() {
  static const std::vector<std::pair<std::string, Runner>> table = {
      {"smoothness-vs-loss", smoothness_vs_loss}, {"warmup-vs-constant", warmup_vs_constant},
      {"lower-bound-demo", lower_bound_demo},     {"closure-demo", closure_demo},
      {"practical-warmup", practical_warmup},
  };
  return table;
}

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& e : experiments()) out.push_back(e.first);
  return out;
}

ExperimentResult run_experiment(const std::string& name, const fs::path& out_root) {
  for (const auto& [key, runner] : experiments()) {
    if (key != name) continue;
    const fs::path dir = out_root / "experiments" / name;
    fs::create_directories(dir);
    ExperimentResult res = runner(dir);
    write_text(dir / "report.md", res.markdown);
    return res;
  }
  std::string known;
  for (const auto& e : experiments()) known += "\n  " + e.first;
  fail(ErrorCode::input, fmt::format("unknown experiment '{}'; available:{}", name, known));
}

}  // namespace wl
