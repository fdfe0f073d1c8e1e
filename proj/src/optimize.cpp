#include "warmup_lab/optimize.hpp"

#include "warmup_lab/rng.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>

namespace wl {

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::grad_tol: return "grad_tol";
    case StopReason::loss_tol: return "loss_tol";
    case StopReason::diverged: return "diverged";
    case StopReason::step_error: return "step_error";
  }
  return "unknown";
}

namespace {

// Evaluation used by the shared driver loop: returns the loss the policy sees
// and the gradient to step along.
struct StepEval {
  double policy_loss = 0.0;
  std::optional<double> batch_f_star;
  Vec direction;
};

template <typename StepFn>
Trajectory run_loop(const Objective& obj, const ParamPoint& w0, const StepPolicy& policy, const StopRule& stop,
                    bool sgd, StepFn&& step_eval) {
  require(stop.max_iters >= 1, ErrorCode::precondition, "max_iters must be at least 1");
  require(w0.size() == obj.dim(), ErrorCode::precondition,
          fmt::format("initial point has {} entries but '{}' has dimension {}", w0.size(), obj.name(), obj.dim()));
  std::optional<double> fs;
  if (stop.loss_tol) {
    fs = obj.f_star();
    require(fs.has_value(), ErrorCode::precondition,
            fmt::format("loss_tol needs a known optimum, but '{}' has none", obj.name()));
  }

  Trajectory t;
  t.policy_id = policy.id();
  t.problem_id = obj.name();
  t.rng_algorithm = Rng::kAlgorithm;
  t.shapes = w0.shapes();
  const bool keep_all = obj.dim() <= 100;

  Vec w = w0.data();
  for (std::uint64_t k = 0;; ++k) {
    EvalRecord rec;
    rec.iter = k;
    rec.f = obj.value(w);
    Vec g = obj.gradient(w);
    rec.grad_norm = g.norm();
    const bool finite = std::isfinite(rec.f) && g.allFinite() && w.allFinite();
    const bool snap = keep_all || k % 10 == 0;

    auto finish = [&](StopReason reason, std::string message = {}) {
      rec.step_size = 0.0;
      t.records.push_back(rec);
      t.snapshots.push_back({k, w});  // the terminal iterate is always kept
      t.final_w = w;
      t.stop_reason = reason;
      t.message = std::move(message);
      return t;
    };

    if (!finite || std::abs(rec.f) > stop.divergence_guard || w.norm() > stop.divergence_guard)
      return finish(StopReason::diverged, finite ? "divergence guard exceeded" : "non-finite loss or gradient");
    if (stop.grad_tol && rec.grad_norm <= *stop.grad_tol) return finish(StopReason::grad_tol);
    if (stop.loss_tol && rec.f - *fs <= *stop.loss_tol) return finish(StopReason::loss_tol);
    if (k >= stop.max_iters) return finish(StopReason::max_iters);

    StepEval ev = step_eval(w, rec.f, std::move(g));
    if (!std::isfinite(ev.policy_loss) || !ev.direction.allFinite())
      return finish(StopReason::diverged, "non-finite mini-batch loss or gradient");
    double eta;
    try {
      eta = step_size(policy, StepState{k, ev.policy_loss, ev.batch_f_star});
    } catch (const Error& e) {
      return finish(StopReason::step_error, e.what());
    }
    rec.step_size = eta;
    t.records.push_back(rec);
    if (sgd) t.batch_losses.push_back(ev.policy_loss);
    if (snap) t.snapshots.push_back({k, w});
    w -= eta * ev.direction;
  }
}

}  // namespace

Trajectory run_gd(const Objective& obj, const ParamPoint& w0, const StepPolicy& policy, const StopRule& stop) {
  return run_loop(obj, w0, policy, stop, false, [](const Vec&, double f, Vec g) {
    return StepEval{f, std::nullopt, std::move(g)};
  });
}

Trajectory run_sgd(const Objective& obj, const ParamPoint& w0, const StepPolicy& policy, Index batch_size,
                   std::uint64_t seed, const StopRule& stop) {
  const Index n = obj.n_components();
  require(n > 0, ErrorCode::capability, fmt::format("objective '{}' has no finite-sum structure", obj.name()));
  require(batch_size >= 1 && batch_size <= n, ErrorCode::precondition,
          fmt::format("batch size {} must lie in [1, {}]", batch_size, n));
  Rng rng(seed);
  const std::optional<double> comp_star = obj.component_f_star();
  std::vector<std::vector<Index>> batches;
  Trajectory t = run_loop(obj, w0, policy, stop, true, [&](const Vec& w, double f, Vec g) {
    batches.push_back(rng.sample_without_replacement(n, batch_size));
    const auto& batch = batches.back();
    // The full batch uses the full oracle so that it reproduces GD exactly.
    if (batch_size == n) return StepEval{f, std::nullopt, std::move(g)};
    return StepEval{obj.batch_value(batch, w), comp_star, obj.batch_gradient(batch, w)};
  });
  // A step that ended in step_error sampled a batch but recorded no step.
  batches.resize(t.batch_losses.size());
  t.batches = std::move(batches);
  t.seed = seed;
  return t;
}

void attach_distance_tracking(Trajectory& traj, const Objective& obj) {
  require(obj.has_projector(), ErrorCode::capability,
          fmt::format("objective '{}' has no solution-set projector", obj.name()));
  require(!traj.snapshots.empty(), ErrorCode::precondition, "trajectory retains no snapshots");
  for (const auto& s : traj.snapshots) {
    require(s.iter < traj.records.size(), ErrorCode::inconsistency, "snapshot beyond recorded iterations");
    traj.records[s.iter].dist_to_solution = (s.w - obj.project_solution(s.w)).norm();
  }
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "iter,f,grad_norm,step_size,dist_to_solution\n";
  for (const auto& r : traj.records) {
    out += fmt::format("{},{},{},{},", r.iter, r.f, r.grad_norm, r.step_size);
    if (r.dist_to_solution) out += fmt::format("{}", *r.dist_to_solution);
    out += '\n';
  }
  return out;
}

std::string trajectory_summary_json(const Trajectory& traj) {
  nlohmann::json j;
  j["stop_reason"] = stop_reason_name(traj.stop_reason);
  j["iters"] = traj.iterations();
  j["final_f"] = std::isfinite(traj.final_f()) ? nlohmann::json(traj.final_f()) : nlohmann::json(nullptr);
  if (!traj.message.empty()) j["message"] = traj.message;
  j["provenance"] = {{"policy", traj.policy_id},
                     {"problem", traj.problem_id},
                     {"seed", traj.seed},
                     {"rng", traj.rng_algorithm}};
  return j.dump(2);
}

}  // namespace wl
