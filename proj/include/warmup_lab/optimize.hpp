#pragma once

#include "warmup_lab/core.hpp"
#include "warmup_lab/schedules.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wl {

enum class StopReason { max_iters, grad_tol, loss_tol, diverged, step_error };

const char* stop_reason_name(StopReason r);

struct StopRule {
  std::uint64_t max_iters = 1000;
  std::optional<double> grad_tol;  // stop once ||grad f(w_k)|| <= grad_tol
  std::optional<double> loss_tol;  // stop once f(w_k) - f* <= loss_tol
  double divergence_guard = 1e12;  // on |f| and ||w||
};

struct Snapshot {
  std::uint64_t iter = 0;
  Vec w;
};

// records[k] describes the iterate w_k; its step_size is the step taken from
// w_k (0 on the terminal record, where no step is taken).
struct Trajectory {
  std::vector<EvalRecord> records;
  std::vector<Snapshot> snapshots;
  std::vector<double> batch_losses;  // SGD only: f_{S_k}(w_k) per step
  std::vector<std::vector<Index>> batches;  // SGD only: S_k per step
  std::vector<Shape> shapes;
  Vec final_w;
  std::string policy_id;
  std::string problem_id;
  std::uint64_t seed = 0;
  std::string rng_algorithm;
  StopReason stop_reason = StopReason::max_iters;
  std::string message;  // detail for step_error / diverged

  // Number of update steps performed (index of the terminal record).
  std::uint64_t iterations() const { return records.empty() ? 0 : records.back().iter; }
  double final_f() const { return records.empty() ? kNaN : records.back().f; }
};

// Snapshots keep every iterate when dim <= 100, otherwise every 10th plus the last.
Trajectory run_gd(const Objective& obj, const ParamPoint& w0, const StepPolicy& policy, const StopRule& stop);
Trajectory run_sgd(const Objective& obj, const ParamPoint& w0, const StepPolicy& policy, Index batch_size,
                   std::uint64_t seed, const StopRule& stop);

// Fills dist_to_solution on every record that has a snapshot.
void attach_distance_tracking(Trajectory& traj, const Objective& obj);

// CSV with columns iter,f,grad_norm,step_size,dist_to_solution.
std::string trajectory_csv(const Trajectory& traj);
// JSON summary: stop_reason, iters, final_f, provenance.
std::string trajectory_summary_json(const Trajectory& traj);

}  // namespace wl
