#pragma once

#include "warmup_lab/core.hpp"
#include "warmup_lab/optimize.hpp"
#include "warmup_lab/problems.hpp"
#include "warmup_lab/schedules.hpp"
#include "warmup_lab/smoothness.hpp"
#include "warmup_lab/theory.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wl {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr std::size_t kDefaultSweepCap = 10000;

// ---------------------------------------------------------------------------
// Problem registry

struct ProblemSpec {
  std::string name;
  Json params = Json::object();  // scalars, strings, booleans and numeric arrays
};

struct ProblemInstance {
  ObjectivePtr obj;
  ParamPoint w0;
  std::optional<SmoothnessCertificate> cert;  // from the problem or its calculator
  SamplerPtr sampler;                         // region sampler for certificate checks
  std::optional<ConditionSpec> condition;     // structural condition the problem satisfies
};

struct ProblemInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> keys;  // accepted parameter names
};

const std::vector<ProblemInfo>& problem_registry();
// Throws ErrorCode::config for unknown problems or parameters.
void validate_problem(const ProblemSpec& spec);
ProblemInstance build_problem(const ProblemSpec& spec);

// Policy table: kind = constant | adaptive | clipped | linear_warmup | wsd | cosine.
// adaptive without H0/H1 takes them from the problem certificate; clipped
// wraps the policy table under `base`; constant accepts `safe_factor` as a
// multiple of max_safe_constant_step(f(w0), H1).
StepPolicy build_policy(const Json& spec, const ProblemInstance* problem = nullptr);
void validate_policy(const Json& spec);

// ---------------------------------------------------------------------------
// Configuration

struct SweepAxis {
  std::string path;  // "policy.<key>", "problem.<key>", "stop.<key>" or "seed"
  std::vector<double> values;
};

struct ExperimentConfig {
  ProblemSpec problem;
  Json policy = Json::object();
  StopRule stop;
  std::string optimizer = "gd";  // gd | sgd
  Index batch_size = 1;
  std::string trace = "auto";    // smoothness trace: auto | deterministic | stochastic | none
  std::uint64_t seed = 0;
  std::string outputs = "runs";
  std::vector<SweepAxis> sweep;
  std::size_t sweep_cap = kDefaultSweepCap;
};

// Parse and validate a TOML document. Errors carry "source:line:col: message".
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical TOML form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& cfg);
Json config_to_json(const ExperimentConfig& cfg);
// Cross product of the sweep axes; each result has an empty sweep.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);
// Hash of (config snapshot, seed, tool version), 16 hex digits.
std::string run_id(const ExperimentConfig& cfg);
// WARMUP_LAB_OUT when set, else the configured outputs directory.
std::filesystem::path output_root(const std::string& configured);

// ---------------------------------------------------------------------------
// Runs

struct RunRecord {
  std::string id;
  std::filesystem::path dir;
  Json config;
  Json summary;
  std::vector<std::string> artifacts;
  double wall_seconds = 0.0;
};

// Runs one (sweep-free) config and writes trajectory.csv, summary.json and
// smoothness_trace.csv under root/<run-id>/.
RunRecord execute_run(const ExperimentConfig& cfg, const std::filesystem::path& root);
// Runs all configs with at most `jobs` worker threads (0 = hardware threads).
std::vector<RunRecord> execute_runs(const std::vector<ExperimentConfig>& cfgs, const std::filesystem::path& root,
                                    unsigned jobs);
std::string smoothness_trace_csv(const SmoothnessTrace& trace);

// ---------------------------------------------------------------------------
// Reports

struct Report {
  std::string markdown;
  std::string csv;
  std::vector<std::string> warnings;  // missing runs, listed and skipped
};

// Reads summary.json and trajectory.csv of each run; never writes to run directories.
Report emit_report(const std::vector<std::string>& run_ids, const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Canned experiments

struct ExperimentRow {
  std::string quantity;
  double measured = 0.0;
  std::optional<double> predicted;
  std::string relation;  // e.g. ">=", "<=", "=="
  bool ok = true;
  std::string note;
};

struct ExperimentResult {
  std::string name;
  std::vector<ExperimentRow> rows;
  std::string markdown;
  bool ok() const;
};

std::vector<std::string> experiment_names();
// Throws ErrorCode::input listing the available experiments for unknown names.
ExperimentResult run_experiment(const std::string& name, const std::filesystem::path& out_root);

// ---------------------------------------------------------------------------
// Problem-file helpers behind the constants / verify / lemmas subcommands

// Problem file: a TOML document with a [problem] table (other tables ignored).
ProblemSpec load_problem_spec(std::string_view text, const std::string& source = "<problem>");
Json certificate_json(const SmoothnessCertificate& cert);
Json constants_json(const ProblemSpec& spec);
// Verifies the problem certificate, or the override (H0, H1[, f*]) when given.
CertificateReport verify_problem(const ProblemSpec& spec, const std::optional<SmoothnessCertificate>& override_cert,
                                 Index n_points, std::uint64_t seed);
// Gradient-bound, descent-step, trajectory-descent and condition checks as CSV
// with columns check,kind,index,lhs,rhs,excess. kind is violation,
// out_of_scope or summary; a summary row carries the number of checked
// points in `index` and the largest lhs - rhs in `excess`.
std::string lemmas_csv(const ProblemSpec& spec, Index n_points, std::uint64_t seed);

}  // namespace wl
