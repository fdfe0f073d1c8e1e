#include "warmup_lab/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace wl {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) fail(ErrorCode::io, fmt::format("failed writing '{}'", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, fmt::format("cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string fmt_num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  return fmt::format("{:.6g}", v);
}

TraceMode trace_mode_for(const ExperimentConfig& cfg) {
  if (cfg.trace == "deterministic") return TraceMode::deterministic;
  if (cfg.trace == "stochastic") return TraceMode::stochastic;
  return cfg.optimizer == "sgd" ? TraceMode::stochastic : TraceMode::deterministic;
}

}  // namespace

std::string smoothness_trace_csv(const SmoothnessTrace& trace) {
  std::string out = "iter,loss_gap,smoothness,method\n";
  for (const SmoothnessSample& s : trace.samples)
    out += fmt::format("{},{},{},{}\n", s.iter, s.loss_gap, s.smoothness, smoothness_method_name(s.method));
  return out;
}

RunRecord execute_run(const ExperimentConfig& cfg, const fs::path& root) {
  require(cfg.sweep.empty(), ErrorCode::precondition, "execute_run takes a sweep-free config; expand it first");
  const auto start = std::chrono::steady_clock::now();

  const ProblemInstance inst = build_problem(cfg.problem);
  const StepPolicy policy = build_policy(cfg.policy, &inst);
  Trajectory traj;
  if (cfg.optimizer == "sgd") {
    traj = run_sgd(*inst.obj, inst.w0, policy, cfg.batch_size, cfg.seed, cfg.stop);
  } else {
    traj = run_gd(*inst.obj, inst.w0, policy, cfg.stop);
    traj.seed = cfg.seed;
  }
  if (inst.obj->has_projector()) attach_distance_tracking(traj, *inst.obj);

  RunRecord rec;
  rec.id = run_id(cfg);
  rec.dir = root / rec.id;
  rec.config = config_to_json(cfg);
  fs::create_directories(rec.dir);

  write_file(rec.dir / "trajectory.csv", trajectory_csv(traj));
  SmoothnessTrace trace;
  if (cfg.trace != "none") {
    try {
      trace = local_smoothness_trace(*inst.obj, traj, trace_mode_for(cfg));
    } catch (const Error&) {
      // Diverged runs can leave non-finite snapshots; the trace is then left empty.
      trace = {};
    }
  }
  write_file(rec.dir / "smoothness_trace.csv", smoothness_trace_csv(trace));
  rec.artifacts = {"trajectory.csv", "smoothness_trace.csv", "summary.json"};

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json summary = Json::parse(trajectory_summary_json(traj));
  summary["run_id"] = rec.id;
  summary["config"] = rec.config;
  summary["tool_version"] = kToolVersion;
  summary["rng_algorithm"] = traj.rng_algorithm;
  summary["artifacts"] = rec.artifacts;
  summary["wall_seconds"] = rec.wall_seconds;
  rec.summary = summary;
  write_file(rec.dir / "summary.json", summary.dump(2) + "\n");
  return rec;
}

std::vector<RunRecord> execute_runs(const std::vector<ExperimentConfig>& cfgs, const fs::path& root, unsigned jobs) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, unsigned(std::max<std::size_t>(1, cfgs.size())));
  std::vector<RunRecord> out(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        out[i] = execute_run(cfgs[i], root);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

Report emit_report(const std::vector<std::string>& run_ids, const fs::path& root) {
  Report rep;
  std::string table =
      "| run | problem | policy | stop | iters | final f | min step | max step | step non-decreasing until |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  rep.csv = "run_id,iter,f,step_size\n";
  for (const std::string& id : run_ids) {
    const fs::path dir = root / id;
    if (!fs::exists(dir / "summary.json") || !fs::exists(dir / "trajectory.csv")) {
      rep.warnings.push_back(fmt::format("run '{}' not found under {}; skipped", id, root.string()));
      continue;
    }
    const Json s = Json::parse(read_file(dir / "summary.json"));
    std::istringstream csv(read_file(dir / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);  // header
    double lo = kInf, hi = -kInf, prev = -kInf;
    std::int64_t monotone_until = -1;
    bool monotone = true;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      const auto cols = split(line, ',');
      if (cols.size() < 4) continue;
      const std::int64_t iter = std::stoll(cols[0]);
      const double step = std::stod(cols[3]);
      rep.csv += fmt::format("{},{},{},{}\n", id, cols[0], cols[1], cols[3]);
      if (step == 0.0 && iter > 0) continue;  // terminal record takes no step
      lo = std::min(lo, step);
      hi = std::max(hi, step);
      if (monotone && step >= prev) {
        monotone_until = iter;
      } else {
        monotone = false;
      }
      prev = step;
    }
    const Json& cfg = s.at("config");
    const double final_f = s.at("final_f").is_null() ? kNaN : s.at("final_f").get<double>();
    table += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", id,
                         cfg.at("problem").at("name").get<std::string>(),
                         s.at("provenance").at("policy").get<std::string>(), s.at("stop_reason").get<std::string>(),
                         s.at("iters").get<std::uint64_t>(), fmt_num(final_f), fmt_num(lo), fmt_num(hi),
                         monotone_until);
  }
  rep.markdown = "# Run report\n\n" + table;
  for (const std::string& w : rep.warnings) rep.markdown += fmt::format("\n> warning: {}\n", w);
  return rep;
}

// ---------------------------------------------------------------------------
// Problem-file helpers

Json certificate_json(const SmoothnessCertificate& cert) {
  Json j;
  j["H0"] = cert.H0;
  j["H1"] = cert.H1;
  j["f_star"] = cert.f_star;
  j["rho"] = cert.rho;
  j["region"] = cert.region;
  j["conservative"] = cert.conservative;
  return j;
}

Json constants_json(const ProblemSpec& spec) {
  const ProblemInstance inst = build_problem(spec);
  Json j;
  j["problem"] = spec.name;
  j["params"] = spec.params;
  j["dim"] = inst.obj->dim();
  if (inst.obj->f_star()) j["f_star"] = *inst.obj->f_star();
  const double f0 = inst.obj->value(inst.w0.data());
  j["f_w0"] = f0;
  if (!inst.cert) {
    j["certificate"] = nullptr;
    return j;
  }
  const SmoothnessCertificate& c = *inst.cert;
  j["certificate"] = certificate_json(c);
  if (c.rho == 1.0) {
    const double gap = std::max(0.0, f0 - c.f_star);
    j["adaptive_step_w0"] = 1.0 / (10.0 * c.H0 + 20.0 * c.H1 * gap);
    if (c.H1 > 0.0 && f0 >= 1.0) j["max_safe_constant_step"] = max_safe_constant_step(f0, c.H1);
  } else {
    const double delta0 = std::max(0.0, f0 - c.f_star);
    if (delta0 > 0.0) {
      const auto [H0, H1] = rho_reduction(c.H0, c.H1, c.rho, delta0);
      j["sublevel_reduction"] = {{"H0", H0}, {"H1", H1}, {"delta0", delta0}};
    }
  }
  return j;
}

CertificateReport verify_problem(const ProblemSpec& spec, const std::optional<SmoothnessCertificate>& override_cert,
                                 Index n_points, std::uint64_t seed) {
  const ProblemInstance inst = build_problem(spec);
  const std::optional<SmoothnessCertificate> cert = override_cert ? override_cert : inst.cert;
  if (!cert) fail(ErrorCode::capability, fmt::format("problem '{}' has no certificate; pass one explicitly", spec.name));
  if (!inst.sampler) fail(ErrorCode::capability, fmt::format("problem '{}' has no region sampler", spec.name));
  return verify_certificate(*inst.obj, *cert, *inst.sampler, n_points, 1e-6 * (1.0 + cert->H0), seed);
}

std::string lemmas_csv(const ProblemSpec& spec, Index n_points, std::uint64_t seed) {
  const ProblemInstance inst = build_problem(spec);
  if (!inst.cert) fail(ErrorCode::capability, fmt::format("problem '{}' has no certificate", spec.name));
  if (!inst.sampler) fail(ErrorCode::capability, fmt::format("problem '{}' has no region sampler", spec.name));
  SmoothnessCertificate cert = *inst.cert;
  if (cert.rho != 1.0) {
    const double delta0 = std::max(0.0, inst.obj->value(inst.w0.data()) - cert.f_star);
    std::tie(cert.H0, cert.H1) = rho_reduction(cert.H0, cert.H1, cert.rho, std::max(delta0, 1e-12));
    cert.rho = 1.0;
  }

  Rng rng(seed);
  std::vector<Vec> points;
  for (Index i = 0; i < n_points; ++i) points.push_back(inst.sampler->sample(rng));

  std::vector<LemmaReport> reports;
  if (inst.cert->rho == 1.0) reports.push_back(check_gradient_bound(*inst.obj, cert, points));

  LemmaReport descent;
  descent.check = "descent_step";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double gap = std::max(0.0, inst.obj->value(points[i]) - cert.f_star);
    const double eta = 1.0 / (10.0 * cert.H0 + 20.0 * cert.H1 * gap);
    const LemmaReport r = check_descent_step(*inst.obj, cert, points[i], eta);
    descent.n_checked += r.n_checked;
    descent.worst_margin = std::min(descent.worst_margin, r.worst_margin);
    for (Index k : r.out_of_scope) descent.out_of_scope.push_back(Index(i) + k);
    for (LemmaViolation v : r.violations) {
      v.index = Index(i);
      descent.violations.push_back(v);
    }
  }
  reports.push_back(descent);

  StopRule stop;
  stop.max_iters = 1000;
  const Trajectory traj =
      run_gd(*inst.obj, inst.w0, StepPolicy::adaptive(cert.H0, cert.H1, 1.0, cert.f_star), stop);
  reports.push_back(check_trajectory_descent(traj));
  if (inst.condition) reports.push_back(check_condition(*inst.condition, *inst.obj, points));

  std::string out = "check,kind,index,lhs,rhs,excess\n";
  for (const LemmaReport& r : reports) {
    for (const LemmaViolation& v : r.violations)
      out += fmt::format("{},violation,{},{},{},{}\n", r.check, v.index, v.lhs, v.rhs, v.excess);
    for (Index k : r.out_of_scope) out += fmt::format("{},out_of_scope,{},,,\n", r.check, k);
    out += fmt::format("{},summary,{},,,{}\n", r.check, r.n_checked,
                       r.n_checked ? -r.worst_margin : 0.0);
  }
  return out;
}

}  // namespace wl
