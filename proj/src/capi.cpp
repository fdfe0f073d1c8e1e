#include "warmup_lab/warmup_lab.h"

#include "warmup_lab/harness.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

struct wl_problem {
  wl::ProblemInstance inst;
  wl::ProblemSpec spec;
};

struct wl_trajectory {
  wl::Trajectory traj;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return WL_OK;
  } catch (const wl::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const wl::Json::exception& e) {
    return set_error(WL_E_INPUT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(WL_E_CAPACITY, "out of memory");
  } catch (const std::exception& e) {
    return set_error(WL_E_UNKNOWN, e.what());
  } catch (...) {
    return set_error(WL_E_UNKNOWN, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) throw wl::Error(wl::ErrorCode::precondition, std::string(what) + " must not be NULL");
}

wl::Vec point(const wl_problem* p, const double* w, std::size_t n) {
  need(w, "w");
  wl::require(static_cast<wl::Index>(n) == p->inst.obj->dim(), wl::ErrorCode::precondition,
              "point length " + std::to_string(n) + " does not match the problem dimension " +
                  std::to_string(p->inst.obj->dim()));
  return Eigen::Map<const wl::Vec>(w, static_cast<wl::Index>(n));
}

wl::Json parse_json(const char* text) { return text && *text ? wl::Json::parse(text) : wl::Json::object(); }

int null_arg(const char* what) { return set_error(WL_E_NULL_ARGUMENT, std::string(what) + " must not be NULL"); }

}  // namespace

extern "C" {

const char* wl_version(void) { return wl::kToolVersion; }

const char* wl_status_name(int status) {
  switch (status) {
    case WL_OK: return "ok";
    case WL_E_NULL_ARGUMENT: return "null_argument";
    case WL_E_UNKNOWN: return "unknown";
    default:
      if (status > 0 && status <= WL_E_INTERNAL) return wl::error_code_name(static_cast<wl::ErrorCode>(status));
      return "unknown";
  }
}

const char* wl_last_error(void) { return g_last_error.c_str(); }

void wl_string_free(char* s) { std::free(s); }

int wl_problem_create(const char* name, const char* params_json, wl_problem** out) {
  if (!name) return null_arg("name");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto p = std::make_unique<wl_problem>();
    p->spec = {name, parse_json(params_json)};
    p->inst = wl::build_problem(p->spec);
    *out = p.release();
  });
}

int wl_problem_from_toml(const char* toml_text, const char* source, wl_problem** out) {
  if (!toml_text) return null_arg("toml_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto p = std::make_unique<wl_problem>();
    p->spec = wl::load_problem_spec(toml_text, source ? source : "<problem>");
    p->inst = wl::build_problem(p->spec);
    *out = p.release();
  });
}

void wl_problem_free(wl_problem* p) { delete p; }

int wl_problem_dim(const wl_problem* p, int64_t* dim) {
  if (!p) return null_arg("problem");
  if (!dim) return null_arg("dim");
  *dim = p->inst.obj->dim();
  return WL_OK;
}

int wl_problem_initial_point(const wl_problem* p, double* w, size_t n) {
  if (!p) return null_arg("problem");
  return guarded([&] {
    need(w, "w");
    wl::require(static_cast<wl::Index>(n) == p->inst.w0.size(), wl::ErrorCode::precondition,
                "buffer length does not match the problem dimension");
    std::memcpy(w, p->inst.w0.data().data(), n * sizeof(double));
  });
}

int wl_problem_value(const wl_problem* p, const double* w, size_t n, double* f) {
  if (!p) return null_arg("problem");
  if (!f) return null_arg("f");
  return guarded([&] { *f = p->inst.obj->value(point(p, w, n)); });
}

int wl_problem_gradient(const wl_problem* p, const double* w, size_t n, double* grad) {
  if (!p) return null_arg("problem");
  if (!grad) return null_arg("grad");
  return guarded([&] {
    const wl::Vec g = p->inst.obj->gradient(point(p, w, n));
    std::memcpy(grad, g.data(), n * sizeof(double));
  });
}

int wl_problem_constants_json(const wl_problem* p, char** json) {
  if (!p) return null_arg("problem");
  if (!json) return null_arg("json");
  return guarded([&] { *json = dup_string(wl::constants_json(p->spec).dump(2)); });
}

int wl_problem_verify(const wl_problem* p, const double* cert, int64_t n_points, uint64_t seed, int64_t* violations,
                      double* worst_ratio) {
  if (!p) return null_arg("problem");
  return guarded([&] {
    std::optional<wl::SmoothnessCertificate> override_cert;
    if (cert) {
      wl::SmoothnessCertificate c;
      c.H0 = cert[0];
      c.H1 = cert[1];
      c.f_star = cert[2];
      c.region = "user supplied";
      override_cert = c;
    }
    const wl::CertificateReport rep = wl::verify_problem(p->spec, override_cert, n_points, seed);
    if (violations) *violations = static_cast<int64_t>(rep.violations.size());
    if (worst_ratio) *worst_ratio = rep.worst_ratio;
  });
}

int wl_problem_lemmas_csv(const wl_problem* p, int64_t n_points, uint64_t seed, char** csv) {
  if (!p) return null_arg("problem");
  if (!csv) return null_arg("csv");
  return guarded([&] { *csv = dup_string(wl::lemmas_csv(p->spec, n_points, seed)); });
}

int wl_run_gd(const wl_problem* p, const char* policy_json, uint64_t max_iters, double grad_tol, double loss_tol,
              wl_trajectory** out) {
  if (!p) return null_arg("problem");
  if (!policy_json) return null_arg("policy_json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const wl::StepPolicy policy = wl::build_policy(parse_json(policy_json), &p->inst);
    wl::StopRule stop;
    stop.max_iters = max_iters;
    if (grad_tol > 0.0) stop.grad_tol = grad_tol;
    if (loss_tol > 0.0) stop.loss_tol = loss_tol;
    auto t = std::make_unique<wl_trajectory>();
    t->traj = wl::run_gd(*p->inst.obj, p->inst.w0, policy, stop);
    if (p->inst.obj->has_projector()) wl::attach_distance_tracking(t->traj, *p->inst.obj);
    *out = t.release();
  });
}

int wl_run_sgd(const wl_problem* p, const char* policy_json, int64_t batch_size, uint64_t seed, uint64_t max_iters,
               wl_trajectory** out) {
  if (!p) return null_arg("problem");
  if (!policy_json) return null_arg("policy_json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const wl::StepPolicy policy = wl::build_policy(parse_json(policy_json), &p->inst);
    wl::StopRule stop;
    stop.max_iters = max_iters;
    auto t = std::make_unique<wl_trajectory>();
    t->traj = wl::run_sgd(*p->inst.obj, p->inst.w0, policy, batch_size, seed, stop);
    if (p->inst.obj->has_projector()) wl::attach_distance_tracking(t->traj, *p->inst.obj);
    *out = t.release();
  });
}

void wl_trajectory_free(wl_trajectory* t) { delete t; }

int wl_trajectory_iterations(const wl_trajectory* t, uint64_t* iters) {
  if (!t) return null_arg("trajectory");
  if (!iters) return null_arg("iters");
  *iters = t->traj.iterations();
  return WL_OK;
}

int wl_trajectory_final_loss(const wl_trajectory* t, double* f) {
  if (!t) return null_arg("trajectory");
  if (!f) return null_arg("f");
  *f = t->traj.final_f();
  return WL_OK;
}

int wl_trajectory_stop_reason(const wl_trajectory* t, const char** reason) {
  if (!t) return null_arg("trajectory");
  if (!reason) return null_arg("reason");
  *reason = wl::stop_reason_name(t->traj.stop_reason);
  return WL_OK;
}

int wl_trajectory_csv(const wl_trajectory* t, char** csv) {
  if (!t) return null_arg("trajectory");
  if (!csv) return null_arg("csv");
  return guarded([&] { *csv = dup_string(wl::trajectory_csv(t->traj)); });
}

int wl_predict_bound(const char* kind, const char* inputs_json, double* iters) {
  if (!kind) return null_arg("kind");
  if (!iters) return null_arg("iters");
  return guarded([&] {
    const wl::Json j = parse_json(inputs_json);
    wl::BoundInputs in;
    auto take = [&](const char* key, std::optional<double>& dst) {
      if (j.contains(key)) dst = j.at(key).get<double>();
    };
    take("H0", in.H0);
    take("H1", in.H1);
    take("delta0", in.delta0);
    take("eps", in.eps);
    take("theta", in.theta);
    take("mu", in.mu);
    take("dist0", in.dist0);
    *iters = wl::predict_bound(wl::parse_bound_kind(kind), in).iters;
  });
}

int wl_max_safe_constant_step(double f_w0, double H1, double* eta) {
  if (!eta) return null_arg("eta");
  return guarded([&] { *eta = wl::max_safe_constant_step(f_w0, H1); });
}

namespace {

std::string runs_json(const wl::ExperimentConfig& cfg, unsigned jobs) {
  const auto cfgs = wl::expand_sweep(cfg);
  const auto recs = wl::execute_runs(cfgs, wl::output_root(cfg.outputs), jobs);
  wl::Json arr = wl::Json::array();
  for (const auto& r : recs)
    arr.push_back({{"id", r.id},
                   {"dir", r.dir.string()},
                   {"stop_reason", r.summary.at("stop_reason")},
                   {"iters", r.summary.at("iters")}});
  return arr.dump(2);
}

}  // namespace

int wl_run_config_file(const char* path, unsigned jobs, char** runs) {
  if (!path) return null_arg("path");
  if (!runs) return null_arg("runs_json");
  return guarded([&] { *runs = dup_string(runs_json(wl::load_config(path), jobs)); });
}

int wl_run_config_text(const char* toml_text, const char* source, unsigned jobs, char** runs) {
  if (!toml_text) return null_arg("toml_text");
  if (!runs) return null_arg("runs_json");
  return guarded([&] { *runs = dup_string(runs_json(wl::parse_config(toml_text, source ? source : "<config>"), jobs)); });
}

int wl_config_canonical(const char* toml_text, const char* source, char** toml_out) {
  if (!toml_text) return null_arg("toml_text");
  if (!toml_out) return null_arg("toml_out");
  return guarded([&] {
    *toml_out = dup_string(wl::serialize_config(wl::parse_config(toml_text, source ? source : "<config>")));
  });
}

int wl_experiment_names(char** names) {
  if (!names) return null_arg("names");
  return guarded([&] {
    std::string s;
    for (const auto& n : wl::experiment_names()) s += n + "\n";
    *names = dup_string(s);
  });
}

int wl_run_experiment(const char* name, const char* out_root, char** markdown, int* all_ok) {
  if (!name) return null_arg("name");
  if (!markdown) return null_arg("markdown");
  return guarded([&] {
    const wl::ExperimentResult res = wl::run_experiment(name, wl::output_root(out_root ? out_root : "runs"));
    *markdown = dup_string(res.markdown);
    if (all_ok) *all_ok = res.ok() ? 1 : 0;
  });
}

int wl_report(const char* const* run_ids, size_t n_ids, const char* root, char** markdown, char** csv,
              char** warnings_json) {
  if (n_ids > 0 && !run_ids) return null_arg("run_ids");
  if (!root) return null_arg("root");
  if (!markdown) return null_arg("markdown");
  return guarded([&] {
    std::vector<std::string> ids;
    for (size_t i = 0; i < n_ids; ++i) {
      need(run_ids[i], "run id");
      ids.emplace_back(run_ids[i]);
    }
    const wl::Report rep = wl::emit_report(ids, root);
    *markdown = dup_string(rep.markdown);
    if (csv) *csv = dup_string(rep.csv);
    if (warnings_json) *warnings_json = dup_string(wl::Json(rep.warnings).dump());
  });
}

int wl_output_root(const char* configured, char** path) {
  if (!path) return null_arg("path");
  return guarded([&] { *path = dup_string(wl::output_root(configured ? configured : "runs").string()); });
}

}  // extern "C"
