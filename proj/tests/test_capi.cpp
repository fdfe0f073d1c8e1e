#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include "warmup_lab/warmup_lab.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  wl_string_free(s);
  return out;
}

struct Problem {
  wl_problem* p = nullptr;
  Problem(const char* name, const char* params) { REQUIRE(wl_problem_create(name, params, &p) == WL_OK); }
  ~Problem() { wl_problem_free(p); }
};

struct Trajectory {
  wl_trajectory* t = nullptr;
  ~Trajectory() { wl_trajectory_free(t); }
};

struct TempOut {
  fs::path path;
  TempOut() {
    path = fs::temp_directory_path() / ("warmup_lab_capi_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
    ::setenv("WARMUP_LAB_OUT", path.c_str(), 1);
  }
  ~TempOut() {
    ::unsetenv("WARMUP_LAB_OUT");
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const char* kConfig = R"(seed = 5
[problem]
name = "quadratic"
eigenvalues = [1.0, 3.0]
[policy]
kind = "constant"
eta = 0.3
[stop]
max_iters = 100
grad_tol = 1e-9
)";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(wl_version()) == "0.3.0");
  CHECK(std::string(wl_status_name(WL_OK)) == "ok");
  CHECK(std::string(wl_status_name(WL_E_CONFIG)) == "config");
  CHECK(std::string(wl_status_name(12345)) == "unknown");
}

TEST_CASE("null arguments are rejected without crashing") {
  CHECK(wl_problem_create(nullptr, nullptr, nullptr) == WL_E_NULL_ARGUMENT);
  CHECK(std::string(wl_last_error()).size() > 0);
  int64_t dim = 0;
  CHECK(wl_problem_dim(nullptr, &dim) == WL_E_NULL_ARGUMENT);
  double eta = 0.0;
  CHECK(wl_max_safe_constant_step(2.0, 1.0, nullptr) == WL_E_NULL_ARGUMENT);
  CHECK(wl_max_safe_constant_step(2.0, 1.0, &eta) == WL_OK);
  CHECK(std::string(wl_last_error()).empty());
  wl_problem_free(nullptr);
  wl_trajectory_free(nullptr);
  wl_string_free(nullptr);
}

TEST_CASE("problems evaluate through the C interface") {
  Problem q("quadratic", R"({"eigenvalues": [2.0, 4.0]})");
  int64_t dim = 0;
  REQUIRE(wl_problem_dim(q.p, &dim) == WL_OK);
  CHECK(dim == 2);
  const double w[2] = {1.0, -1.0};
  double f = 0.0, g[2] = {};
  REQUIRE(wl_problem_value(q.p, w, 2, &f) == WL_OK);
  CHECK(f == doctest::Approx(0.5 * (2.0 + 4.0)));
  REQUIRE(wl_problem_gradient(q.p, w, 2, g) == WL_OK);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(-4.0));
  CHECK(wl_problem_value(q.p, w, 3, &f) == WL_E_PRECONDITION);
  double w0[2];
  CHECK(wl_problem_initial_point(q.p, w0, 2) == WL_OK);

  wl_problem* bad = nullptr;
  CHECK(wl_problem_create("nope", nullptr, &bad) == WL_E_CONFIG);
  CHECK(bad == nullptr);
  CHECK(wl_problem_create("quadratic", "{not json", &bad) == WL_E_INPUT);
}

TEST_CASE("constants, verification and lemma checks") {
  Problem e("exp_quadratic", R"({"H1": 1.0, "M": 20.0})");
  char* js = nullptr;
  REQUIRE(wl_problem_constants_json(e.p, &js) == WL_OK);
  const Json c = Json::parse(take(js));
  CHECK(c.at("certificate").at("H1").get<double>() == doctest::Approx(1.0));

  int64_t violations = -1;
  double worst = 0.0;
  REQUIRE(wl_problem_verify(e.p, nullptr, 200, 1, &violations, &worst) == WL_OK);
  CHECK(violations == 0);
  CHECK(worst <= 1.0 + 1e-9);
  const double tight[3] = {0.1, 0.1, 0.0};
  REQUIRE(wl_problem_verify(e.p, tight, 200, 1, &violations, &worst) == WL_OK);
  CHECK(violations > 0);
  CHECK(worst > 1.0);

  char* csv = nullptr;
  REQUIRE(wl_problem_lemmas_csv(e.p, 50, 1, &csv) == WL_OK);
  CHECK(take(csv).rfind("check,kind,index,lhs,rhs,excess\n", 0) == 0);

  wl_problem* from_toml = nullptr;
  REQUIRE(wl_problem_from_toml("[problem]\nname = \"runway\"\n", "p.toml", &from_toml) == WL_OK);
  wl_problem_free(from_toml);
  CHECK(wl_problem_from_toml("[problem]\nname = 3\n", "p.toml", &from_toml) == WL_E_CONFIG);
  CHECK(std::string(wl_last_error()).rfind("p.toml:", 0) == 0);
}

TEST_CASE("gradient descent and SGD runs") {
  Problem q("quadratic", R"({"eigenvalues": [1.0, 2.0]})");
  Trajectory t;
  REQUIRE(wl_run_gd(q.p, R"({"kind": "constant", "eta": 0.5})", 500, 1e-10, 0.0, &t.t) == WL_OK);
  const char* reason = nullptr;
  REQUIRE(wl_trajectory_stop_reason(t.t, &reason) == WL_OK);
  CHECK(std::string(reason) == "grad_tol");
  uint64_t iters = 0;
  REQUIRE(wl_trajectory_iterations(t.t, &iters) == WL_OK);
  CHECK(iters > 0);
  CHECK(iters < 500);
  double f = 1.0;
  REQUIRE(wl_trajectory_final_loss(t.t, &f) == WL_OK);
  CHECK(f < 1e-18);
  char* csv = nullptr;
  REQUIRE(wl_trajectory_csv(t.t, &csv) == WL_OK);
  CHECK(take(csv).rfind("iter,f,grad_norm,step_size,dist_to_solution\n", 0) == 0);

  Trajectory bad;
  CHECK(wl_run_gd(q.p, R"({"kind": "warp"})", 10, 0, 0, &bad.t) == WL_E_CONFIG);
  CHECK(bad.t == nullptr);

  Problem ls("interpolating_least_squares", R"({"n": 8, "d": 12})");
  Trajectory a, b;
  REQUIRE(wl_run_sgd(ls.p, R"({"kind": "constant", "eta": 0.01})", 2, 9, 50, &a.t) == WL_OK);
  REQUIRE(wl_run_sgd(ls.p, R"({"kind": "constant", "eta": 0.01})", 2, 9, 50, &b.t) == WL_OK);
  char *ca = nullptr, *cb = nullptr;
  wl_trajectory_csv(a.t, &ca);
  wl_trajectory_csv(b.t, &cb);
  CHECK(take(ca) == take(cb));
}

TEST_CASE("theory helpers") {
  double eta = 0.0;
  REQUIRE(wl_max_safe_constant_step(std::exp(1.0), 1.0, &eta) == WL_OK);
  CHECK(eta == doctest::Approx(4.0 / std::exp(1.0)));
  CHECK(wl_max_safe_constant_step(0.5, 1.0, &eta) == WL_E_PRECONDITION);
  double iters = 0.0;
  const std::string inputs = R"({"H1": 1, "eps": 1, "delta0": )" + std::to_string(std::exp(1.0)) + "}";
  REQUIRE(wl_predict_bound("lower_convex", inputs.c_str(), &iters) == WL_OK);
  const double e = std::stod(std::to_string(std::exp(1.0)));
  CHECK(iters == doctest::Approx(e / (std::log(e) + 1.0) * (e - 1.0) / 4.0));
  CHECK(wl_predict_bound("bogus", "{}", &iters) != WL_OK);
  CHECK(wl_predict_bound("upper_pl", "{}", &iters) == WL_E_INPUT);
}

TEST_CASE("configs run, canonicalise and report through the C interface") {
  TempOut out;
  char* runs = nullptr;
  REQUIRE(wl_run_config_text(kConfig, "c.toml", 1, &runs) == WL_OK);
  const Json arr = Json::parse(take(runs));
  REQUIRE(arr.size() == 1);
  const std::string id = arr[0].at("id");
  CHECK(arr[0].at("stop_reason") == "grad_tol");
  CHECK(fs::exists(out.path / id / "trajectory.csv"));

  char* canon = nullptr;
  REQUIRE(wl_config_canonical(kConfig, "c.toml", &canon) == WL_OK);
  const std::string once = take(canon);
  REQUIRE(wl_config_canonical(once.c_str(), "canon.toml", &canon) == WL_OK);
  CHECK(take(canon) == once);
  CHECK(wl_config_canonical("seed = [", "c.toml", &canon) == WL_E_CONFIG);
  CHECK(std::string(wl_last_error()).rfind("c.toml:1:", 0) == 0);

  const char* ids[2] = {id.c_str(), "ffffffffffffffff"};
  char *md = nullptr, *csv = nullptr, *warn = nullptr;
  REQUIRE(wl_report(ids, 2, out.path.c_str(), &md, &csv, &warn) == WL_OK);
  CHECK(take(md).find("| " + id + " | quadratic |") != std::string::npos);
  CHECK(take(csv).rfind("run_id,iter,f,step_size\n", 0) == 0);
  CHECK(Json::parse(take(warn)).size() == 1);

  char* root = nullptr;
  REQUIRE(wl_output_root("runs", &root) == WL_OK);
  CHECK(take(root) == out.path.string());
}

TEST_CASE("experiment names and unknown experiments") {
  char* names = nullptr;
  REQUIRE(wl_experiment_names(&names) == WL_OK);
  const std::string n = take(names);
  CHECK(n.find("closure-demo") != std::string::npos);
  CHECK(n.find("practical-warmup") != std::string::npos);
  char* md = nullptr;
  int ok = -1;
  CHECK(wl_run_experiment("nope", fs::temp_directory_path().c_str(), &md, &ok) == WL_E_INPUT);
}
