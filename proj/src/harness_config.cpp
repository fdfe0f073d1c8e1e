#include "warmup_lab/harness.hpp"

#include <fmt/format.h>
#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace wl {

namespace {

// ---------------------------------------------------------------------------
// Parameter access

const Json* find(const Json& params, const std::string& key) {
  auto it = params.find(key);
  return it == params.end() ? nullptr : &*it;
}

double num(const Json& params, const std::string& key, double fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  if (!v->is_number()) fail(ErrorCode::config, fmt::format("parameter '{}' must be a number", key));
  return v->get<double>();
}

std::optional<double> opt_num(const Json& params, const std::string& key) {
  if (!find(params, key)) return std::nullopt;
  return num(params, key, 0.0);
}

std::int64_t integer(const Json& params, const std::string& key, std::int64_t fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_number_float()) {
    const double x = v->get<double>();
    if (x == std::floor(x) && std::abs(x) < 9e15) return std::int64_t(x);
  }
  fail(ErrorCode::config, fmt::format("parameter '{}' must be an integer", key));
}

std::string str(const Json& params, const std::string& key, const std::string& fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(ErrorCode::config, fmt::format("parameter '{}' must be a string", key));
  return v->get<std::string>();
}

bool boolean(const Json& params, const std::string& key, bool fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(ErrorCode::config, fmt::format("parameter '{}' must be a boolean", key));
  return v->get<bool>();
}

std::vector<double> num_array(const Json& params, const std::string& key, std::vector<double> fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  if (!v->is_array()) fail(ErrorCode::config, fmt::format("parameter '{}' must be an array of numbers", key));
  std::vector<double> out;
  for (const Json& e : *v) {
    if (!e.is_number()) fail(ErrorCode::config, fmt::format("parameter '{}' must be an array of numbers", key));
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<Index> dims_array(const Json& params, const std::string& key, std::vector<Index> fallback) {
  const Json* v = find(params, key);
  if (!v) return fallback;
  std::vector<Index> out;
  for (double x : num_array(params, key, {})) {
    if (x < 1.0 || x != std::floor(x))
      fail(ErrorCode::config, fmt::format("parameter '{}' must hold positive integers", key));
    out.push_back(Index(x));
  }
  return out;
}

Index positive_index(const Json& params, const std::string& key, Index fallback) {
  const std::int64_t v = integer(params, key, fallback);
  if (v < 1) fail(ErrorCode::config, fmt::format("parameter '{}' must be positive", key));
  return Index(v);
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), Index(v.size())); }

// Initial point for the scalar constructions: "w0" or the given default.
ParamPoint scalar_w0(const Json& params, double fallback) {
  return ParamPoint::flat(Vec::Constant(1, num(params, "w0", fallback)));
}

SamplerPtr scalar_box(const ParamPoint& w0, const Json& params, double min_radius) {
  const double r = num(params, "sample_radius", std::max(min_radius, 1.25 * std::abs(w0.data()[0])));
  return box_sampler(1, -r, r);
}

ConditionSpec aiming(double theta = 1.0) { return {ConditionKind::aiming, theta, 0.0}; }

DatasetPair net_data(const Json& params, Index c, Index d, const std::string& teacher_default) {
  const Index m = positive_index(params, "m", 8);
  return random_dataset(d, m, c, std::uint64_t(integer(params, "data_seed", 0)), str(params, "teacher", teacher_default),
                        positive_index(params, "teacher_hidden", 8));
}

// Replaces real-valued teacher outputs by one-hot labels of their argmax.
// Binary labels for the logistic model: 1 where the teacher output is positive.
DatasetPair binary_labels(const DatasetPair& data) {
  Mat Y = (data.Y.array() > 0.0).cast<double>().matrix();
  return DatasetPair::make(data.X, Y);
}

ParamPoint region_point(const PointSampler& sampler, const std::vector<Shape>& shapes, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 11));
  return ParamPoint(sampler.sample(rng), shapes);
}

std::optional<double> known_f_star(const Json& params, bool interpolating) {
  if (interpolating) return 0.0;
  return opt_num(params, "f_star");
}

ActivationSpec activation(const Json& params) {
  const std::string name = str(params, "activation", "tanh");
  if (name == "tanh") return ActivationSpec::tanh();
  if (name == "identity") return ActivationSpec::identity();
  if (name == "leaky_relu") return ActivationSpec::leaky_relu(num(params, "b", 0.5));
  fail(ErrorCode::config, fmt::format("unknown activation '{}' (expected tanh, identity or leaky_relu)", name));
}

// ---------------------------------------------------------------------------
// Problem builders

using Builder = ProblemInstance (*)(const Json&);

ProblemInstance build_quadratic(const Json& p) {
  const std::vector<double> eig = num_array(p, "eigenvalues", {1.0, 2.0, 3.0});
  require(!eig.empty(), ErrorCode::config, "eigenvalues must not be empty");
  const Index n = Index(eig.size());
  const Vec center = to_vec(num_array(p, "center", std::vector<double>(eig.size(), 0.0)));
  require(center.size() == n, ErrorCode::config, "center must have one entry per eigenvalue");
  const Mat A = to_vec(eig).asDiagonal();
  ProblemInstance inst;
  auto q = make_quadratic(A, center, num(p, "f_star", 0.0));
  inst.obj = q;
  const Vec w0 = to_vec(num_array(p, "w0", std::vector<double>(eig.size(), 1.0)));
  require(w0.size() == n, ErrorCode::config, "w0 must have one entry per eigenvalue");
  inst.w0 = ParamPoint::flat(w0);
  inst.cert = q->certificate();
  const double r = num(p, "sample_radius", 2.0 * (w0 - center).lpNorm<Eigen::Infinity>() + 1.0);
  inst.sampler = box_sampler(n, -r, r);
  if (q->has_projector()) inst.condition = aiming();
  return inst;
}

ProblemInstance build_exp_quadratic(const Json& p) {
  auto obj = make_exp_quadratic(num(p, "H1", 1.0), num(p, "M", std::exp(3.0)));
  ProblemInstance inst;
  inst.obj = obj;
  inst.w0 = scalar_w0(p, obj->recommended_w0());
  inst.cert = obj->certificate();
  inst.sampler = scalar_box(inst.w0, p, 2.0 * obj->branch_point());
  inst.condition = aiming();
  return inst;
}

ProblemInstance build_runway(const Json& p) {
  auto obj = make_runway(num(p, "H0", 1.0), num(p, "H1", 4.0), num(p, "delta", 0.005));
  ProblemInstance inst;
  inst.obj = obj;
  inst.w0 = scalar_w0(p, obj->X2());
  inst.cert = obj->certificate();
  inst.sampler = scalar_box(inst.w0, p, obj->X2() + 1.0);
  inst.condition = aiming();
  return inst;
}

ProblemInstance build_pl_lower_bound(const Json& p) {
  auto obj = make_pl_lower_bound(num(p, "C0", 1.0), num(p, "mu", 0.5), num(p, "H1", 1.0));
  ProblemInstance inst;
  inst.obj = obj;
  inst.w0 = scalar_w0(p, obj->w_c() + 1.0);
  inst.cert = obj->certificate();
  inst.sampler = scalar_box(inst.w0, p, obj->w_c() + 1.0);
  inst.condition = aiming();
  return inst;
}

ProblemInstance build_pl_sin_quadratic(const Json& p) {
  auto obj = make_pl_sin_quadratic();
  ProblemInstance inst;
  inst.obj = obj;
  inst.w0 = scalar_w0(p, 3.0);
  inst.cert = obj->certificate();
  inst.sampler = scalar_box(inst.w0, p, 10.0);
  inst.condition = ConditionSpec{ConditionKind::pl, 1.0, obj->mu()};
  return inst;
}

ProblemInstance build_interpolating_ls(const Json& p) {
  const std::uint64_t seed = std::uint64_t(integer(p, "data_seed", 0));
  auto obj = make_interpolating_least_squares(positive_index(p, "n", 10), positive_index(p, "d", 20), seed);
  ProblemInstance inst;
  inst.obj = obj;
  const double scale = num(p, "init_scale", 1.0);
  Rng rng(mix_seed(seed, 7));
  inst.w0 = ParamPoint::flat(scale * rng.normal_vec(obj->dim()));
  inst.cert = obj->certificate();
  inst.sampler = gaussian_sampler(obj->dim(), num(p, "sample_scale", 2.0 * scale));
  inst.condition = ConditionSpec{ConditionKind::interpolation, 1.0, 0.0};
  return inst;
}

ProblemInstance build_deep_linear(const Json& p) {
  const std::vector<Index> dims = dims_array(p, "dims", {2, 3, 3});
  require(dims.size() >= 3, ErrorCode::config, "dims must list at least c, one hidden width and d");
  const bool interp = boolean(p, "interpolating", false);
  const DatasetPair data = net_data(p, dims.front(), dims.back(), "linear");
  auto net = make_deep_linear(data, dims, interp);
  const double scale = num(p, "init_scale", 1.0);
  ProblemInstance inst;
  inst.obj = net;
  inst.w0 = make_balanced_init(dims, scale, BalanceMode::strong, std::uint64_t(integer(p, "data_seed", 0)) + 1);
  inst.cert = deep_linear_constants(data, dims, known_f_star(p, interp));
  inst.sampler = strongly_balanced_sampler(net, num(p, "scale_lo", 0.5 * scale), num(p, "scale_hi", 1.5 * scale));
  return inst;
}

ProblemInstance build_semi_linear(const Json& p) {
  const std::vector<Index> dims = dims_array(p, "dims", {3, 2, 3});
  require(dims.size() >= 3, ErrorCode::config, "dims must list at least c, one hidden width and d");
  const bool interp = boolean(p, "interpolating", false);
  const double b = num(p, "b", 0.5), h = num(p, "h", 0.05);
  const DatasetPair data = net_data(p, dims.front(), dims.back(), "linear");
  auto net = make_semi_linear(data, dims, b, interp);
  const double scale = num(p, "init_scale", 1.0);
  ProblemInstance inst;
  inst.obj = net;
  inst.sampler = semi_linear_region_sampler(net, h, num(p, "scale_lo", 0.75 * scale), num(p, "scale_hi", 1.5 * scale));
  inst.w0 = region_point(*inst.sampler, net->shapes(), std::uint64_t(integer(p, "data_seed", 0)));
  inst.cert = semi_linear_constants(data, dims, b, h, known_f_star(p, interp));
  return inst;
}

ProblemInstance build_deep_leaky(const Json& p) {
  const std::vector<Index> dims = dims_array(p, "dims", {3, 3, 3, 3});
  require(dims.size() >= 3, ErrorCode::config, "dims must list at least c, one hidden width and d");
  const std::size_t L = dims.size() - 1;
  const std::vector<double> slopes = num_array(p, "slopes", std::vector<double>(L - 1, 0.5));
  const std::vector<double> h = num_array(p, "h", std::vector<double>(L - 1, 0.05));
  const bool interp = boolean(p, "interpolating", false);
  const DatasetPair data = net_data(p, dims.front(), dims.back(), "linear");
  auto net = make_deep_leaky(data, dims, slopes, interp);
  const double scale = num(p, "init_scale", 1.0);
  ProblemInstance inst;
  inst.obj = net;
  inst.sampler = deep_leaky_region_sampler(net, h, num(p, "scale_lo", 0.75 * scale), num(p, "scale_hi", 1.5 * scale));
  inst.w0 = region_point(*inst.sampler, net->shapes(), std::uint64_t(integer(p, "data_seed", 0)));
  inst.cert = deep_leaky_constants(data, dims, slopes, h, known_f_star(p, interp));
  return inst;
}

ProblemInstance build_two_layer(const Json& p, TwoLayerL2::Loss loss) {
  const bool ce = loss == TwoLayerL2::Loss::cross_entropy;
  const Index d = positive_index(p, "d", 4), c = ce ? 1 : positive_index(p, "c", 1);
  const Index hidden = positive_index(p, "hidden", 16);
  Json with_m = p;
  if (!with_m.contains("m")) with_m["m"] = 64;
  DatasetPair data = net_data(with_m, c, d, "tanh");
  if (ce) data = binary_labels(data);
  const ActivationSpec act = activation(p);
  const double l1 = num(p, "lambda1", 1e-3), l2 = num(p, "lambda2", 1e-3);
  auto net = ce ? make_two_layer_ce_l2(data, hidden, act, l1, l2) : make_two_layer_mse_l2(data, hidden, act, l1, l2);
  const double scale = num(p, "init_scale", 2.0);
  ProblemInstance inst;
  inst.obj = net;
  Rng rng(mix_seed(std::uint64_t(integer(p, "data_seed", 0)), 5));
  inst.w0 = ParamPoint(scale * rng.normal_vec(net->dim()), net->shapes());
  const std::optional<double> f_star = opt_num(p, "f_star");
  if (act.twice_differentiable)
    inst.cert = ce ? two_layer_ce_constants(act, data.x_spec, l1, l2, f_star)
                   : two_layer_mse_constants(act, data.x_spec, l1, l2, f_star);
  inst.sampler = gaussian_sampler(net->dim(), num(p, "sample_scale", scale));
  return inst;
}

ProblemInstance build_two_layer_mse(const Json& p) { return build_two_layer(p, TwoLayerL2::Loss::mse); }
ProblemInstance build_two_layer_ce(const Json& p) { return build_two_layer(p, TwoLayerL2::Loss::cross_entropy); }

ProblemInstance build_counterexample(const Json& p) {
  auto obj = make_counterexample(parse_counterexample_kind(str(p, "kind", "sum_sin_square")));
  ProblemInstance inst;
  inst.obj = obj;
  const Vec w = obj->witness(int(positive_index(p, "witness", 1)));
  inst.w0 = ParamPoint(w, obj->shapes());
  return inst;
}

struct Entry {
  ProblemInfo info;
  Builder build;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"quadratic", "0.5 (w - c)^T diag(eigenvalues) (w - c) + f*", {"eigenvalues", "center", "f_star", "w0", "sample_radius"}},
       build_quadratic},
      {{"exp_quadratic", "quadratic bowl joined to an exponential wall", {"H1", "M", "w0", "sample_radius"}},
       build_exp_quadratic},
      {{"runway", "quadratic bowl, flat runway, exponential wall", {"H0", "H1", "delta", "w0", "sample_radius"}},
       build_runway},
      {{"pl_lower_bound", "PL quadratic joined to an exponential wall", {"C0", "mu", "H1", "w0", "sample_radius"}},
       build_pl_lower_bound},
      {{"pl_sin_quadratic", "w^2 + 3 sin^2 w (PL, non-convex)", {"w0", "sample_radius"}}, build_pl_sin_quadratic},
      {{"interpolating_least_squares", "underdetermined least squares with an exact solution",
        {"n", "d", "data_seed", "init_scale", "sample_scale"}},
       build_interpolating_ls},
      {{"deep_linear", "strongly balanced deep linear network",
        {"dims", "m", "data_seed", "teacher", "teacher_hidden", "interpolating", "f_star", "init_scale", "scale_lo",
         "scale_hi"}},
       build_deep_linear},
      {{"semi_linear", "leaky-ReLU layer followed by a deep linear tail",
        {"dims", "m", "data_seed", "teacher", "teacher_hidden", "interpolating", "f_star", "b", "h", "init_scale",
         "scale_lo", "scale_hi"}},
       build_semi_linear},
      {{"deep_leaky", "deep leaky-ReLU network",
        {"dims", "m", "data_seed", "teacher", "teacher_hidden", "interpolating", "f_star", "slopes", "h",
         "init_scale", "scale_lo", "scale_hi"}},
       build_deep_leaky},
      {{"two_layer_mse", "two-layer network, squared loss, L2 regularisation",
        {"d", "c", "m", "hidden", "data_seed", "teacher", "teacher_hidden", "activation", "b", "lambda1", "lambda2",
         "f_star", "init_scale", "sample_scale"}},
       build_two_layer_mse},
      {{"two_layer_ce", "two-layer network, cross-entropy loss, L2 regularisation",
        {"d", "m", "hidden", "data_seed", "teacher", "teacher_hidden", "activation", "b", "lambda1", "lambda2",
         "f_star", "init_scale", "sample_scale"}},
       build_two_layer_ce},
      {{"counterexample", "objectives outside the (L0, L1) class, started at a witness point", {"kind", "witness"}},
       build_counterexample},
  };
  return table;
}

const Entry& entry(const std::string& name) {
  for (const Entry& e : entries())
    if (e.info.name == name) return e;
  std::string known;
  for (const Entry& e : entries()) known += (known.empty() ? std::string() : std::string(", ")) + e.info.name;
  fail(ErrorCode::config, fmt::format("unknown problem '{}' (available: {})", name, known));
}

// ---------------------------------------------------------------------------
// Policies

const std::vector<std::pair<std::string, std::vector<std::string>>>& policy_keys() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
      {"constant", {"eta", "safe_factor"}},
      {"adaptive", {"H0", "H1", "theta", "f_star"}},
      {"clipped", {"C", "base"}},
      {"linear_warmup", {"peak", "warmup_iters", "total_iters", "floor"}},
      {"wsd", {"peak", "warmup_iters", "decay_iters", "total_iters", "floor"}},
      {"cosine", {"peak", "total_iters", "floor"}},
  };
  return table;
}

std::uint64_t iters(const Json& p, const std::string& key, std::int64_t fallback) {
  const std::int64_t v = integer(p, key, fallback);
  if (v < 0) fail(ErrorCode::config, fmt::format("parameter '{}' must be non-negative", key));
  return std::uint64_t(v);
}

double require_num(const Json& p, const std::string& key, const std::string& kind) {
  if (!find(p, key)) fail(ErrorCode::config, fmt::format("policy '{}' needs '{}'", kind, key));
  return num(p, key, 0.0);
}

// ---------------------------------------------------------------------------
// TOML <-> JSON

Json toml_to_json(const toml::node& node) {
  if (auto v = node.as_integer()) return Json(v->get());
  if (auto v = node.as_floating_point()) return Json(v->get());
  if (auto v = node.as_boolean()) return Json(v->get());
  if (auto v = node.as_string()) return Json(v->get());
  if (auto arr = node.as_array()) {
    Json out = Json::array();
    for (const toml::node& e : *arr) out.push_back(toml_to_json(e));
    return out;
  }
  if (auto tbl = node.as_table()) {
    Json out = Json::object();
    for (auto&& [k, v] : *tbl) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  fail(ErrorCode::config, "dates and times are not supported in configs");
}

void insert_json(toml::table& tbl, const std::string& key, const Json& v);

toml::array json_array(const Json& v) {
  toml::array arr;
  for (const Json& e : v) {
    if (e.is_number_integer()) arr.push_back(e.get<std::int64_t>());
    else if (e.is_number()) arr.push_back(e.get<double>());
    else if (e.is_boolean()) arr.push_back(e.get<bool>());
    else if (e.is_string()) arr.push_back(e.get<std::string>());
    else if (e.is_array()) arr.push_back(json_array(e));
    else fail(ErrorCode::config, "unsupported array element in config");
  }
  return arr;
}

void insert_json(toml::table& tbl, const std::string& key, const Json& v) {
  if (v.is_number_integer()) tbl.insert_or_assign(key, v.get<std::int64_t>());
  else if (v.is_number()) tbl.insert_or_assign(key, v.get<double>());
  else if (v.is_boolean()) tbl.insert_or_assign(key, v.get<bool>());
  else if (v.is_string()) tbl.insert_or_assign(key, v.get<std::string>());
  else if (v.is_array()) tbl.insert_or_assign(key, json_array(v));
  else if (v.is_object()) {
    toml::table sub;
    for (auto it = v.begin(); it != v.end(); ++it) insert_json(sub, it.key(), it.value());
    tbl.insert_or_assign(key, std::move(sub));
  } else {
    fail(ErrorCode::config, fmt::format("unsupported value for '{}'", key));
  }
}

[[noreturn]] void fail_at(const std::string& source, const toml::source_region& where, const std::string& msg) {
  fail(ErrorCode::config, fmt::format("{}:{}:{}: {}", source, where.begin.line, where.begin.column, msg));
}

const std::set<std::string>& integer_keys() {
  static const std::set<std::string> keys = {"n",           "d",           "m",         "c",
                                             "hidden",      "data_seed",   "witness",   "teacher_hidden",
                                             "warmup_iters", "decay_iters", "total_iters", "max_iters"};
  return keys;
}

// Writes a swept scalar into a nested JSON table, keeping integer fields integral.
void assign_path(Json& root, const std::vector<std::string>& parts, double value) {
  Json* cur = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& next = (*cur)[parts[i]];
    if (next.is_null()) next = Json::object();
    require(next.is_object(), ErrorCode::config, fmt::format("sweep path component '{}' is not a table", parts[i]));
    cur = &next;
  }
  const std::string& leaf = parts.back();
  const Json* existing = find(*cur, leaf);
  const bool want_int = (existing && existing->is_number_integer()) || integer_keys().count(leaf);
  if (want_int) {
    require(value == std::floor(value), ErrorCode::config,
            fmt::format("sweep value {} for integer field '{}' is not integral", value, leaf));
    (*cur)[leaf] = std::int64_t(value);
  } else {
    (*cur)[leaf] = value;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : path) {
    if (ch == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& path, double value) {
  const std::vector<std::string> parts = split_path(path);
  if (parts.size() == 1 && parts[0] == "seed") {
    require(value >= 0.0 && value == std::floor(value), ErrorCode::config, "swept seed must be a non-negative integer");
    cfg.seed = std::uint64_t(value);
    return;
  }
  require(parts.size() >= 2, ErrorCode::config, fmt::format("invalid sweep path '{}'", path));
  const std::vector<std::string> rest(parts.begin() + 1, parts.end());
  if (parts[0] == "policy") {
    assign_path(cfg.policy, rest, value);
  } else if (parts[0] == "problem") {
    assign_path(cfg.problem.params, rest, value);
  } else if (parts[0] == "stop" && rest.size() == 1) {
    const std::string& k = rest[0];
    if (k == "max_iters") {
      require(value >= 0.0 && value == std::floor(value), ErrorCode::config, "max_iters must be a non-negative integer");
      cfg.stop.max_iters = std::uint64_t(value);
    } else if (k == "grad_tol") {
      cfg.stop.grad_tol = value;
    } else if (k == "loss_tol") {
      cfg.stop.loss_tol = value;
    } else if (k == "divergence_guard") {
      cfg.stop.divergence_guard = value;
    } else {
      fail(ErrorCode::config, fmt::format("unknown stop field '{}' in sweep path", k));
    }
  } else {
    fail(ErrorCode::config, fmt::format("invalid sweep path '{}' (expected seed, policy.*, problem.* or stop.*)", path));
  }
}

void check_stop(const StopRule& s) {
  require(!s.grad_tol || *s.grad_tol >= 0.0, ErrorCode::config, "stop.grad_tol must be non-negative");
  require(!s.loss_tol || *s.loss_tol >= 0.0, ErrorCode::config, "stop.loss_tol must be non-negative");
  require(s.divergence_guard > 0.0, ErrorCode::config, "stop.divergence_guard must be positive");
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Registry

const std::vector<ProblemInfo>& problem_registry() {
  static const std::vector<ProblemInfo> infos = [] {
    std::vector<ProblemInfo> out;
    for (const Entry& e : entries()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

void validate_problem(const ProblemSpec& spec) {
  const Entry& e = entry(spec.name);
  require(spec.params.is_object(), ErrorCode::config, "problem parameters must form a table");
  for (auto it = spec.params.begin(); it != spec.params.end(); ++it)
    if (std::find(e.info.keys.begin(), e.info.keys.end(), it.key()) == e.info.keys.end())
      fail(ErrorCode::config, fmt::format("problem '{}' has no parameter '{}'", spec.name, it.key()));
}

ProblemInstance build_problem(const ProblemSpec& spec) {
  validate_problem(spec);
  return entry(spec.name).build(spec.params);
}

void validate_policy(const Json& spec) {
  require(spec.is_object(), ErrorCode::config, "policy must be a table");
  const std::string kind = str(spec, "kind", "");
  const auto& table = policy_keys();
  auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == kind; });
  if (it == table.end())
    fail(ErrorCode::config,
         fmt::format("unknown policy kind '{}' (expected constant, adaptive, clipped, linear_warmup, wsd or cosine)",
                     kind));
  for (auto k = spec.begin(); k != spec.end(); ++k) {
    if (k.key() == "kind") continue;
    if (std::find(it->second.begin(), it->second.end(), k.key()) == it->second.end())
      fail(ErrorCode::config, fmt::format("policy '{}' has no parameter '{}'", kind, k.key()));
  }
  if (kind == "clipped") {
    if (!find(spec, "base")) fail(ErrorCode::config, "policy 'clipped' needs a [policy.base] table");
    validate_policy(spec.at("base"));
  }
}

StepPolicy build_policy(const Json& spec, const ProblemInstance* problem) {
  validate_policy(spec);
  const std::string kind = str(spec, "kind", "");
  if (kind == "constant") {
    if (find(spec, "safe_factor")) {
      require(problem && problem->cert, ErrorCode::config, "safe_factor needs a problem with a certificate");
      const double f0 = problem->obj->value(problem->w0.data());
      return StepPolicy::constant(num(spec, "safe_factor", 1.0) * max_safe_constant_step(f0, problem->cert->H1));
    }
    return StepPolicy::constant(require_num(spec, "eta", kind));
  }
  if (kind == "adaptive") {
    const bool from_cert = !find(spec, "H0") || !find(spec, "H1");
    if (from_cert)
      require(problem && problem->cert, ErrorCode::config,
              "adaptive policy without H0/H1 needs a problem with a certificate");
    SmoothnessCertificate cert = from_cert ? *problem->cert : SmoothnessCertificate{};
    if (from_cert && cert.rho != 1.0) {
      // The step rule needs a rho = 1 certificate; reduce on the sublevel set of f(w0).
      const double delta0 = problem->obj->value(problem->w0.data()) - cert.f_star;
      std::tie(cert.H0, cert.H1) = rho_reduction(cert.H0, cert.H1, cert.rho, std::max(delta0, 1e-12));
    }
    return StepPolicy::adaptive(num(spec, "H0", cert.H0), num(spec, "H1", cert.H1), num(spec, "theta", 1.0),
                                num(spec, "f_star", cert.f_star));
  }
  if (kind == "clipped") {
    if (!find(spec, "base")) fail(ErrorCode::config, "policy 'clipped' needs a [policy.base] table");
    return StepPolicy::clipped(build_policy(spec.at("base"), problem), require_num(spec, "C", kind));
  }
  if (kind == "linear_warmup")
    return StepPolicy::linear_warmup(require_num(spec, "peak", kind), iters(spec, "warmup_iters", 0),
                                     iters(spec, "total_iters", 0), num(spec, "floor", 0.0));
  if (kind == "wsd")
    return StepPolicy::wsd(require_num(spec, "peak", kind), iters(spec, "warmup_iters", 0),
                           iters(spec, "decay_iters", 0), iters(spec, "total_iters", 0), num(spec, "floor", -1.0));
  return StepPolicy::cosine(require_num(spec, "peak", kind), iters(spec, "total_iters", 0), num(spec, "floor", 0.0));
}

// ---------------------------------------------------------------------------
// Config parsing

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  toml::table doc;
  try {
    doc = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    fail_at(source, e.source(), std::string(e.description()));
  }

  ExperimentConfig cfg;
  static const std::set<std::string> top = {"seed",    "outputs",   "optimizer", "batch_size", "trace",
                                            "sweep_cap", "problem", "policy",    "stop",       "sweep"};
  for (auto&& [k, v] : doc)
    if (!top.count(std::string(k.str()))) fail_at(source, k.source(), fmt::format("unknown key '{}'", k.str()));

  auto integer_at = [&](std::string_view key, std::int64_t lo) -> std::optional<std::int64_t> {
    const toml::node* n = doc.get(key);
    if (!n) return std::nullopt;
    auto v = n->as_integer();
    if (!v || v->get() < lo) fail_at(source, n->source(), fmt::format("'{}' must be an integer >= {}", key, lo));
    return v->get();
  };
  auto string_at = [&](std::string_view key, std::initializer_list<std::string_view> allowed)
      -> std::optional<std::string> {
    const toml::node* n = doc.get(key);
    if (!n) return std::nullopt;
    auto v = n->as_string();
    if (!v) fail_at(source, n->source(), fmt::format("'{}' must be a string", key));
    const std::string s = v->get();
    if (allowed.size() && std::find(allowed.begin(), allowed.end(), s) == allowed.end())
      fail_at(source, n->source(), fmt::format("invalid value '{}' for '{}'", s, key));
    return s;
  };

  if (auto v = integer_at("seed", 0)) cfg.seed = std::uint64_t(*v);
  if (auto v = integer_at("batch_size", 1)) cfg.batch_size = Index(*v);
  if (auto v = integer_at("sweep_cap", 1)) cfg.sweep_cap = std::size_t(*v);
  if (auto v = string_at("outputs", {})) cfg.outputs = *v;
  if (auto v = string_at("optimizer", {"gd", "sgd"})) cfg.optimizer = *v;
  if (auto v = string_at("trace", {"auto", "deterministic", "stochastic", "none"})) cfg.trace = *v;

  // [problem]
  const toml::node* pnode = doc.get("problem");
  if (!pnode) fail(ErrorCode::config, fmt::format("{}: missing [problem] table", source));
  const toml::table* ptbl = pnode->as_table();
  if (!ptbl) fail_at(source, pnode->source(), "'problem' must be a table");
  const toml::node* name = ptbl->get("name");
  if (!name || !name->is_string()) fail_at(source, ptbl->source(), "[problem] needs a string 'name'");
  cfg.problem.name = name->as_string()->get();
  for (auto&& [k, v] : *ptbl) {
    if (k.str() == "name") continue;
    try {
      cfg.problem.params[std::string(k.str())] = toml_to_json(v);
    } catch (const Error& e) {
      fail_at(source, v.source(), e.what());
    }
  }
  try {
    validate_problem(cfg.problem);
  } catch (const Error& e) {
    // Anchor on the offending key when there is one.
    for (auto&& [k, v] : *ptbl)
      if (std::string(e.what()).find(fmt::format("'{}'", k.str())) != std::string::npos)
        fail_at(source, k.source(), e.what());
    fail_at(source, name->source(), e.what());
  }

  // [policy]
  const toml::node* polnode = doc.get("policy");
  if (!polnode) fail(ErrorCode::config, fmt::format("{}: missing [policy] table", source));
  if (!polnode->is_table()) fail_at(source, polnode->source(), "'policy' must be a table");
  cfg.policy = toml_to_json(*polnode);
  try {
    validate_policy(cfg.policy);
  } catch (const Error& e) {
    fail_at(source, polnode->source(), e.what());
  }

  // [stop]
  if (const toml::node* snode = doc.get("stop")) {
    const toml::table* stbl = snode->as_table();
    if (!stbl) fail_at(source, snode->source(), "'stop' must be a table");
    for (auto&& [k, v] : *stbl) {
      const std::string key(k.str());
      if (key == "max_iters") {
        auto iv = v.as_integer();
        if (!iv || iv->get() < 0) fail_at(source, v.source(), "'max_iters' must be a non-negative integer");
        cfg.stop.max_iters = std::uint64_t(iv->get());
        continue;
      }
      auto value = v.value<double>();
      if (!value) fail_at(source, v.source(), fmt::format("'{}' must be a number", key));
      if (key == "grad_tol") cfg.stop.grad_tol = *value;
      else if (key == "loss_tol") cfg.stop.loss_tol = *value;
      else if (key == "divergence_guard") cfg.stop.divergence_guard = *value;
      else fail_at(source, k.source(), fmt::format("unknown stop field '{}'", key));
    }
    try {
      check_stop(cfg.stop);
    } catch (const Error& e) {
      fail_at(source, snode->source(), e.what());
    }
  }

  // [sweep]
  if (const toml::node* wnode = doc.get("sweep")) {
    const toml::table* wtbl = wnode->as_table();
    if (!wtbl) fail_at(source, wnode->source(), "'sweep' must be a table");
    double product = 1.0;
    for (auto&& [k, v] : *wtbl) {
      SweepAxis axis;
      axis.path = std::string(k.str());
      const toml::array* arr = v.as_array();
      if (!arr || arr->empty()) fail_at(source, v.source(), fmt::format("sweep '{}' must be a non-empty array", axis.path));
      for (const toml::node& e : *arr) {
        auto x = e.value<double>();
        if (!x) fail_at(source, e.source(), fmt::format("sweep '{}' must hold numbers", axis.path));
        axis.values.push_back(*x);
      }
      try {
        ExperimentConfig probe = cfg;
        apply_sweep_value(probe, axis.path, axis.values.front());
      } catch (const Error& e) {
        fail_at(source, k.source(), e.what());
      }
      product *= double(axis.values.size());
      cfg.sweep.push_back(std::move(axis));
    }
    if (product > double(cfg.sweep_cap))
      fail_at(source, wnode->source(),
              fmt::format("sweep expands to {} runs, above the cap of {}", product, cfg.sweep_cap));
  }

  // Build once so that bad values are reported now rather than mid-sweep.
  if (cfg.sweep.empty()) {
    try {
      const ProblemInstance inst = build_problem(cfg.problem);
      build_policy(cfg.policy, &inst);
      if (cfg.optimizer == "sgd")
        require(inst.obj->n_components() > 0, ErrorCode::config,
                fmt::format("optimizer sgd needs a finite-sum problem; '{}' has no components", cfg.problem.name));
    } catch (const Error& e) {
      fail_at(source, pnode->source(), e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["outputs"] = cfg.outputs;
  j["optimizer"] = cfg.optimizer;
  j["batch_size"] = cfg.batch_size;
  j["trace"] = cfg.trace;
  j["sweep_cap"] = cfg.sweep_cap;
  Json problem = cfg.problem.params;
  problem["name"] = cfg.problem.name;
  j["problem"] = problem;
  j["policy"] = cfg.policy;
  Json stop;
  stop["max_iters"] = cfg.stop.max_iters;
  if (cfg.stop.grad_tol) stop["grad_tol"] = *cfg.stop.grad_tol;
  if (cfg.stop.loss_tol) stop["loss_tol"] = *cfg.stop.loss_tol;
  stop["divergence_guard"] = cfg.stop.divergence_guard;
  j["stop"] = stop;
  Json sweep = Json::object();
  for (const SweepAxis& a : cfg.sweep) sweep[a.path] = a.values;
  j["sweep"] = sweep;
  return j;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  const Json j = config_to_json(cfg);
  toml::table doc;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "sweep" && it.value().empty()) continue;
    insert_json(doc, it.key(), it.value());
  }
  std::ostringstream os;
  os << doc << "\n";
  return os.str();
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  std::size_t total = 1;
  for (const SweepAxis& a : cfg.sweep) {
    require(!a.values.empty(), ErrorCode::config, fmt::format("sweep '{}' is empty", a.path));
    total *= a.values.size();
    require(total <= cfg.sweep_cap, ErrorCode::capacity,
            fmt::format("sweep expands beyond the cap of {} runs", cfg.sweep_cap));
  }
  ExperimentConfig base = cfg;
  base.sweep.clear();
  std::vector<ExperimentConfig> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    ExperimentConfig c = base;
    std::size_t rem = idx;
    // The last axis varies fastest.
    for (std::size_t a = cfg.sweep.size(); a-- > 0;) {
      const auto& axis = cfg.sweep[a];
      apply_sweep_value(c, axis.path, axis.values[rem % axis.values.size()]);
      rem /= axis.values.size();
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string run_id(const ExperimentConfig& cfg) {
  Json j = config_to_json(cfg);
  j.erase("outputs");  // where a run is written does not change what it computes
  const std::string key = j.dump() + "|" + std::to_string(cfg.seed) + "|" + kToolVersion;
  return fmt::format("{:016x}", fnv1a(key));
}

std::filesystem::path output_root(const std::string& configured) {
  if (const char* env = std::getenv("WARMUP_LAB_OUT"); env && *env) return env;
  return configured;
}

ProblemSpec load_problem_spec(std::string_view text, const std::string& source) {
  toml::table doc;
  try {
    doc = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    fail_at(source, e.source(), std::string(e.description()));
  }
  const toml::node* pnode = doc.get("problem");
  if (!pnode || !pnode->is_table()) fail(ErrorCode::config, fmt::format("{}: missing [problem] table", source));
  const toml::table& ptbl = *pnode->as_table();
  const toml::node* name = ptbl.get("name");
  if (!name || !name->is_string()) fail_at(source, ptbl.source(), "[problem] needs a string 'name'");
  ProblemSpec spec;
  spec.name = name->as_string()->get();
  for (auto&& [k, v] : ptbl)
    if (k.str() != "name") spec.params[std::string(k.str())] = toml_to_json(v);
  try {
    validate_problem(spec);
  } catch (const Error& e) {
    fail_at(source, name->source(), e.what());
  }
  return spec;
}

}  // namespace wl
