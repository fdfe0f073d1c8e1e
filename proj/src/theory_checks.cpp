#include "warmup_lab/theory.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wl {

namespace {

// Records one inequality lhs <= rhs with an additive tolerance.
void record(LemmaReport& rep, Index index, double lhs, double rhs, double tol) {
  ++rep.n_checked;
  rep.worst_margin = std::min(rep.worst_margin, rhs - lhs);
  if (!(lhs <= rhs + tol)) rep.violations.push_back({index, lhs, rhs, lhs - rhs});
}

double reference_level(const Objective& obj, const SmoothnessCertificate& cert) {
  return obj.f_star().value_or(cert.f_star);
}

}  // namespace

LemmaReport check_gradient_bound(const Objective& obj, const SmoothnessCertificate& cert,
                                 const std::vector<Vec>& points) {
  require(cert.rho == 1.0, ErrorCode::precondition, "gradient bound needs a rho = 1 certificate");
  LemmaReport rep;
  rep.check = "gradient_bound";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec& w = points[i];
    const double gap = std::max(0.0, obj.value(w) - cert.f_star);
    const double lhs = obj.gradient(w).squaredNorm();
    const double rhs = 2.25 * (cert.H0 + 3.0 * cert.H1 * gap) * gap;
    record(rep, Index(i), lhs, rhs, 1e-9 * rhs + 1e-14);
  }
  return rep;
}

LemmaReport check_descent_step(const Objective& obj, const SmoothnessCertificate& cert, const Vec& w, double eta) {
  require(cert.rho == 1.0, ErrorCode::precondition, "descent lemma needs a rho = 1 certificate");
  require(eta >= 0.0, ErrorCode::precondition, "step size must be non-negative");
  LemmaReport rep;
  rep.check = "descent_step";
  const double f = obj.value(w);
  const Vec g = obj.gradient(w);
  const double g2 = g.squaredNorm();
  if (cert.H1 > 0.0 && eta * std::sqrt(g2) > 1.0 / std::sqrt(cert.H1)) {
    rep.out_of_scope.push_back(0);
    return rep;
  }
  const double gap = std::max(0.0, f - cert.f_star);
  const double lhs = obj.value(w - eta * g);
  const double rhs = f - eta * g2 + (cert.H0 + cert.H1 * gap) * eta * eta * g2;
  record(rep, 0, lhs, rhs, 1e-9 * (1.0 + std::abs(f)));
  return rep;
}

LemmaReport check_trajectory_descent(const Trajectory& traj) {
  LemmaReport rep;
  rep.check = "trajectory_descent";
  for (std::size_t k = 0; k + 1 < traj.records.size(); ++k) {
    const EvalRecord& a = traj.records[k];
    const EvalRecord& b = traj.records[k + 1];
    const double rhs = a.f - 0.5 * a.step_size * a.grad_norm * a.grad_norm;
    record(rep, Index(a.iter), b.f, rhs, 1e-9 * (1.0 + std::abs(a.f)));
  }
  return rep;
}

const char* condition_name(ConditionKind k) {
  switch (k) {
    case ConditionKind::aiming: return "aiming";
    case ConditionKind::pl: return "pl";
    case ConditionKind::interpolation: return "interpolation";
  }
  return "unknown";
}

LemmaReport check_condition(const ConditionSpec& spec, const Objective& obj, const std::vector<Vec>& points) {
  LemmaReport rep;
  rep.check = condition_name(spec.kind);
  const auto f_star = obj.f_star();
  if (!f_star) fail(ErrorCode::capability, fmt::format("{} has no known optimum f*", obj.name()));
  switch (spec.kind) {
    case ConditionKind::aiming:
      if (!obj.has_projector())
        fail(ErrorCode::capability, fmt::format("{} has no solution-set projector", obj.name()));
      break;
    case ConditionKind::pl:
      require(spec.mu > 0.0, ErrorCode::precondition, "PL check needs mu > 0");
      break;
    case ConditionKind::interpolation:
      if (obj.n_components() == 0 || !obj.has_projector() || !obj.component_f_star())
        fail(ErrorCode::capability,
             fmt::format("{} lacks components, a projector or a common component optimum", obj.name()));
      break;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec& w = points[i];
    const double gap = obj.value(w) - *f_star;
    const double tol = 1e-9 * (1.0 + std::abs(gap));
    switch (spec.kind) {
      case ConditionKind::aiming: {
        const double inner = obj.gradient(w).dot(w - obj.project_solution(w));
        record(rep, Index(i), spec.theta * gap, inner, tol);
        break;
      }
      case ConditionKind::pl:
        record(rep, Index(i), spec.mu * gap, 0.5 * obj.gradient(w).squaredNorm(), tol);
        break;
      case ConditionKind::interpolation: {
        const Vec p = obj.project_solution(w);
        const double fi_star = *obj.component_f_star();
        double worst = -kInf;
        for (Index j = 0; j < obj.n_components(); ++j) worst = std::max(worst, obj.component_value(j, p));
        record(rep, Index(i), worst, fi_star, 1e-9 * (1.0 + std::abs(fi_star)));
        break;
      }
    }
  }
  return rep;
}

LemmaReport check_linear_decrease(const Objective& obj, const SmoothnessCertificate& cert, double theta,
                                  double dist0, const Trajectory& traj) {
  require(theta > 0.0 && theta <= 1.0, ErrorCode::precondition, "theta must lie in (0, 1]");
  require(dist0 > 0.0, ErrorCode::precondition, "dist0 must be positive");
  require(cert.H1 > 0.0, ErrorCode::precondition, "linear-decrease phase needs H1 > 0");
  LemmaReport rep;
  rep.check = "linear_decrease";
  const double ref = reference_level(obj, cert);
  const double threshold = cert.H0 / (2.0 * cert.H1);
  const double factor = 1.0 - std::pow(theta, 3) / (80.0 * cert.H1 * dist0 * dist0);
  for (std::size_t k = 0; k + 1 < traj.records.size(); ++k) {
    const double gap = traj.records[k].f - ref;
    if (gap < threshold) continue;  // outside the large-gap phase
    const double next = traj.records[k + 1].f - ref;
    record(rep, Index(traj.records[k].iter), next, factor * gap, 1e-12 * (1.0 + std::abs(gap)));
  }
  return rep;
}

}  // namespace wl
