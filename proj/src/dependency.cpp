#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "tdep/dependency.hpp"
#include "tdep/error.hpp"
#include "tdep/kernels.hpp"

namespace tdep {

namespace {

// O(n^2) bound computations are skipped above this atom count.
constexpr std::size_t kBoundLimit = 4000;

bool has_marginal_bounds(const CostSpec& spec) {
  return spec.family == CostFamily::additive || spec.family == CostFamily::raw_power ||
         spec.family == CostFamily::normalized_isometric;
}

// First-occurrence grouping of atoms by x coordinate. Keys are the raw bytes
// after canonicalizing -0.0, or grid cells when tol > 0.
std::vector<std::vector<std::size_t>> group_by_x(const JointDiscreteMeasure& gamma, double tol) {
  const std::size_t n = gamma.size(), r = gamma.x_dim();
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> seen;
  seen.reserve(n * 2);
  std::string key(r * sizeof(double), '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = gamma.x_point(i);
    for (std::size_t d = 0; d < r; ++d) {
      double v = tol > 0.0 ? std::floor(x[d] / tol + 0.5) : x[d];
      if (v == 0.0) v = 0.0;  // merge -0.0 with +0.0
      std::memcpy(key.data() + d * sizeof(double), &v, sizeof(double));
    }
    auto [it, inserted] = seen.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

}  // namespace

double bound_resample(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cy) {
  const auto [mu, nu] = marginals(gamma);
  (void)mu;
  return diameter(nu, cy);
}

double bound_diameter(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cx,
                      const MarginalCostSpec& cy) {
  const std::size_t n = gamma.size();
  // fold (pre * d^beta)^p into a single scale * d^exponent factor
  const FactorSpec fx{cx.metric, powp(cx.pre_scale, cx.p), cx.beta * cx.p};
  const FactorSpec fy{cy.metric, powp(cy.pre_scale, cy.p), cy.beta * cy.p};
  const double* w = gamma.weights().data();
  if (n <= kBoundLimit) {
    std::vector<double> mx(n * n), my(n * n);
    kernels::factor_matrix(fx, gamma.x_points().data(), n, gamma.x_points().data(), n,
                           gamma.x_dim(), mx.data());
    kernels::factor_matrix(fy, gamma.y_points().data(), n, gamma.y_points().data(), n,
                           gamma.y_dim(), my.data());
    return kernels::expectation_min(mx.data(), my.data(), w, n);
  }
  std::vector<double> mx(n), my(n), rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::factor_matrix_serial(fx, gamma.x_point(i), 1, gamma.x_points().data(), n,
                                  gamma.x_dim(), mx.data());
    kernels::factor_matrix_serial(fy, gamma.y_point(i), 1, gamma.y_points().data(), n,
                                  gamma.y_dim(), my.data());
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j) terms[j] = w[j] * std::min(mx[j], my[j]);
    rows[i] = w[i] * stable_sum(terms);
  }
  return stable_sum(rows);
}

double marginal_tdep(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cy,
                     double group_tol) {
  const auto [mu, nu] = marginals(gamma);
  (void)mu;
  const std::size_t q = gamma.y_dim(), m = nu.size();
  const auto groups = group_by_x(gamma, group_tol);
  std::vector<double> terms;
  terms.reserve(groups.size());
  for (const auto& members : groups) {
    std::vector<double> gw(members.size());
    double total = 0.0;
    for (std::size_t l = 0; l < members.size(); ++l) total += gamma.weight(members[l]);
    if (total <= 0.0) continue;
    for (std::size_t l = 0; l < members.size(); ++l) gw[l] = gamma.weight(members[l]) / total;
    std::vector<double> cost(members.size() * m);
    for (std::size_t l = 0; l < members.size(); ++l) {
      const double* y = gamma.y_point(members[l]);
      for (std::size_t k = 0; k < m; ++k)
        cost[l * m + k] = marginal_cost(cy, y, nu.point(k), q);
    }
    const ExactResult r = solve_exact(gw, nu.weights(), cost.data());
    terms.push_back(total * r.plan.primal_cost);
  }
  return stable_sum(terms);
}

TransportPlan resample_plan(const JointDiscreteMeasure& gamma, const CostSpec& spec) {
  const auto [mu, nu] = marginals(gamma);
  (void)mu;
  const std::size_t n = gamma.size();
  if (n * n > kDefaultAtomBudget)
    throw CapacityError("resample_plan: product destination exceeds the atom budget");
  TransportPlan plan;
  plan.src_size = n;
  plan.dst_size = n * n;
  std::vector<double> terms;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = gamma.weight(i);
    if (wi <= 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) {
      const double mass = wi * nu.weight(k);
      if (mass <= 0.0) continue;
      plan.entries.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(i * n + k), mass});
      terms.push_back(mass * eval_cost(spec, gamma.x_point(i), gamma.y_point(i), gamma.x_point(i),
                                       gamma.y_point(k), gamma.x_dim(), gamma.y_dim()));
    }
  }
  plan.primal_cost = stable_sum(terms);
  return plan;
}

TdepResult tdep(const JointDiscreteMeasure& gamma, const CostSpec& spec, SolverChoice choice,
                bool keep_plan) {
  if (spec.marginal_limit())
    throw UsageError("tdep: alpha = inf is the marginal limit; use marginal_tdep");
  const auto [mu, nu] = marginals(gamma);
  const JointDiscreteMeasure target = product(mu, nu);
  const std::size_t n = gamma.size(), m = target.size();

  const bool exact = choice == SolverChoice::exact ||
                     (choice == SolverChoice::automatic && n * m <= kAutoExactLimit);

  TdepResult res;
  const FactorizedCost fc = factorize(spec);
  if (exact) {
    if (n * m > kExactHardLimit)
      throw CapacityError("tdep: instance too large for the exact solver");
    const std::vector<double> cost = kernels::product_cost_matrix(fc, gamma, mu, nu);
    ExactResult r = solve_exact(gamma.weights(), target.weights(), cost.data());
    res.value = r.plan.primal_cost;
    res.solver = SolverKind::exact;
    if (keep_plan) res.plan = std::move(r.plan);
  } else {
    std::vector<double> A(n * mu.size()), B(n * nu.size());
    kernels::factor_matrix(fc.x_factor, gamma.x_points().data(), n, mu.points().data(), mu.size(),
                           gamma.x_dim(), A.data());
    kernels::factor_matrix(fc.y_factor, gamma.y_points().data(), n, nu.points().data(), nu.size(),
                           gamma.y_dim(), B.data());
    const ProductCostOracle oracle(std::move(A), std::move(B), n, mu.size(), nu.size(), fc.op,
                                   fc.outer_exp);
    SinkhornResult r = solve_sinkhorn_scaled(gamma.weights(), target.weights(), oracle);
    res.value = r.plan.primal_cost;
    res.solver = SolverKind::sinkhorn;
    if (keep_plan) res.plan = std::move(r.plan);
  }

  const MarginalCostSpec cx = x_marginal_cost(spec);
  const MarginalCostSpec cy = y_marginal_cost(spec);
  res.diam_x = diameter(mu, cx);
  res.diam_y = diameter(nu, cy);
  if (has_marginal_bounds(spec) && n <= kBoundLimit) {
    res.bound_resample = res.diam_y;
    res.bound_diameter = bound_diameter(gamma, cx, cy);
    res.bound_marginal = marginal_tdep(gamma, cy);
  }
  return res;
}

double tdep_alpha_schedule(const JointDiscreteMeasure& samples, Metric dx, Metric dy, double p,
                           const std::function<double(std::size_t)>& alpha_of_n) {
  if (!(p > 0.0) || !std::isfinite(p)) throw UsageError("tdep_alpha_schedule: p must be positive");
  const std::size_t n = samples.size();
  const double alpha =
      alpha_of_n ? alpha_of_n(n) : std::pow(static_cast<double>(n), 1.0 / (2.0 * p));
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw UsageError("tdep_alpha_schedule: schedule must produce positive finite alpha");
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.metric_x = dx;
  spec.metric_y = dy;
  spec.alpha = alpha;
  spec.beta_x = 1.0;
  spec.p = p;
  return tdep(samples, spec).value;
}

}  // namespace tdep
