#include "tdep/cost.hpp"

#include <cmath>

#include "tdep/error.hpp"
#include "tdep/kernels.hpp"

namespace tdep {

double metric_dist(Metric m, const double* a, const double* b, std::size_t dim) {
  switch (m) {
    case Metric::euclidean: {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double t = a[d] - b[d];
        s += t * t;
      }
      return std::sqrt(s);
    }
    case Metric::l1: {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += std::abs(a[d] - b[d]);
      return s;
    }
    case Metric::linf: {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s = std::max(s, std::abs(a[d] - b[d]));
      return s;
    }
  }
  return 0.0;
}

double marginal_cost(const MarginalCostSpec& spec, const double* a, const double* b,
                     std::size_t dim) {
  return powp(spec.pre_scale * powp(metric_dist(spec.metric, a, b, dim), spec.beta), spec.p);
}

double factor_value(const FactorSpec& f, const double* a, const double* b, std::size_t dim) {
  if (f.beta == 2.0 && f.metric == Metric::euclidean) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = a[d] - b[d];
      s += t * t;
    }
    return f.scale * s;
  }
  return f.scale * powp(metric_dist(f.metric, a, b, dim), f.beta);
}

namespace {

void validate(const CostSpec& spec) {
  if (!(spec.p > 0.0) || !std::isfinite(spec.p)) throw UsageError("cost: p must be positive");
  if (!(spec.beta_x > 0.0) || !std::isfinite(spec.beta_x))
    throw UsageError("cost: beta_x must be positive");
  if (spec.marginal_limit())
    throw UsageError("cost: alpha = inf marks the marginal limit and cannot be evaluated");
  if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha))
    throw UsageError("cost: alpha must be positive");
  if (spec.family == CostFamily::raw_power && spec.metric_x != spec.metric_y)
    throw UsageError("cost: raw family needs one metric on the concatenated space");
  if (spec.family == CostFamily::normalized_isometric &&
      (!(spec.x_scale > 0.0) || !(spec.y_scale > 0.0)))
    throw UsageError("cost: isometric spec lacks diameter normalizers; use make_isometric");
}

}  // namespace

FactorizedCost factorize(const CostSpec& spec) {
  validate(spec);
  FactorizedCost fc;
  switch (spec.family) {
    case CostFamily::additive:
      fc.x_factor = {spec.metric_x, spec.alpha, spec.beta_x};
      fc.y_factor = {spec.metric_y, 1.0, 1.0};
      fc.op = spec.p == 1.0 ? Combine::add : Combine::pow_sum;
      fc.outer_exp = spec.p;
      break;
    case CostFamily::raw_power:
      switch (spec.metric_x) {
        case Metric::euclidean:
          // d^p = (dx^2 + dy^2)^{p/2}
          fc.x_factor = {Metric::euclidean, 1.0, 2.0};
          fc.y_factor = {Metric::euclidean, 1.0, 2.0};
          fc.op = spec.p == 2.0 ? Combine::add : Combine::pow_sum;
          fc.outer_exp = spec.p / 2.0;
          break;
        case Metric::l1:
          fc.x_factor = {Metric::l1, 1.0, 1.0};
          fc.y_factor = {Metric::l1, 1.0, 1.0};
          fc.op = spec.p == 1.0 ? Combine::add : Combine::pow_sum;
          fc.outer_exp = spec.p;
          break;
        case Metric::linf:
          fc.x_factor = {Metric::linf, 1.0, 1.0};
          fc.y_factor = {Metric::linf, 1.0, 1.0};
          fc.op = Combine::max_pow;
          fc.outer_exp = spec.p;
          break;
      }
      break;
    case CostFamily::min_marginal:
      fc.x_factor = {spec.metric_x, powp(spec.alpha, spec.p), spec.beta_x * spec.p};
      fc.y_factor = {spec.metric_y, 1.0, spec.p};
      fc.op = Combine::min_of;
      fc.outer_exp = 1.0;
      break;
    case CostFamily::normalized_isometric:
      fc.x_factor = {spec.metric_x, spec.x_scale, 1.0};
      fc.y_factor = {spec.metric_y, spec.y_scale, 1.0};
      fc.op = spec.p == 1.0 ? Combine::add : Combine::pow_sum;
      fc.outer_exp = spec.p;
      break;
  }
  return fc;
}

double eval_cost(const CostSpec& spec, const double* x1, const double* y1, const double* x2,
                 const double* y2, std::size_t r, std::size_t q) {
  const FactorizedCost fc = factorize(spec);
  return fc.combine(factor_value(fc.x_factor, x1, x2, r), factor_value(fc.y_factor, y1, y2, q));
}

MarginalCostSpec x_marginal_cost(const CostSpec& spec) {
  switch (spec.family) {
    case CostFamily::additive:
    case CostFamily::min_marginal:
      return {spec.metric_x, spec.alpha, spec.beta_x, spec.p};
    case CostFamily::raw_power:
      return {spec.metric_x, 1.0, 1.0, spec.p};
    case CostFamily::normalized_isometric:
      return {spec.metric_x, spec.x_scale, 1.0, spec.p};
  }
  return {};
}

MarginalCostSpec y_marginal_cost(const CostSpec& spec) {
  switch (spec.family) {
    case CostFamily::additive:
    case CostFamily::min_marginal:
    case CostFamily::raw_power:
      return {spec.metric_y, 1.0, 1.0, spec.p};
    case CostFamily::normalized_isometric:
      return {spec.metric_y, spec.y_scale, 1.0, spec.p};
  }
  return {};
}

double diameter(const DiscreteMeasure& mu, const MarginalCostSpec& cost) {
  const std::size_t n = mu.size(), dim = mu.dim();
  std::vector<double> row_sums(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* a = mu.point(i);
    for (std::size_t j = 0; j < n; ++j)
      s += mu.weight(j) * marginal_cost(cost, a, mu.point(j), dim);
    row_sums[i] = mu.weight(i) * s;
  }
  return stable_sum(row_sums);
}

std::vector<double> cost_matrix(const CostSpec& spec, const JointDiscreteMeasure& src,
                                const JointDiscreteMeasure& dst) {
  if (src.x_dim() != dst.x_dim() || src.y_dim() != dst.y_dim())
    throw DataError("cost_matrix: dimension mismatch between measures");
  return kernels::joint_cost_matrix(factorize(spec), src, dst);
}

double isometric_alpha(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                       Metric metric_x, Metric metric_y) {
  if (!(p > 0.0)) throw UsageError("isometric_alpha: p must be positive");
  const double dx = diameter(mu, {metric_x, 1.0, 1.0, p});
  const double dy = diameter(nu, {metric_y, 1.0, 1.0, p});
  if (dx == 0.0) throw DataError("isometric_alpha: X marginal is degenerate (zero diameter)");
  if (dy == 0.0) return 0.0;
  return std::pow(dy / dx, 1.0 / p);
}

CostSpec make_isometric(CostSpec base, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const double dx = diameter(mu, {base.metric_x, 1.0, 1.0, base.p});
  const double dy = diameter(nu, {base.metric_y, 1.0, 1.0, base.p});
  if (dx == 0.0 || dy == 0.0)
    throw DataError("make_isometric: degenerate marginal (zero diameter)");
  base.family = CostFamily::normalized_isometric;
  base.alpha = 1.0;
  base.beta_x = 1.0;
  base.x_scale = std::pow(dx, -1.0 / base.p);
  base.y_scale = std::pow(dy, -1.0 / base.p);
  return base;
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::l1: return "l1";
    case Metric::linf: return "linf";
  }
  return "?";
}

const char* to_string(CostFamily f) {
  switch (f) {
    case CostFamily::additive: return "additive";
    case CostFamily::raw_power: return "raw";
    case CostFamily::min_marginal: return "min";
    case CostFamily::normalized_isometric: return "isometric";
  }
  return "?";
}

Metric metric_from_string(const std::string& s) {
  if (s == "euclidean" || s == "l2") return Metric::euclidean;
  if (s == "l1") return Metric::l1;
  if (s == "linf") return Metric::linf;
  throw UsageError("unknown metric '" + s + "' (euclidean|l1|linf)");
}

CostFamily family_from_string(const std::string& s) {
  if (s == "additive") return CostFamily::additive;
  if (s == "raw") return CostFamily::raw_power;
  if (s == "min") return CostFamily::min_marginal;
  if (s == "isometric") return CostFamily::normalized_isometric;
  throw UsageError("unknown cost family '" + s + "' (additive|raw|min|isometric)");
}

}  // namespace tdep
