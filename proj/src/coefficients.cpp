#include "tdep/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tdep/cost.hpp"
#include "tdep/error.hpp"
#include "tdep/kernels.hpp"

namespace tdep {

namespace {

constexpr double kDriftTol = 1e-7;
constexpr double kNegativeTol = 1e-9;
constexpr std::size_t kDcorLimit = 8000;

void require_positive(double diam, const char* which) {
  if (!(diam > 0.0)) {
    throw DataError(std::string(which) + " marginal is a point mass; coefficient undefined");
  }
}

struct WeightedMoments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov = 0.0;
};

WeightedMoments moments_1d(std::span<const double> x, std::span<const double> y,
                           std::span<const double> w) {
  const std::size_t n = x.size();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * x[i];
  WeightedMoments m;
  m.mean_x = stable_sum(terms);
  for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * y[i];
  m.mean_y = stable_sum(terms);
  for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * (x[i] - m.mean_x) * (x[i] - m.mean_x);
  m.var_x = stable_sum(terms);
  for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * (y[i] - m.mean_y) * (y[i] - m.mean_y);
  m.var_y = stable_sum(terms);
  for (std::size_t i = 0; i < n; ++i) terms[i] = w[i] * (x[i] - m.mean_x) * (y[i] - m.mean_y);
  m.cov = stable_sum(terms);
  return m;
}

}  // namespace

namespace detail {

// Normalized statistics are ratios of transport costs and may overshoot their
// analytic range by accumulated roundoff. Small drift is clamped, anything
// larger means a real bug upstream and must not be masked.
double clamp_unit(double ratio, const char* what) {
  if (std::isnan(ratio)) throw NumericError(std::string(what) + " is NaN");
  if (ratio < 0.0) {
    if (ratio > -kNegativeTol) return 0.0;
    throw NumericError(std::string(what) + " is negative: " + std::to_string(ratio));
  }
  if (ratio > 1.0) {
    if (ratio <= 1.0 + kDriftTol) return 1.0;
    throw NumericError(std::string(what) + " exceeds 1 by " + std::to_string(ratio - 1.0));
  }
  return ratio;
}

double weighted_pearson(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w, double* raw) {
  const WeightedMoments m = moments_1d(x, y, w);
  if (raw) *raw = m.cov;
  if (!(m.var_x > 0.0) || !(m.var_y > 0.0)) {
    throw DataError("pearson undefined: a marginal has zero variance");
  }
  double r = m.cov / std::sqrt(m.var_x * m.var_y);
  if (r > 1.0 && r <= 1.0 + kDriftTol) r = 1.0;
  if (r < -1.0 && r >= -1.0 - kDriftTol) r = -1.0;
  if (r > 1.0 || r < -1.0) {
    throw NumericError("pearson out of [-1,1]: " + std::to_string(r));
  }
  return r;
}

// Average-rank ties: sort atom indices by value, assign each tie group the
// mean of the ranks it covers (1-based).
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

namespace {

std::vector<double> component(const JointDiscreteMeasure& gamma, bool y_side) {
  std::vector<double> out(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    out[i] = y_side ? gamma.y_point(i)[0] : gamma.x_point(i)[0];
  }
  return out;
}

void require_1d(const JointDiscreteMeasure& gamma, const char* what) {
  if (gamma.x_dim() != 1 || gamma.y_dim() != 1) {
    throw UsageError(std::string(what) + " requires 1-d marginals");
  }
}

double dcov2_from_sums(const kernels::DcovSums& s, const char* what) {
  double v = s.joint + s.mean_x * s.mean_y - 2.0 * s.cross;
  if (v < 0.0) {
    if (v <= -kNegativeTol) {
      throw NumericError(std::string(what) + " came out negative: " + std::to_string(v));
    }
    v = 0.0;
  }
  return v;
}

double euclid(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return std::sqrt(s);
}

CoefficientResult dcor_result(const JointDiscreteMeasure& gamma) {
  const std::size_t n = gamma.size();
  if (n > kDcorLimit) {
    throw CapacityError("dcor needs two dense " + std::to_string(n) + "^2 distance matrices");
  }
  std::vector<double> dx(n * n), dy(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = gamma.x_point(i);
    const double* yi = gamma.y_point(i);
    for (std::size_t j = 0; j < n; ++j) {
      dx[i * n + j] = euclid(xi, gamma.x_point(j), gamma.x_dim());
      dy[i * n + j] = euclid(yi, gamma.y_point(j), gamma.y_dim());
    }
  }
  const std::vector<double>& w = gamma.weights();
  const kernels::DcovSums sxy = kernels::dcov_sums(dx.data(), dy.data(), w.data(), n);
  const kernels::DcovSums sxx = kernels::dcov_sums(dx.data(), dx.data(), w.data(), n);
  const kernels::DcovSums syy = kernels::dcov_sums(dy.data(), dy.data(), w.data(), n);
  const double vxy = dcov2_from_sums(sxy, "dcov^2(X,Y)");
  const double vxx = dcov2_from_sums(sxx, "dcov^2(X,X)");
  const double vyy = dcov2_from_sums(syy, "dcov^2(Y,Y)");
  if (!(vxx > 0.0) || !(vyy > 0.0)) {
    throw DataError("dcor undefined: a marginal has zero distance variance");
  }
  CoefficientResult res;
  res.raw = vxy;
  res.value = detail::clamp_unit(std::sqrt(vxy) / std::pow(vxx * vyy, 0.25), "dcor");
  res.diam_x = vxx;
  res.diam_y = vyy;
  return res;
}

}  // namespace

CoefficientResult coefficient(const JointDiscreteMeasure& gamma, const CoefficientRequest& req) {
  if (!(req.p > 0.0) || !std::isfinite(req.p)) throw UsageError("p must be positive and finite");
  CoefficientResult res;
  switch (req.kind) {
    case CoefficientKind::rho_alpha: {
      if (!(req.alpha > 0.0) || !std::isfinite(req.alpha)) {
        throw UsageError("alpha must be positive and finite (use rho_inf for the limit)");
      }
      CostSpec spec;
      spec.family = CostFamily::additive;
      spec.metric_x = req.metric_x;
      spec.metric_y = req.metric_y;
      spec.alpha = req.alpha;
      spec.p = req.p;
      const TdepResult t = tdep(gamma, spec, req.solver);
      res.diam_x = t.diam_x;
      res.diam_y = t.diam_y;
      res.solver = t.solver;
      require_positive(t.diam_y, "Y");
      res.raw = t.value;
      res.value = std::pow(detail::clamp_unit(t.value / t.diam_y, "rho_alpha^p"), 1.0 / req.p);
      break;
    }
    case CoefficientKind::rho_inf: {
      const MarginalCostSpec cy{req.metric_y, 1.0, 1.0, req.p};
      const MarginalCostSpec cx{req.metric_x, 1.0, 1.0, req.p};
      auto [mu, nu] = marginals(gamma);
      res.diam_x = diameter(mu, cx);
      res.diam_y = diameter(nu, cy);
      res.solver = SolverKind::exact;
      require_positive(res.diam_y, "Y");
      res.raw = marginal_tdep(gamma, cy);
      res.value = std::pow(detail::clamp_unit(res.raw / res.diam_y, "rho_inf^p"), 1.0 / req.p);
      break;
    }
    case CoefficientKind::rho_star: {
      auto [mu, nu] = marginals(gamma);
      CostSpec base;
      base.metric_x = req.metric_x;
      base.metric_y = req.metric_y;
      base.p = req.p;
      const CostSpec spec = make_isometric(base, mu, nu);
      const TdepResult t = tdep(gamma, spec, req.solver);
      res.diam_x = t.diam_x;  // diameters under the rescaled factors (both 1)
      res.diam_y = t.diam_y;
      res.solver = t.solver;
      res.raw = t.value;
      res.value = std::pow(detail::clamp_unit(t.value, "rho_star^p"), 1.0 / req.p);
      break;
    }
    case CoefficientKind::rho_contracting: {
      CostSpec spec;
      spec.family = CostFamily::additive;
      spec.metric_x = req.metric_x;
      spec.metric_y = req.metric_y;
      spec.alpha = 1.0;
      spec.p = req.p;
      const TdepResult t = tdep(gamma, spec, req.solver);
      res.diam_x = t.diam_x;
      res.diam_y = t.diam_y;
      res.solver = t.solver;
      const double denom = std::min(t.diam_x, t.diam_y);
      require_positive(denom, "smaller");
      res.raw = t.value;
      res.value = std::pow(detail::clamp_unit(t.value / denom, "rho_contracting^p"), 1.0 / req.p);
      break;
    }
    case CoefficientKind::pearson: {
      require_1d(gamma, "pearson");
      const auto x = component(gamma, false);
      const auto y = component(gamma, true);
      res.value = detail::weighted_pearson(x, y, gamma.weights(), &res.raw);
      break;
    }
    case CoefficientKind::spearman: {
      require_1d(gamma, "spearman");
      const auto rx = detail::average_ranks(component(gamma, false));
      const auto ry = detail::average_ranks(component(gamma, true));
      res.value = detail::weighted_pearson(rx, ry, gamma.weights(), &res.raw);
      break;
    }
    case CoefficientKind::dcor:
      res = dcor_result(gamma);
      break;
  }
  return res;
}

double rho_alpha(const JointDiscreteMeasure& gamma, double alpha, double p, Metric mx, Metric my,
                 SolverChoice solver) {
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_alpha;
  req.alpha = alpha;
  req.p = p;
  req.metric_x = mx;
  req.metric_y = my;
  req.solver = solver;
  return coefficient(gamma, req).value;
}

double rho_inf(const JointDiscreteMeasure& gamma, double p, Metric my) {
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_inf;
  req.p = p;
  req.metric_y = my;
  return coefficient(gamma, req).value;
}

double rho_star(const JointDiscreteMeasure& gamma, double p, Metric mx, Metric my,
                SolverChoice solver) {
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_star;
  req.p = p;
  req.metric_x = mx;
  req.metric_y = my;
  req.solver = solver;
  return coefficient(gamma, req).value;
}

double rho_contracting(const JointDiscreteMeasure& gamma, double p, Metric mx, Metric my,
                       SolverChoice solver) {
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_contracting;
  req.p = p;
  req.metric_x = mx;
  req.metric_y = my;
  req.solver = solver;
  return coefficient(gamma, req).value;
}

double pearson(const JointDiscreteMeasure& gamma) {
  CoefficientRequest req;
  req.kind = CoefficientKind::pearson;
  return coefficient(gamma, req).value;
}

double spearman(const JointDiscreteMeasure& gamma) {
  CoefficientRequest req;
  req.kind = CoefficientKind::spearman;
  return coefficient(gamma, req).value;
}

double dcor(const JointDiscreteMeasure& gamma) {
  CoefficientRequest req;
  req.kind = CoefficientKind::dcor;
  return coefficient(gamma, req).value;
}

CoefficientKind coefficient_kind_from_string(const std::string& s) {
  if (s == "rho_alpha") return CoefficientKind::rho_alpha;
  if (s == "rho_inf") return CoefficientKind::rho_inf;
  if (s == "rho_star") return CoefficientKind::rho_star;
  if (s == "rho_contracting") return CoefficientKind::rho_contracting;
  if (s == "pearson") return CoefficientKind::pearson;
  if (s == "spearman") return CoefficientKind::spearman;
  if (s == "dcor") return CoefficientKind::dcor;
  throw UsageError("unknown coefficient kind: " + s);
}

const char* to_string(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::rho_alpha: return "rho_alpha";
    case CoefficientKind::rho_inf: return "rho_inf";
    case CoefficientKind::rho_star: return "rho_star";
    case CoefficientKind::rho_contracting: return "rho_contracting";
    case CoefficientKind::pearson: return "pearson";
    case CoefficientKind::spearman: return "spearman";
    case CoefficientKind::dcor: return "dcor";
  }
  throw UsageError("unknown coefficient kind");
}

}  // namespace tdep
