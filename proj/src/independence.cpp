#include "tdep/independence.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <utility>

#include "tdep/cost.hpp"
#include "tdep/error.hpp"
#include "tdep/kernels.hpp"
#include "tdep/ot.hpp"
#include "tdep/rng.hpp"

namespace tdep {

namespace {

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) {
  std::uint64_t s = seed + 0x9e3779b97f4a7c15ull * (run + 1);
  return detail::splitmix64(s);
}

CostSpec transport_spec(const CoefficientRequest& req, const DiscreteMeasure& mu,
                        const DiscreteMeasure& nu) {
  CostSpec spec;
  spec.metric_x = req.metric_x;
  spec.metric_y = req.metric_y;
  spec.p = req.p;
  switch (req.kind) {
    case CoefficientKind::rho_alpha:
      if (!(req.alpha > 0.0) || !std::isfinite(req.alpha)) {
        throw UsageError("alpha must be positive and finite (use rho_inf for the limit)");
      }
      spec.family = CostFamily::additive;
      spec.alpha = req.alpha;
      break;
    case CoefficientKind::rho_contracting:
      spec.family = CostFamily::additive;
      spec.alpha = 1.0;
      break;
    case CoefficientKind::rho_star:
      spec = make_isometric(spec, mu, nu);
      break;
    default:
      throw UsageError("not a transport coefficient");
  }
  return spec;
}

// Evaluates the coefficient on (x_i, y_{sigma(i)}) for many sigma, reusing
// whatever the statistic allows: the factor matrices and simplex basis for
// the transport kinds under the exact solver (the cost matrix is a gather of
// fixed factor rows, and permutations keep the old basis primal feasible),
// the distance matrices for dcor, values/ranks for pearson and spearman.
// Anything else falls back to rebuilding the measure per permutation.
class Evaluator {
 public:
  Evaluator(const JointDiscreteMeasure& gamma, const CoefficientRequest& req)
      : gamma_(gamma), req_(req), n_(gamma.size()) {
    if (n_ == 0) throw DataError("empty sample");
    if (!(req.p > 0.0) || !std::isfinite(req.p)) throw UsageError("p must be positive and finite");
    const bool transport = req.kind == CoefficientKind::rho_alpha ||
                           req.kind == CoefficientKind::rho_star ||
                           req.kind == CoefficientKind::rho_contracting;
    const std::size_t entries = n_ * n_ * n_;
    const bool exact = req.solver == SolverChoice::exact ||
                       (req.solver == SolverChoice::automatic && entries <= kAutoExactLimit);
    if (transport && exact) {
      if (entries > kExactHardLimit) {
        throw CapacityError("dense cost matrix would need " + std::to_string(entries) +
                            " entries");
      }
      setup_transport();
    } else if (req.kind == CoefficientKind::dcor) {
      setup_dcor();
    } else if (req.kind == CoefficientKind::pearson || req.kind == CoefficientKind::spearman) {
      setup_linear();
    } else {
      mode_ = Mode::general;
    }
  }

  double operator()(const std::vector<std::uint32_t>& sigma) {
    switch (mode_) {
      case Mode::transport_exact: return eval_transport(sigma);
      case Mode::dcor: return eval_dcor(sigma);
      case Mode::linear: return eval_linear(sigma);
      case Mode::general: return eval_general(sigma);
    }
    throw UsageError("unreachable");
  }

 private:
  enum class Mode { transport_exact, dcor, linear, general };

  void setup_transport() {
    mode_ = Mode::transport_exact;
    auto [mu, nu] = marginals(gamma_);
    const CostSpec spec = transport_spec(req_, mu, nu);
    fc_ = factorize(spec);
    const double diam_x = diameter(mu, x_marginal_cost(spec));
    const double diam_y = diameter(nu, y_marginal_cost(spec));
    switch (req_.kind) {
      case CoefficientKind::rho_alpha: denom_ = diam_y; break;
      case CoefficientKind::rho_star: denom_ = 1.0; break;
      default: denom_ = std::min(diam_x, diam_y); break;
    }
    if (!(denom_ > 0.0)) {
      throw DataError("normalizing marginal is a point mass; coefficient undefined");
    }
    a_.resize(n_ * n_);
    b_.resize(n_ * n_);
    kernels::factor_matrix(fc_.x_factor, gamma_.x_points().data(), n_, gamma_.x_points().data(),
                           n_, gamma_.x_dim(), a_.data());
    kernels::factor_matrix(fc_.y_factor, gamma_.y_points().data(), n_, gamma_.y_points().data(),
                           n_, gamma_.y_dim(), b_.data());
    const std::vector<double>& w = gamma_.weights();
    std::vector<double> dst(n_ * n_);
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t k = 0; k < n_; ++k) dst[j * n_ + k] = w[j] * w[k];
    }
    solver_.emplace(w, std::move(dst));
    cost_.resize(n_ * n_ * n_);
  }

  void setup_dcor() {
    mode_ = Mode::dcor;
    a_.resize(n_ * n_);
    b_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* xi = gamma_.x_point(i);
      const double* yi = gamma_.y_point(i);
      for (std::size_t j = 0; j < n_; ++j) {
        a_[i * n_ + j] = metric_dist(Metric::euclidean, xi, gamma_.x_point(j), gamma_.x_dim());
        b_[i * n_ + j] = metric_dist(Metric::euclidean, yi, gamma_.y_point(j), gamma_.y_dim());
      }
    }
    const kernels::DcovSums sxx =
        kernels::dcov_sums(a_.data(), a_.data(), gamma_.weights().data(), n_);
    vxx_ = sxx.joint + sxx.mean_x * sxx.mean_y - 2.0 * sxx.cross;
    if (!(vxx_ > 0.0)) throw DataError("dcor undefined: a marginal has zero distance variance");
    cost_.resize(n_ * n_);  // permuted y-distance scratch
  }

  void setup_linear() {
    mode_ = Mode::linear;
    if (gamma_.x_dim() != 1 || gamma_.y_dim() != 1) {
      throw UsageError(std::string(to_string(req_.kind)) + " requires 1-d marginals");
    }
    a_.assign(gamma_.x_points().begin(), gamma_.x_points().end());
    b_.assign(gamma_.y_points().begin(), gamma_.y_points().end());
    if (req_.kind == CoefficientKind::spearman) {
      a_ = detail::average_ranks(a_);
      b_ = detail::average_ranks(b_);
    }
    cost_.resize(n_);  // gathered y scratch
  }

  double eval_transport(const std::vector<std::uint32_t>& sigma) {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
      const double* arow = a_.data() + i * n;
      const double* brow = b_.data() + static_cast<std::size_t>(sigma[i]) * n;
      double* crow = cost_.data() + i * n * n;
      if (fc_.op == Combine::add) {
        for (std::size_t j = 0; j < n; ++j) {
          const double aij = arow[j];
          double* out = crow + j * n;
          for (std::size_t k = 0; k < n; ++k) out[k] = aij + brow[k];
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          const double aij = arow[j];
          double* out = crow + j * n;
          for (std::size_t k = 0; k < n; ++k) out[k] = fc_.combine(aij, brow[k]);
        }
      }
    }
    const ExactResult res = solver_->solve(cost_.data());
    const double ratio = detail::clamp_unit(res.plan.primal_cost / denom_, "permuted statistic");
    return std::pow(ratio, 1.0 / req_.p);
  }

  double eval_dcor(const std::vector<std::uint32_t>& sigma) {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = b_.data() + static_cast<std::size_t>(sigma[i]) * n;
      double* out = cost_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out[j] = src[sigma[j]];
    }
    const double* w = gamma_.weights().data();
    const kernels::DcovSums sxy = kernels::dcov_sums(a_.data(), cost_.data(), w, n);
    const kernels::DcovSums syy = kernels::dcov_sums(cost_.data(), cost_.data(), w, n);
    double vxy = sxy.joint + sxy.mean_x * sxy.mean_y - 2.0 * sxy.cross;
    if (vxy < 0.0) {
      if (vxy <= -1e-9) throw NumericError("dcov^2 came out negative: " + std::to_string(vxy));
      vxy = 0.0;
    }
    const double vyy = syy.joint + syy.mean_x * syy.mean_y - 2.0 * syy.cross;
    if (!(vyy > 0.0)) throw DataError("dcor undefined: a marginal has zero distance variance");
    return detail::clamp_unit(std::sqrt(vxy) / std::pow(vxx_ * vyy, 0.25), "dcor");
  }

  double eval_linear(const std::vector<std::uint32_t>& sigma) {
    for (std::size_t i = 0; i < n_; ++i) cost_[i] = b_[sigma[i]];
    return detail::weighted_pearson(a_, cost_, gamma_.weights(), nullptr);
  }

  double eval_general(const std::vector<std::uint32_t>& sigma) {
    const std::size_t q = gamma_.y_dim();
    std::vector<double> ys(n_ * q);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* src = gamma_.y_point(sigma[i]);
      std::copy(src, src + q, ys.data() + i * q);
    }
    JointDiscreteMeasure permuted(gamma_.x_points(), std::move(ys), gamma_.weights(),
                                  gamma_.x_dim(), q);
    return coefficient(permuted, req_).value;
  }

  const JointDiscreteMeasure& gamma_;
  CoefficientRequest req_;
  std::size_t n_;
  Mode mode_ = Mode::general;
  FactorizedCost fc_;
  double denom_ = 1.0;
  double vxx_ = 0.0;
  std::vector<double> a_, b_, cost_;
  std::optional<ExactSolver> solver_;
};

}  // namespace

TestReport permutation_test(const JointDiscreteMeasure& samples, const CoefficientRequest& coeff,
                            int m, int k, std::uint64_t seed) {
  if (m < 1) throw UsageError("m must be at least 1");
  if (k < 0 || k > m) throw UsageError("k must lie in [0, m]");
  Evaluator eval(samples, coeff);
  std::vector<std::uint32_t> identity(samples.size());
  std::iota(identity.begin(), identity.end(), 0u);
  TestReport rep;
  rep.statistic = eval(identity);
  rep.perm_statistics.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Rng rng = Rng::substream(seed, rngstream::permutation, static_cast<std::uint64_t>(i));
    const std::vector<std::uint32_t> sigma = rng.permutation(samples.size());
    rep.perm_statistics[static_cast<std::size_t>(i)] = eval(sigma);
  }
  rep.exceed_count = static_cast<std::size_t>(
      std::count_if(rep.perm_statistics.begin(), rep.perm_statistics.end(),
                    [&](double v) { return v > rep.statistic; }));
  rep.k = k;
  rep.m = m;
  rep.reject = rep.exceed_count <= static_cast<std::size_t>(k);
  rep.nominal_level = static_cast<double>(k + 1) / static_cast<double>(m + 1);
  rep.seed = seed;
  return rep;
}

double power_estimate(const GeometrySpec& geometry, double epsilon,
                      const CoefficientRequest& coeff, int runs, std::size_t n, int m, int k,
                      std::uint64_t seed) {
  if (runs < 1) throw UsageError("runs must be at least 1");
  int rejections = 0;
  std::exception_ptr error = nullptr;
  // Exceptions must not unwind across the parallel region.
#pragma omp parallel for reduction(+ : rejections) schedule(dynamic)
  for (int run = 0; run < runs; ++run) {
    try {
      const JointDiscreteMeasure data =
          convex_contaminate(geometry, epsilon, n, seed, static_cast<std::uint64_t>(run));
      const TestReport rep =
          permutation_test(data, coeff, m, k, run_seed(seed, static_cast<std::uint64_t>(run)));
      rejections += rep.reject ? 1 : 0;
    } catch (...) {
#pragma omp critical(tdep_power_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return static_cast<double>(rejections) / static_cast<double>(runs);
}

}  // namespace tdep
