#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "tdep/measure.hpp"

namespace tdep {

enum class Metric { euclidean, l1, linf };

// Cost families on the product space Z = X x Y.
//   additive:             c = (alpha * d_X^beta_x + d_Y)^p
//   raw_power:            c = d^p with d the chosen metric on concatenated
//                         coordinates (both marginals must use the same one)
//   min_marginal:         c = min((alpha * d_X^beta_x)^p, d_Y^p)
//   normalized_isometric: c = (d_X / Dx^{1/p} + d_Y / Dy^{1/p})^p where Dx, Dy
//                         are the marginal p-diameters cached in the spec
enum class CostFamily { additive, raw_power, min_marginal, normalized_isometric };

struct CostSpec {
  CostFamily family = CostFamily::additive;
  Metric metric_x = Metric::euclidean;
  Metric metric_y = Metric::euclidean;
  // alpha may be +infinity; that is a routing marker for the marginal limit
  // and never enters arithmetic. eval_cost rejects it.
  double alpha = 1.0;
  double beta_x = 1.0;
  double p = 2.0;
  // Diameter normalizers 1/D^{1/p}, filled by make_isometric.
  double x_scale = 1.0;
  double y_scale = 1.0;

  bool marginal_limit() const { return std::isinf(alpha); }
};

// Cost on a single marginal space: (pre_scale * d^beta)^p.
struct MarginalCostSpec {
  Metric metric = Metric::euclidean;
  double pre_scale = 1.0;
  double beta = 1.0;
  double p = 2.0;
};

// x^e with the cheap exponents special-cased and 0^e pinned to 0.
inline double powp(double x, double e) {
  if (e == 1.0) return x;
  if (e == 2.0) return x * x;
  if (x == 0.0) return 0.0;
  return std::pow(x, e);
}

double metric_dist(Metric m, const double* a, const double* b, std::size_t dim);
double marginal_cost(const MarginalCostSpec& spec, const double* a, const double* b,
                     std::size_t dim);

// Joint cost c((x1,y1),(x2,y2)). Throws UsageError for alpha = inf or a
// raw_power spec whose two metrics differ.
double eval_cost(const CostSpec& spec, const double* x1, const double* y1, const double* x2,
                 const double* y2, std::size_t r, std::size_t q);

// Marginal slices used by diameters and bounds. For min_marginal these are
// the two arguments of the min, not slices of the joint cost (whose slices
// vanish identically).
MarginalCostSpec x_marginal_cost(const CostSpec& spec);
MarginalCostSpec y_marginal_cost(const CostSpec& spec);

// Expected cost between two independent draws, (mu (x) mu) c. This is the
// c-diameter used in all bounds and normalizations.
double diameter(const DiscreteMeasure& mu, const MarginalCostSpec& cost);

// Dense joint-cost matrix between the atoms of two couplings, row-major
// src.size() x dst.size().
std::vector<double> cost_matrix(const CostSpec& spec, const JointDiscreteMeasure& src,
                                const JointDiscreteMeasure& dst);

// alpha_* = (diam_{d_Y^p} nu / diam_{d_X^p} mu)^{1/p}. Zero X-diameter is a
// DataError; zero Y-diameter returns 0 and callers must reject.
double isometric_alpha(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                       Metric metric_x, Metric metric_y);

// Fills x_scale/y_scale from the marginal p-diameters and sets the family to
// normalized_isometric. Both diameters must be positive.
CostSpec make_isometric(CostSpec base, const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Solvers work on two factor matrices A (X part) and B (Y part) combined
// pointwise; this avoids materializing n x (n*n) joint matrices.
enum class Combine {
  add,      // A + B                  (outer_exp == 1)
  pow_sum,  // (A + B)^outer_exp
  min_of,   // min(A, B)
  max_pow,  // max(A, B)^outer_exp
};

// One factor: value = scale * d^beta under the given metric. beta == 2 with
// the Euclidean metric skips the sqrt/square round trip.
struct FactorSpec {
  Metric metric = Metric::euclidean;
  double scale = 1.0;
  double beta = 1.0;
};

struct FactorizedCost {
  FactorSpec x_factor;
  FactorSpec y_factor;
  Combine op = Combine::pow_sum;
  double outer_exp = 1.0;

  double combine(double a, double b) const {
    switch (op) {
      case Combine::add: return a + b;
      case Combine::pow_sum: return powp(a + b, outer_exp);
      case Combine::min_of: return a < b ? a : b;
      case Combine::max_pow: return powp(a > b ? a : b, outer_exp);
    }
    return 0.0;
  }
};

// Factor representation of a joint cost spec; same rejection rules as
// eval_cost.
FactorizedCost factorize(const CostSpec& spec);

double factor_value(const FactorSpec& f, const double* a, const double* b, std::size_t dim);

const char* to_string(Metric m);
const char* to_string(CostFamily f);
Metric metric_from_string(const std::string& s);
CostFamily family_from_string(const std::string& s);

}  // namespace tdep
