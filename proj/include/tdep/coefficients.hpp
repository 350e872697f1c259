#pragma once

#include <span>
#include <string>
#include <vector>

#include "tdep/dependency.hpp"
#include "tdep/measure.hpp"

namespace tdep {

enum class CoefficientKind {
  rho_alpha,        // additive transport correlation at a fixed alpha
  rho_inf,          // marginal transport correlation (alpha -> inf limit, exact grouping)
  rho_star,         // diameter-normalized (isometric) transport correlation
  rho_contracting,  // alpha = 1 with min-diameter normalization
  pearson,
  spearman,
  dcor,
};

struct CoefficientRequest {
  CoefficientKind kind = CoefficientKind::rho_alpha;
  double alpha = 1.0;  // rho_alpha only
  double p = 2.0;
  Metric metric_x = Metric::euclidean;
  Metric metric_y = Metric::euclidean;
  SolverChoice solver = SolverChoice::automatic;
};

struct CoefficientResult {
  double value = 0.0;
  // Raw dependence statistic before normalization: tau for transport kinds,
  // dcov^2 for dcor, the covariance for pearson/spearman.
  double raw = 0.0;
  double diam_x = 0.0;  // d_X^p / d_Y^p diameters of the marginals
  double diam_y = 0.0;
  SolverKind solver = SolverKind::exact;
};

CoefficientResult coefficient(const JointDiscreteMeasure& gamma, const CoefficientRequest& req);

// Convenience entry points; all values land in [0,1] (clamped within 1e-7
// drift, larger excess throws NumericError).
double rho_alpha(const JointDiscreteMeasure& gamma, double alpha, double p,
                 Metric mx = Metric::euclidean, Metric my = Metric::euclidean,
                 SolverChoice solver = SolverChoice::automatic);
double rho_inf(const JointDiscreteMeasure& gamma, double p, Metric my = Metric::euclidean);
double rho_star(const JointDiscreteMeasure& gamma, double p, Metric mx = Metric::euclidean,
                Metric my = Metric::euclidean, SolverChoice solver = SolverChoice::automatic);
double rho_contracting(const JointDiscreteMeasure& gamma, double p,
                       Metric mx = Metric::euclidean, Metric my = Metric::euclidean,
                       SolverChoice solver = SolverChoice::automatic);

// Classical comparators on the same weighted measure. pearson and spearman
// require 1-d marginals; spearman ranks atoms with average-rank ties and
// correlates the ranks under the atom weights.
double pearson(const JointDiscreteMeasure& gamma);
double spearman(const JointDiscreteMeasure& gamma);
// Euclidean distance correlation, V-statistic form.
double dcor(const JointDiscreteMeasure& gamma);

CoefficientKind coefficient_kind_from_string(const std::string& s);
const char* to_string(CoefficientKind k);

namespace detail {
// Shared pieces reused by the permutation-test fast paths so that permuted
// statistics match coefficient() bit for bit where possible.
double clamp_unit(double ratio, const char* what);
double weighted_pearson(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w, double* raw);
std::vector<double> average_ranks(std::span<const double> v);
}  // namespace detail

}  // namespace tdep
