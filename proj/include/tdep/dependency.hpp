#pragma once

#include <functional>
#include <optional>

#include "tdep/cost.hpp"
#include "tdep/measure.hpp"
#include "tdep/ot.hpp"

namespace tdep {

enum class SolverKind { exact, sinkhorn };
enum class SolverChoice { automatic, exact, sinkhorn };

// auto picks the exact solver up to this many cost-matrix entries.
constexpr std::size_t kAutoExactLimit = 4'000'000;
// Forced-exact ceiling: beyond this the dense cost matrix alone breaks memory.
constexpr std::size_t kExactHardLimit = 200'000'000;

struct TdepResult {
  double value = 0.0;  // transport cost from gamma to the product of its marginals
  std::optional<TransportPlan> plan;
  // Upper bounds, populated for cost families with well-defined marginal
  // costs (additive, raw_power, normalized_isometric) on instances small
  // enough for the O(n^2) sums.
  std::optional<double> bound_resample;  // redraw y independently: diam_{c_Y} nu
  std::optional<double> bound_diameter;  // expected min marginal cost over gamma (x) gamma
  std::optional<double> bound_marginal;  // Y-marginal transport dependency
  double diam_x = 0.0;
  double diam_y = 0.0;
  SolverKind solver = SolverKind::exact;
};

// Transport cost between gamma and the product of its (unmerged) marginals.
// The destination has size()^2 atoms indexed i*n + k, so the product must fit
// the atom budget. keep_plan stores the optimal plan in the result.
TdepResult tdep(const JointDiscreteMeasure& gamma, const CostSpec& spec,
                SolverChoice choice = SolverChoice::automatic, bool keep_plan = false);

// Cost of replacing y by an independent draw from nu while keeping x. Equals
// the c_Y-diameter of nu, and upper-bounds tdep for any joint cost whose
// restriction to equal x coordinates is c_Y.
double bound_resample(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cy);

// (gamma (x) gamma) min(c_X, c_Y): the expected cheaper marginal move between
// two independent atoms. Never exceeds min(diam_x, diam_y) and upper-bounds
// tdep for additive-type costs.
double bound_diameter(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cx,
                      const MarginalCostSpec& cy);

// Y-marginal transport dependency: atoms are grouped by equal x coordinate
// (bitwise after -0 canonicalization; group_tol > 0 snaps coordinates to a
// grid first) and each conditional is transported to nu exactly.
double marginal_tdep(const JointDiscreteMeasure& gamma, const MarginalCostSpec& cy,
                     double group_tol = 0.0);

// The coupling behind bound_resample: atom i keeps its x and spreads w_i*nu_k
// over the product atoms (i, k). primal_cost is evaluated under spec.
TransportPlan resample_plan(const JointDiscreteMeasure& gamma, const CostSpec& spec);

// tdep under the additive cost (alpha_n * d_X + d_Y)^p with alpha_n taken
// from the schedule at n = gamma.size(). The default schedule n^(1/(2p))
// grows slowly enough for the marginal-tdep limit while keeping finite-n
// cost scales moderate.
double tdep_alpha_schedule(const JointDiscreteMeasure& samples, Metric dx, Metric dy, double p,
                           const std::function<double(std::size_t)>& alpha_of_n = {});

}  // namespace tdep
