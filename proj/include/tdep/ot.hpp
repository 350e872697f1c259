#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tdep/cost.hpp"
#include "tdep/measure.hpp"

namespace tdep {

struct PlanEntry {
  uint32_t src = 0;
  uint32_t dst = 0;
  double mass = 0.0;
};

// Sparse coupling between a source and a destination measure. Entries are
// sorted by (src, dst), all masses positive, and row/column sums match the
// measure weights within 1e-9. primal_cost stays within 1e-9 of a recompute
// against the cost that produced the plan.
struct TransportPlan {
  std::vector<PlanEntry> entries;
  double primal_cost = 0.0;
  std::size_t src_size = 0;
  std::size_t dst_size = 0;
};

// Kantorovich potentials: f_i + g_j <= c_ij + 1e-7 for all pairs, and
// dual_value = sum_i w_i f_i + sum_j v_j g_j.
struct DualSolution {
  std::vector<double> f;
  std::vector<double> g;
  double dual_value = 0.0;
};

struct ExactResult {
  TransportPlan plan;
  DualSolution dual;
  double gap = 0.0;  // primal - dual, certified <= 1e-7 * (1 + |primal|)
};

// Network simplex on the dense bipartite transportation graph. Arc ids are
// implicit (arc i*m+j runs from source i to sink j), so memory stays
// O(n*m) for the caller's cost matrix plus O(n+m) solver state. The solver
// object can re-solve with new costs on the same weight pair, warm-starting
// from the previous optimal basis; the permutation test leans on that.
class ExactSolver {
 public:
  ExactSolver(std::vector<double> src_weights, std::vector<double> dst_weights);
  ~ExactSolver();
  ExactSolver(ExactSolver&&) noexcept;
  ExactSolver& operator=(ExactSolver&&) noexcept;

  // cost: row-major src x dst matrix; the buffer is only read during the call.
  ExactResult solve(const double* cost);

  std::size_t src_size() const;
  std::size_t dst_size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ExactResult solve_exact(std::span<const double> src_weights, std::span<const double> dst_weights,
                        const double* cost);
ExactResult solve_exact(const JointDiscreteMeasure& src, const JointDiscreteMeasure& dst,
                        const CostSpec& spec);

// Read-only cost access for solvers that must not materialize the full
// matrix. fill_row writes all cols() entries of one row.
class CostOracle {
 public:
  virtual ~CostOracle() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void fill_row(std::size_t i, double* out) const = 0;
  virtual double cost_bound() const = 0;  // finite upper bound on all entries
};

class DenseCostOracle final : public CostOracle {
 public:
  DenseCostOracle(const double* cost, std::size_t n, std::size_t m);
  std::size_t rows() const override { return n_; }
  std::size_t cols() const override { return m_; }
  void fill_row(std::size_t i, double* out) const override;
  double cost_bound() const override;
  const double* data() const { return cost_; }

 private:
  const double* cost_;
  std::size_t n_, m_;
};

// Costs from n joint atoms to the nx*ny atoms of a product measure,
// c[i][j*ny+k] = combine(A[i,j], B[i,k]). A and B are the two factor
// matrices; op/outer_exp come from the factorized cost.
class ProductCostOracle final : public CostOracle {
 public:
  ProductCostOracle(std::vector<double> a, std::vector<double> b, std::size_t n, std::size_t nx,
                    std::size_t ny, Combine op, double outer_exp);
  std::size_t rows() const override { return n_; }
  std::size_t cols() const override { return nx_ * ny_; }
  void fill_row(std::size_t i, double* out) const override;
  double cost_bound() const override;

  double at(std::size_t i, std::size_t jk) const {
    return fc_.combine(a_[i * nx_ + jk / ny_], b_[i * ny_ + jk % ny_]);
  }
  bool additive() const { return fc_.op == Combine::add; }
  const double* a() const { return a_.data(); }
  const double* b() const { return b_.data(); }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }

 private:
  std::vector<double> a_, b_;
  std::size_t n_, nx_, ny_;
  FactorizedCost fc_;
};

struct SinkhornStage {
  double eta = 0.0;        // regularization, in units of the scaled costs
  int iterations = 0;
  double marginal_error = 0.0;  // TV violation when the stage ended
  double primal_cost = 0.0;     // cost of the truncated kernel plan
};

struct SinkhornResult {
  TransportPlan plan;
  double marginal_error = 0.0;  // TV violation after rounding (0 up to roundoff)
  std::vector<SinkhornStage> stages;
};

struct SinkhornOptions {
  double eta_start = 1e-1;
  double eta_end = 1e-3;
  double prune = 1e-15;
  int max_inner = 2000;         // iteration cap per stage
  double stage_tol = 1e-7;      // TV violation declaring a stage converged
  double fail_tol = 1e-3;       // final-stage TV violation that aborts the solve
};

// Log-domain Sinkhorn with geometric eta-scaling (ratio 1/2) on costs scaled
// to [0, 1]. Large instances run on truncated kernels with full-scan
// certificates; the plan is rounded to exact marginals at the end, which
// absorbs any residual violation up to fail_tol. Throws NumericError if the
// final stage still exceeds fail_tol after max_inner iterations.
SinkhornResult solve_sinkhorn_scaled(std::span<const double> src_weights,
                                     std::span<const double> dst_weights, const CostOracle& cost,
                                     const SinkhornOptions& opts = {});

double transport_cost(const TransportPlan& plan,
                      const std::function<double(uint32_t, uint32_t)>& cost);
double transport_cost(const TransportPlan& plan, const CostOracle& cost);

}  // namespace tdep
