#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace tdep {

// Compensated (Neumaier) summation. Weight bookkeeping sums up to 10^6 terms
// and the class invariants are tighter than what naive summation guarantees
// at that length.
double stable_sum(std::span<const double> xs);

// A finitely supported probability measure on R^d. Atoms are stored row-major
// and are immutable after construction; duplicates are kept as-is (weight is
// split, never merged) so empirical-measure semantics stay exact.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  // Throws DataError on non-finite coordinates, negative weights, or a weight
  // sum farther than 1e-9 from 1. Sums within 1e-9 are renormalized.
  DiscreteMeasure(std::vector<double> points, std::vector<double> weights, std::size_t dim);

  static DiscreteMeasure point_mass(std::vector<double> point);
  // Uniform weights 1/n over the given atoms.
  static DiscreteMeasure uniform(std::vector<double> points, std::size_t dim);

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return dim_; }
  const double* point(std::size_t i) const { return points_.data() + i * dim_; }
  std::span<const double> point_span(std::size_t i) const { return {point(i), dim_}; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
};

// A finitely supported probability measure on R^r x R^q, i.e. a coupling
// candidate or an empirical sample of pairs. The X and Y parts are stored
// separately; atom i is (x_point(i), y_point(i)).
class JointDiscreteMeasure {
 public:
  JointDiscreteMeasure() = default;
  JointDiscreteMeasure(std::vector<double> x_points, std::vector<double> y_points,
                       std::vector<double> weights, std::size_t x_dim, std::size_t y_dim);

  std::size_t size() const { return weights_.size(); }
  std::size_t x_dim() const { return x_dim_; }
  std::size_t y_dim() const { return y_dim_; }
  const double* x_point(std::size_t i) const { return xs_.data() + i * x_dim_; }
  const double* y_point(std::size_t i) const { return ys_.data() + i * y_dim_; }
  const std::vector<double>& x_points() const { return xs_; }
  const std::vector<double>& y_points() const { return ys_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

 private:
  std::size_t x_dim_ = 0, y_dim_ = 0;
  std::vector<double> xs_, ys_;
  std::vector<double> weights_;
};

// Atom budget for operations whose output size is a product of input sizes.
inline constexpr std::size_t kDefaultAtomBudget = 1'000'000;

// Empirical measure of n samples: uniform weights, input order kept.
JointDiscreteMeasure from_samples(std::vector<double> xs, std::vector<double> ys,
                                  std::size_t x_dim, std::size_t y_dim);

// Projections. Atoms are not merged: the X-marginal of n atoms has n atoms.
std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const JointDiscreteMeasure& gamma);

// mu (x) nu with n*m atoms (x_i, y_j), weight w_i*v_j, ordered lexicographically
// by (i, j). Throws CapacityError when n*m exceeds the budget.
JointDiscreteMeasure product(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             std::size_t atom_budget = kDefaultAtomBudget);

// (1-t) gamma0 + t gamma1 by concatenation; endpoints return the inputs as-is.
JointDiscreteMeasure mixture(const JointDiscreteMeasure& gamma0, const JointDiscreteMeasure& gamma1,
                             double t);

// gamma * (kappa_x (x) kappa_y): atoms (x_i + a_j, y_i + b_k) with weights
// w_i*u_j*v_k, ordered lexicographically by (i, j, k).
JointDiscreteMeasure convolve(const JointDiscreteMeasure& gamma, const DiscreteMeasure& kappa_x,
                              const DiscreteMeasure& kappa_y,
                              std::size_t atom_budget = kDefaultAtomBudget);

// Affine map z -> A z + b used by push_forward.
struct AffineMap {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;  // rows x cols, row-major
  std::vector<double> b;  // rows

  static AffineMap identity(std::size_t dim);
  static AffineMap translation(std::vector<double> shift);
  static AffineMap linear(std::vector<double> a, std::size_t rows, std::size_t cols);
  void apply(const double* in, double* out) const;
};

JointDiscreteMeasure push_forward(const JointDiscreteMeasure& gamma, const AffineMap& fx,
                                  const AffineMap& fy);

// Merge atoms at identical coordinates (first-occurrence order, weights
// summed). tol = 0 compares canonicalized bit patterns; tol > 0 merges atoms
// that land in the same cell of a tol-spaced grid. Opt-in; nothing in the
// library coalesces implicitly.
DiscreteMeasure coalesce(const DiscreteMeasure& mu, double tol = 0.0);
JointDiscreteMeasure coalesce(const JointDiscreteMeasure& gamma, double tol = 0.0);

// View with the roles of X and Y exchanged.
JointDiscreteMeasure swap_xy(const JointDiscreteMeasure& gamma);

}  // namespace tdep
