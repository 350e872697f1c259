#pragma once

#include <cstddef>
#include <vector>

#include "tdep/cost.hpp"
#include "tdep/measure.hpp"

// Dense O(n*m) scan kernels. Each kernel has a serial reference and an
// OpenMP variant; the parallel versions split work by rows and keep all
// per-element and reduction arithmetic in the same order as the serial code,
// so results are bitwise identical for any thread count. tdep-bench compares
// the two.
namespace tdep::kernels {

// Worker cap: TDEP_THREADS if set, otherwise the OpenMP default.
int thread_count();

// out[i*m + j] = factor value between a-row i and b-row j.
void factor_matrix_serial(const FactorSpec& f, const double* a, std::size_t n, const double* b,
                          std::size_t m, std::size_t dim, double* out);
void factor_matrix(const FactorSpec& f, const double* a, std::size_t n, const double* b,
                   std::size_t m, std::size_t dim, double* out);

// Joint costs between the atoms of two couplings, row-major n x m.
std::vector<double> joint_cost_matrix_serial(const FactorizedCost& fc,
                                             const JointDiscreteMeasure& src,
                                             const JointDiscreteMeasure& dst);
std::vector<double> joint_cost_matrix(const FactorizedCost& fc, const JointDiscreteMeasure& src,
                                      const JointDiscreteMeasure& dst);

// Costs from src atoms to the atoms of mu (x) nu in lexicographic (j, k)
// order: out[i][j*nu.size() + k] = combine(A[i,j], B[i,k]) where A and B are
// the factor matrices of src-X vs mu and src-Y vs nu.
std::vector<double> product_cost_matrix_serial(const FactorizedCost& fc,
                                               const JointDiscreteMeasure& src,
                                               const DiscreteMeasure& mu,
                                               const DiscreteMeasure& nu);
std::vector<double> product_cost_matrix(const FactorizedCost& fc, const JointDiscreteMeasure& src,
                                        const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// sum_{i,j} wa_i wb_j M[i*m + j]
double expectation_matrix_serial(const double* m_vals, const double* wa, std::size_t n,
                                 const double* wb, std::size_t m);
double expectation_matrix(const double* m_vals, const double* wa, std::size_t n, const double* wb,
                          std::size_t m);

// sum_{i,j} w_i w_j min(mx[i*n+j], my[i*n+j]); the pairwise-minimum diameter.
double expectation_min_serial(const double* mx, const double* my, const double* w, std::size_t n);
double expectation_min(const double* mx, const double* my, const double* w, std::size_t n);

// Weighted V-statistic sums over pairwise distance matrices:
//   joint  = sum_{ij} w_i w_j dx_ij dy_ij
//   mean_x = sum_{ij} w_i w_j dx_ij        (mean_y likewise)
//   cross  = sum_i w_i (sum_j w_j dx_ij)(sum_k w_k dy_ik)
// dcov^2 = joint + mean_x*mean_y - 2*cross.
struct DcovSums {
  double joint = 0.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double cross = 0.0;
};
DcovSums dcov_sums_serial(const double* dx, const double* dy, const double* w, std::size_t n);
DcovSums dcov_sums(const double* dx, const double* dy, const double* w, std::size_t n);

}  // namespace tdep::kernels
