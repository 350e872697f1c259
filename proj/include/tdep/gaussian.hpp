#pragma once

#include <cstddef>
#include <vector>

#include "tdep/measure.hpp"
#include "tdep/rng.hpp"

namespace tdep {

// Gaussian coupling N(mean, [[sigma11, sigma12], [sigma12^T, sigma22]]) with
// an r-dimensional X block and a q-dimensional Y block. Blocks are row-major.
struct GaussianSpec {
  std::size_t r = 1;
  std::size_t q = 1;
  std::vector<double> mean;  // r+q entries; empty means zero
  std::vector<double> sigma11;
  std::vector<double> sigma12;
  std::vector<double> sigma22;

  static GaussianSpec bivariate(double sigma1, double sigma2, double rho);
};

// Transport dependency of the Gaussian coupling under squared Euclidean cost:
// 2 tr(S11) + 2 tr(S22) - 2 tr(sqrt([[S11^2, S11 S12], [S22 S21, S22^2]])).
// The block matrix is not symmetric in general; its square root is computed
// to relative residual 1e-9 or a NumericError is thrown.
double gauss_tdep(const GaussianSpec& spec);

// Same under the weighted cost alpha*|dx|^2 + |dy|^2, obtained by scaling
// sigma11 by alpha and sigma12 by sqrt(alpha).
double gauss_tdep_weighted(const GaussianSpec& spec, double alpha);

// Closed form for r = q = 1:
// 2 (s1^2 + s2^2 - sqrt(s1^4 + s2^4 + 2 s1^2 s2^2 sqrt(1 - rho^2))).
double gauss_tdep_bivariate(double sigma1, double sigma2, double rho);

// Limit of the weighted value as alpha -> inf: 2 s2^2 (1 - sqrt(1 - rho^2)).
double gauss_marginal_tdep_bivariate(double sigma2, double rho);

// Mutual information -log(1 - rho^2)/2; diverges at |rho| = 1.
double gauss_mutual_info(double rho);

// Euclidean distance covariance of the bivariate coupling with equal scales:
// (4 s^2 / pi) (rho asin(rho) + sqrt(1-rho^2) - rho asin(rho/2) - sqrt(4-rho^2) + 1).
double gauss_dcov2_bivariate(double sigma, double rho);

// n iid draws as a uniformly weighted joint measure (x = first r coordinates).
// Uses an eigendecomposition transform, so singular covariances are fine.
JointDiscreteMeasure gauss_sample(const GaussianSpec& spec, std::size_t n, Rng& rng);

}  // namespace tdep
