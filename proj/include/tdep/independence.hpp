#pragma once

#include <cstdint>
#include <vector>

#include "tdep/coefficients.hpp"
#include "tdep/measure.hpp"
#include "tdep/synth.hpp"

namespace tdep {

struct TestReport {
  double statistic = 0.0;
  std::vector<double> perm_statistics;
  // Number of permuted statistics STRICTLY above the observed one; ties do
  // not count against the null.
  std::size_t exceed_count = 0;
  int k = 0;
  int m = 0;
  bool reject = false;
  double nominal_level = 0.0;  // (k+1)/(m+1)
  std::uint64_t seed = 0;
};

// Permutation test of independence: the coefficient on (x_i, y_{sigma(i)})
// for m uniformly random permutations (repeats and the identity allowed)
// against the observed value; rejects when exceed_count <= k.
//
// Permutation i is drawn from substream (seed, permutation, i), so reports
// are reproducible and independent of evaluation order.
TestReport permutation_test(const JointDiscreteMeasure& samples, const CoefficientRequest& coeff,
                            int m, int k, std::uint64_t seed);

// Rejection fraction over `runs` independent datasets drawn from the convex
// contamination model around the given geometry. Run j uses replication
// index j for the data and a seed derived from (seed, j) for the test, so
// the estimate does not depend on scheduling.
double power_estimate(const GeometrySpec& geometry, double epsilon, const CoefficientRequest& coeff,
                      int runs, std::size_t n, int m, int k, std::uint64_t seed);

}  // namespace tdep
