#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tdep/measure.hpp"

namespace tdep {

// Synthetic joint distributions for benchmarks. Planar kinds live in
// [0,1]^2 with an x-marginal of Unif[0,1] where the shape allows it.
//
// Parametrizations of circle, cross, spiral, and pretzel are our own fixed
// choices (documented at the sampler); treat them as qualitative shapes.
enum class GeometryKind {
  identity,        // y = x
  zigzag,          // y = f_n(x), n segments of alternating slope +-n
  polynomial,      // y = sum_j coefficients[j] x^j
  sine,            // y = 1/2 + 1/2 sin(slope (2x - 1)), max slope = slope
  circle,          // uniform arc length, center (1/2,1/2), radius 0.45
  cross,           // even mixture of the two diagonals of [0,1]^2
  spiral,          // uniform arc length Archimedean spiral, 1.5 turns
  pretzel,         // two overlapping loops (figure eight), uniform parameter
  sphere,          // uniform on S^{r+q-1}, x = first r coords, y = last q
  uniform_noise,   // independent Unif[0,1]^r x Unif[0,1]^q
  linear_highdim,  // x ~ Unif[0,1]^r, y = first q coordinates of x
};

struct GeometrySpec {
  GeometryKind kind = GeometryKind::identity;
  int segments = 1;    // zigzag
  double slope = 3.0;  // sine
  // polynomial; default is the cubic 3x - 6x^2 + 4x^3 mapping [0,1] onto
  // itself monotonically with maximal slope 3.
  std::vector<double> coefficients = {0.0, 3.0, -6.0, 4.0};
  std::size_t r = 1;  // sphere / uniform_noise / linear_highdim
  std::size_t q = 1;
};

// n iid draws, deterministic under (seed, index). The index selects an
// independent replication (run number) without touching the seed, so sweeps
// stay reproducible no matter how runs are scheduled.
JointDiscreteMeasure sample_geometry(const GeometrySpec& spec, std::size_t n, std::uint64_t seed,
                                     std::uint64_t index = 0);

// Convex contamination: each atom is an independent-marginals draw with
// probability epsilon, a geometry draw otherwise. epsilon = 0 returns the
// plain geometry sample bit for bit.
JointDiscreteMeasure convex_contaminate(const GeometrySpec& spec, double epsilon, std::size_t n,
                                        std::uint64_t seed, std::uint64_t index = 0);

// Geometry sample plus N(0, sigma^2) perturbation on every coordinate.
JointDiscreteMeasure gaussian_noise(const GeometrySpec& spec, double sigma, std::size_t n,
                                    std::uint64_t seed, std::uint64_t index = 0);

// Exact zigzag curve value; exposed so tests can check samples lie on it.
double zigzag_value(int segments, double x);

GeometryKind geometry_kind_from_string(const std::string& s);
const char* to_string(GeometryKind k);

}  // namespace tdep
