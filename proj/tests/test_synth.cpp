#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "tdep/error.hpp"
#include "tdep/measure.hpp"
#include "tdep/synth.hpp"

using namespace tdep;

namespace {

bool same_bits(const JointDiscreteMeasure& a, const JointDiscreteMeasure& b) {
  return a.size() == b.size() && a.x_points() == b.x_points() && a.y_points() == b.y_points();
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("zigzag curve values") {
  CHECK(zigzag_value(1, 0.25) == doctest::Approx(0.25));
  CHECK(zigzag_value(1, 1.0) == doctest::Approx(1.0));
  CHECK(zigzag_value(3, 0.0) == doctest::Approx(0.0));
  CHECK(zigzag_value(3, 1.0 / 3.0) == doctest::Approx(1.0));
  CHECK(zigzag_value(3, 0.5) == doctest::Approx(0.5));
  CHECK(zigzag_value(3, 2.0 / 3.0) == doctest::Approx(0.0));
  CHECK(zigzag_value(3, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("zigzag is exactly n-lipschitz and hits the full range") {
  for (int n : {1, 3, 5}) {
    for (int i = 0; i < 400; ++i) {
      double a = i / 400.0, b = (i + 1) / 400.0;
      double va = zigzag_value(n, a), vb = zigzag_value(n, b);
      CHECK(std::abs(vb - va) <= n * (b - a) + 1e-12);
      CHECK(va >= 0.0);
      CHECK(va <= 1.0);
    }
  }
}

TEST_CASE("geometry samples sit on their curves") {
  GeometrySpec zig{GeometryKind::zigzag, 3};
  auto gz = sample_geometry(zig, 200, 5);
  for (std::size_t i = 0; i < gz.size(); ++i)
    CHECK(gz.y_point(i)[0] == zigzag_value(3, gz.x_point(i)[0]));

  GeometrySpec ident;
  auto gi = sample_geometry(ident, 50, 5);
  for (std::size_t i = 0; i < gi.size(); ++i) CHECK(gi.y_point(i)[0] == gi.x_point(i)[0]);

  GeometrySpec poly{GeometryKind::polynomial};
  auto gp = sample_geometry(poly, 100, 5);
  for (std::size_t i = 0; i < gp.size(); ++i) {
    double x = gp.x_point(i)[0];
    double want = 3.0 * x - 6.0 * x * x + 4.0 * x * x * x;
    CHECK(gp.y_point(i)[0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(gp.y_point(i)[0] >= -1e-12);
    CHECK(gp.y_point(i)[0] <= 1.0 + 1e-12);
  }

  GeometrySpec circ{GeometryKind::circle};
  auto gc = sample_geometry(circ, 100, 5);
  for (std::size_t i = 0; i < gc.size(); ++i) {
    double dx = gc.x_point(i)[0] - 0.5, dy = gc.y_point(i)[0] - 0.5;
    CHECK(std::sqrt(dx * dx + dy * dy) == doctest::Approx(0.45).epsilon(1e-12));
  }

  GeometrySpec cross{GeometryKind::cross};
  auto gx = sample_geometry(cross, 100, 5);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    double x = gx.x_point(i)[0], y = gx.y_point(i)[0];
    CHECK((y == x || y == doctest::Approx(1.0 - x).epsilon(1e-15)));
  }
}

TEST_CASE("high dimensional kinds") {
  GeometrySpec sphere{GeometryKind::sphere};
  sphere.r = 3;
  sphere.q = 2;
  auto gs = sample_geometry(sphere, 80, 7);
  CHECK(gs.x_dim() == 3);
  CHECK(gs.y_dim() == 2);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < 3; ++d) s += gs.x_point(i)[d] * gs.x_point(i)[d];
    for (std::size_t d = 0; d < 2; ++d) s += gs.y_point(i)[d] * gs.y_point(i)[d];
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
  }

  GeometrySpec lin{GeometryKind::linear_highdim};
  lin.r = 5;
  lin.q = 2;
  auto gl = sample_geometry(lin, 40, 7);
  for (std::size_t i = 0; i < gl.size(); ++i) {
    CHECK(gl.y_point(i)[0] == gl.x_point(i)[0]);
    CHECK(gl.y_point(i)[1] == gl.x_point(i)[1]);
  }

  GeometrySpec noise{GeometryKind::uniform_noise};
  noise.r = 2;
  noise.q = 3;
  auto gn = sample_geometry(noise, 40, 7);
  CHECK(gn.x_dim() == 2);
  CHECK(gn.y_dim() == 3);
}

TEST_CASE("sampling is deterministic in seed and index") {
  GeometrySpec spec{GeometryKind::zigzag, 3};
  CHECK(same_bits(sample_geometry(spec, 30, 11), sample_geometry(spec, 30, 11)));
  CHECK(same_bits(sample_geometry(spec, 30, 11, 2), sample_geometry(spec, 30, 11, 2)));
  CHECK(!same_bits(sample_geometry(spec, 30, 11), sample_geometry(spec, 30, 12)));
  CHECK(!same_bits(sample_geometry(spec, 30, 11, 0), sample_geometry(spec, 30, 11, 1)));
}

TEST_CASE("x marginal is roughly uniform") {
  // Kolmogorov-Smirnov distance of the empirical x-cdf from Unif[0,1]
  for (auto kind : {GeometryKind::identity, GeometryKind::zigzag}) {
    GeometrySpec spec{kind, 3};
    auto gamma = sample_geometry(spec, 10000, 13);
    std::vector<double> xs = gamma.x_points();
    std::sort(xs.begin(), xs.end());
    double dn = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double ecdf_hi = static_cast<double>(i + 1) / xs.size();
      double ecdf_lo = static_cast<double>(i) / xs.size();
      dn = std::max(dn, std::max(std::abs(ecdf_hi - xs[i]), std::abs(xs[i] - ecdf_lo)));
    }
    CHECK(dn < 0.025);  // 1% critical value is about 1.63/sqrt(n) = 0.0163
  }
}

TEST_CASE("contamination replaces the expected fraction of atoms") {
  GeometrySpec spec{GeometryKind::zigzag, 3};
  std::size_t n = 10000;

  auto clean = convex_contaminate(spec, 0.0, n, 21);
  CHECK(same_bits(clean, sample_geometry(spec, n, 21)));

  auto mixed = convex_contaminate(spec, 0.3, n, 21);
  std::size_t off_curve = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mixed.y_point(i)[0] != zigzag_value(3, mixed.x_point(i)[0])) ++off_curve;
  double frac = static_cast<double>(off_curve) / static_cast<double>(n);
  CHECK(frac > 0.27);
  CHECK(frac < 0.33);

  auto full = convex_contaminate(spec, 1.0, n, 21);
  off_curve = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (full.y_point(i)[0] != zigzag_value(3, full.x_point(i)[0])) ++off_curve;
  CHECK(off_curve > n - 10);
}

TEST_CASE("gaussian noise perturbs with the requested scale") {
  GeometrySpec spec;  // identity
  std::size_t n = 10000;
  CHECK(same_bits(gaussian_noise(spec, 0.0, n, 31), sample_geometry(spec, n, 31)));

  double sigma = 0.25;
  auto noisy = gaussian_noise(spec, sigma, n, 31);
  auto clean = sample_geometry(spec, n, 31);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = noisy.y_point(i)[0] - clean.y_point(i)[0];
    ss += d * d;
  }
  double sd = std::sqrt(ss / static_cast<double>(n));
  CHECK(sd > 0.9 * sigma);
  CHECK(sd < 1.1 * sigma);
}

TEST_CASE("bad parameters are rejected") {
  CHECK_THROWS_AS(sample_geometry(GeometrySpec{GeometryKind::zigzag, 0}, 10, 1), UsageError);
  CHECK_THROWS_AS(sample_geometry(GeometrySpec{}, 0, 1), UsageError);
  GeometrySpec poly{GeometryKind::polynomial};
  poly.coefficients.clear();
  CHECK_THROWS_AS(sample_geometry(poly, 10, 1), UsageError);
  GeometrySpec sine{GeometryKind::sine};
  sine.slope = 0.0;
  CHECK_THROWS_AS(sample_geometry(sine, 10, 1), UsageError);
  GeometrySpec lin{GeometryKind::linear_highdim};
  lin.r = 2;
  lin.q = 3;
  CHECK_THROWS_AS(sample_geometry(lin, 10, 1), UsageError);
  CHECK_THROWS_AS(convex_contaminate(GeometrySpec{}, -0.1, 10, 1), UsageError);
  CHECK_THROWS_AS(convex_contaminate(GeometrySpec{}, 1.5, 10, 1), UsageError);
  CHECK_THROWS_AS(gaussian_noise(GeometrySpec{}, -1.0, 10, 1), UsageError);
}

TEST_CASE("kind names round trip") {
  for (auto kind : {GeometryKind::identity, GeometryKind::zigzag, GeometryKind::polynomial,
                    GeometryKind::sine, GeometryKind::circle, GeometryKind::cross,
                    GeometryKind::spiral, GeometryKind::pretzel, GeometryKind::sphere,
                    GeometryKind::uniform_noise, GeometryKind::linear_highdim}) {
    CHECK(geometry_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(geometry_kind_from_string("donut"), UsageError);
}

TEST_SUITE_END();
