#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tdep/coefficients.hpp"
#include "tdep/error.hpp"
#include "tdep/independence.hpp"
#include "tdep/measure.hpp"
#include "tdep/rng.hpp"
#include "tdep/synth.hpp"

using namespace tdep;

namespace {

CoefficientRequest rho_alpha_request(double alpha, double p) {
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_alpha;
  req.alpha = alpha;
  req.p = p;
  return req;
}

}  // namespace

TEST_SUITE_BEGIN("independence");

TEST_CASE("report bookkeeping and nominal level") {
  auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, 3}, 30, 41);
  auto rep = permutation_test(gamma, rho_alpha_request(3.0, 1.0), 29, 2, 99);
  CHECK(rep.m == 29);
  CHECK(rep.k == 2);
  CHECK(rep.perm_statistics.size() == 29);
  CHECK(rep.nominal_level == doctest::Approx(0.1));
  CHECK(rep.seed == 99);

  auto rep2 = permutation_test(gamma, rho_alpha_request(3.0, 1.0), 9, 0, 99);
  CHECK(rep2.nominal_level == doctest::Approx(0.1));

  std::size_t above = 0;
  for (double v : rep.perm_statistics)
    if (v > rep.statistic) ++above;
  CHECK(above == rep.exceed_count);
  CHECK(rep.reject == (rep.exceed_count <= 2));
}

TEST_CASE("identical seeds reproduce the report") {
  auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, 3}, 25, 42);
  auto a = permutation_test(gamma, rho_alpha_request(3.0, 1.0), 19, 1, 7);
  auto b = permutation_test(gamma, rho_alpha_request(3.0, 1.0), 19, 1, 7);
  CHECK(a.statistic == b.statistic);
  CHECK(a.perm_statistics == b.perm_statistics);
  CHECK(a.reject == b.reject);
}

TEST_CASE("noiseless dependence rejects") {
  // Zigzag data has almost no linear correlation, so pearson is checked on
  // the identity curve instead.
  auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, 3}, 50, 43);
  for (auto kind :
       {CoefficientKind::rho_alpha, CoefficientKind::rho_star, CoefficientKind::dcor}) {
    CoefficientRequest req;
    req.kind = kind;
    req.alpha = 3.0;
    req.p = 1.0;
    auto rep = permutation_test(gamma, req, 29, 2, 1234);
    CHECK(rep.reject);
  }
  auto line = sample_geometry(GeometrySpec{GeometryKind::identity}, 50, 43);
  CoefficientRequest req;
  req.kind = CoefficientKind::pearson;
  CHECK(permutation_test(line, req, 29, 2, 1234).reject);
}

TEST_CASE("observed statistic equals the direct coefficient") {
  auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, 3}, 30, 44);
  for (auto kind : {CoefficientKind::rho_alpha, CoefficientKind::rho_star,
                    CoefficientKind::rho_contracting, CoefficientKind::dcor,
                    CoefficientKind::pearson, CoefficientKind::spearman,
                    CoefficientKind::rho_inf}) {
    CoefficientRequest req;
    req.kind = kind;
    req.alpha = 2.0;
    req.p = 1.0;
    auto rep = permutation_test(gamma, req, 3, 0, 5);
    double direct = coefficient(gamma, req).value;
    CHECK(rep.statistic == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("fast paths match a rebuilt permuted measure") {
  auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, 3}, 20, 45);
  std::size_t n = gamma.size();
  for (auto kind : {CoefficientKind::rho_alpha, CoefficientKind::rho_star, CoefficientKind::dcor,
                    CoefficientKind::spearman}) {
    CoefficientRequest req;
    req.kind = kind;
    req.alpha = 3.0;
    req.p = 1.0;
    auto rep = permutation_test(gamma, req, 5, 0, 8);
    for (int i = 0; i < 5; ++i) {
      auto sigma = Rng::substream(8, rngstream::permutation, static_cast<std::uint64_t>(i))
                       .permutation(n);
      std::vector<double> ys(n);
      for (std::size_t j = 0; j < n; ++j) ys[j] = gamma.y_point(sigma[j])[0];
      JointDiscreteMeasure permuted(gamma.x_points(), ys, gamma.weights(), 1, 1);
      double direct = coefficient(permuted, req).value;
      CHECK(rep.perm_statistics[i] == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("independent data rejects near the nominal rate") {
  GeometrySpec spec{GeometryKind::zigzag, 3};
  double rate = power_estimate(spec, 1.0, rho_alpha_request(3.0, 1.0), 60, 30, 19, 1, 77);
  CHECK(rate <= 0.35);
}

TEST_CASE("strong dependence has high power") {
  GeometrySpec spec{GeometryKind::zigzag, 3};
  double rate = power_estimate(spec, 0.0, rho_alpha_request(3.0, 1.0), 10, 40, 19, 1, 78);
  CHECK(rate == doctest::Approx(1.0));
}

TEST_CASE("power is deterministic in the seed") {
  GeometrySpec spec{GeometryKind::identity};
  CoefficientRequest req;
  req.kind = CoefficientKind::pearson;
  double a = power_estimate(spec, 0.5, req, 20, 25, 9, 0, 5);
  double b = power_estimate(spec, 0.5, req, 20, 25, 9, 0, 5);
  CHECK(a == b);
}

TEST_CASE("bad test parameters are rejected") {
  auto gamma = sample_geometry(GeometrySpec{}, 10, 1);
  CoefficientRequest req;
  CHECK_THROWS_AS(permutation_test(gamma, req, 0, 0, 1), UsageError);
  CHECK_THROWS_AS(permutation_test(gamma, req, 9, 10, 1), UsageError);
  CHECK_THROWS_AS(permutation_test(gamma, req, 9, -1, 1), UsageError);
  GeometrySpec spec;
  CHECK_THROWS_AS(power_estimate(spec, 0.5, req, 0, 10, 9, 0, 1), UsageError);
}

TEST_SUITE_END();
