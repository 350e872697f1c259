#include <cmath>
#include <vector>

#include "doctest.h"
#include "tdep/coefficients.hpp"
#include "tdep/error.hpp"
#include "tdep/measure.hpp"
#include "tdep/rng.hpp"
#include "tdep/synth.hpp"

using namespace tdep;

namespace {

JointDiscreteMeasure noisy_cloud(Rng& rng, std::size_t n) {
  std::vector<double> xs(n), ys(n), w(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = rng.uniform(0.0, 1.0);
    ys[i] = 0.6 * xs[i] + rng.uniform(0.0, 0.4);
  }
  return JointDiscreteMeasure(xs, ys, w, 1, 1);
}

}  // namespace

TEST_SUITE_BEGIN("coefficients");

TEST_CASE("classical coefficients on hand instances") {
  auto diag = from_samples({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 1, 1);
  CHECK(pearson(diag) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(diag) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dcor(diag) == doctest::Approx(1.0).epsilon(1e-9));

  auto anti = from_samples({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}, 1, 1);
  CHECK(spearman(anti) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pearson(anti) == doctest::Approx(-1.0).epsilon(1e-12));

  // monotone but nonlinear: spearman saturates, pearson does not
  auto curve = from_samples({1.0, 2.0, 3.0, 4.0}, {1.0, 8.0, 27.0, 64.0}, 1, 1);
  CHECK(spearman(curve) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(curve) < 1.0 - 1e-6);

  // ties get average ranks
  auto tied = from_samples({1.0, 2.0, 2.0, 3.0}, {1.0, 2.0, 2.0, 3.0}, 1, 1);
  CHECK(spearman(tied) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant marginals break the classical coefficients") {
  auto flat = from_samples({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, 1, 1);
  CHECK_THROWS_AS(pearson(flat), DataError);
  CHECK_THROWS_AS(dcor(flat), DataError);
}

TEST_CASE("transport coefficients are one on dilatations") {
  auto diag = from_samples({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 1, 1);
  for (double p : {1.0, 2.0}) {
    CHECK(rho_star(diag, p) == doctest::Approx(1.0).epsilon(1e-9));
  }
  // scaled y is still a dilatation
  auto scaled = from_samples({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}, 1, 1);
  CHECK(rho_star(scaled, 2.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("zigzag graphs with matched lipschitz constant reach one") {
  for (int segs : {1, 3}) {
    auto gamma = sample_geometry(GeometrySpec{GeometryKind::zigzag, segs}, 40, 19);
    double v = rho_alpha(gamma, static_cast<double>(segs), 1.0);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("explicit products score near zero") {
  auto mu = DiscreteMeasure::uniform({0.0, 0.4, 1.1, 2.0}, 1);
  auto nu = DiscreteMeasure::uniform({-1.0, 0.5, 2.5}, 1);
  auto prod = product(mu, nu);
  CHECK(rho_alpha(prod, 1.0, 1.0) <= 1e-6);
  CHECK(rho_star(prod, 1.0) <= 1e-6);
  CHECK(rho_contracting(prod, 2.0) <= 1e-6);
  CHECK(rho_inf(prod, 1.0) <= 1e-6);
}

TEST_CASE("rho_alpha stays below rho_inf and approaches it") {
  Rng rng(881);
  auto gamma = noisy_cloud(rng, 18);
  double p = 1.0;
  double inf_v = rho_inf(gamma, p);
  double prev = 0.0;
  for (double a : {0.5, 2.0, 8.0, 64.0}) {
    double v = rho_alpha(gamma, a, p);
    CHECK(v <= inf_v + 1e-7);
    CHECK(v >= prev - 1e-7);  // monotone in alpha
    prev = v;
  }
  CHECK(std::abs(rho_alpha(gamma, 1e3, p) - inf_v) <= 0.02);
}

TEST_CASE("rho_alpha to the p is midpoint concave in alpha for small p") {
  Rng rng(882);
  for (double p : {0.5, 1.0}) {
    auto gamma = noisy_cloud(rng, 12);
    for (int trial = 0; trial < 8; ++trial) {
      double a0 = std::exp(rng.uniform(-1.5, 1.5));
      double a1 = a0 * (1.0 + std::exp(rng.uniform(-1.0, 1.0)));
      double mid = 0.5 * (a0 + a1);
      double lo = std::pow(rho_alpha(gamma, a0, p), p);
      double hi = std::pow(rho_alpha(gamma, a1, p), p);
      double m = std::pow(rho_alpha(gamma, mid, p), p);
      CHECK(m >= 0.5 * (lo + hi) - 1e-7);
    }
  }
}

TEST_CASE("rho_star ignores dilatation scale and swap") {
  Rng rng(883);
  auto gamma = noisy_cloud(rng, 14);
  double base = rho_star(gamma, 2.0);

  // scale the y side by 7
  std::vector<double> ys = gamma.y_points();
  for (auto& v : ys) v *= 7.0;
  JointDiscreteMeasure scaled(gamma.x_points(), ys, gamma.weights(), 1, 1);
  CHECK(rho_star(scaled, 2.0) == doctest::Approx(base).epsilon(1e-9));

  CHECK(rho_star(swap_xy(gamma), 2.0) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("equal marginal diameters collapse contracting onto star") {
  // x and y marginals are reflections of each other, so the p-diameters match
  auto gamma = from_samples({0.0, 1.0, 3.0}, {3.0, 2.0, 0.0}, 1, 1);
  double p = 2.0;
  CHECK(rho_contracting(gamma, p) == doctest::Approx(rho_star(gamma, p)).epsilon(1e-9));
}

TEST_CASE("coefficient carries the raw statistic and diameters") {
  auto diag = from_samples({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 1, 1);
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_alpha;
  req.alpha = 1.0;
  req.p = 1.0;
  auto res = coefficient(diag, req);
  CHECK(res.diam_y == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(res.raw == doctest::Approx(8.0 / 9.0).epsilon(1e-12));  // tau saturates the bound
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.solver == SolverKind::exact);
}

TEST_CASE("dcor rejects oversized inputs") {
  std::size_t n = 8001;
  std::vector<double> xs(n), ys(n), w(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) xs[i] = ys[i] = static_cast<double>(i);
  JointDiscreteMeasure gamma(xs, ys, w, 1, 1);
  CHECK_THROWS_AS(dcor(gamma), CapacityError);
}

TEST_CASE("dcor matches a direct v-statistic evaluation") {
  Rng rng(884);
  auto gamma = noisy_cloud(rng, 9);
  std::size_t n = gamma.size();
  const auto& w = gamma.weights();
  auto dist = [&](const JointDiscreteMeasure& g, bool y, std::size_t i, std::size_t j) {
    const double* a = y ? g.y_point(i) : g.x_point(i);
    const double* b = y ? g.y_point(j) : g.x_point(j);
    return std::abs(a[0] - b[0]);
  };
  auto dcov2 = [&](bool ax, bool ay) {
    double joint = 0.0, ma = 0.0, mb = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double ra = 0.0, rb = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double da = dist(gamma, ax, i, j), db = dist(gamma, ay, i, j);
        joint += w[i] * w[j] * da * db;
        ma += w[i] * w[j] * da;
        mb += w[i] * w[j] * db;
        ra += w[j] * da;
        rb += w[j] * db;
      }
      cross += w[i] * ra * rb;
    }
    return joint + ma * mb - 2.0 * cross;
  };
  double vxy = dcov2(false, true), vxx = dcov2(false, false), vyy = dcov2(true, true);
  double want = std::sqrt(vxy) / std::pow(vxx * vyy, 0.25);
  CHECK(dcor(gamma) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("requests validate their inputs") {
  auto diag = from_samples({1.0, 2.0}, {1.0, 2.0}, 1, 1);
  CoefficientRequest req;
  req.kind = CoefficientKind::rho_alpha;
  req.alpha = -1.0;
  CHECK_THROWS_AS(coefficient(diag, req), UsageError);
  req.alpha = 1.0;
  req.p = 0.0;
  CHECK_THROWS_AS(coefficient(diag, req), UsageError);

  // 2d marginals cannot feed the 1-d classical coefficients
  auto wide = from_samples({0.0, 0.0, 1.0, 1.0}, {0.0, 1.0}, 2, 1);
  req = CoefficientRequest{};
  req.kind = CoefficientKind::pearson;
  CHECK_THROWS_AS(coefficient(wide, req), UsageError);
}

TEST_CASE("kind names round trip") {
  for (auto kind : {CoefficientKind::rho_alpha, CoefficientKind::rho_inf, CoefficientKind::rho_star,
                    CoefficientKind::rho_contracting, CoefficientKind::pearson,
                    CoefficientKind::spearman, CoefficientKind::dcor}) {
    CHECK(coefficient_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(coefficient_kind_from_string("nope"), UsageError);
}

TEST_SUITE_END();
