#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "tdep/cost.hpp"
#include "tdep/error.hpp"
#include "tdep/measure.hpp"
#include "tdep/rng.hpp"

using namespace tdep;

TEST_SUITE_BEGIN("cost");

TEST_CASE("metric distances") {
  double a[2] = {0.0, 0.0};
  double b[2] = {3.0, 4.0};
  CHECK(metric_dist(Metric::euclidean, a, b, 2) == doctest::Approx(5.0));
  CHECK(metric_dist(Metric::l1, a, b, 2) == doctest::Approx(7.0));
  CHECK(metric_dist(Metric::linf, a, b, 2) == doctest::Approx(4.0));
  CHECK(metric_dist(Metric::euclidean, a, a, 2) == 0.0);
}

TEST_CASE("marginal cost applies scale, beta, and p") {
  MarginalCostSpec spec{Metric::euclidean, 2.0, 1.0, 2.0};
  double a = 0.0, b = 3.0;
  CHECK(marginal_cost(spec, &a, &b, 1) == doctest::Approx(36.0));
  spec.beta = 2.0;
  spec.p = 1.0;
  CHECK(marginal_cost(spec, &a, &b, 1) == doctest::Approx(18.0));
}

TEST_CASE("additive cost formula") {
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.alpha = 2.0;
  spec.p = 2.0;
  double x1 = 0.0, y1 = 0.0, x2 = 1.0, y2 = 3.0;
  // (2*1 + 3)^2
  CHECK(eval_cost(spec, &x1, &y1, &x2, &y2, 1, 1) == doctest::Approx(25.0));
}

TEST_CASE("raw power cost concatenates coordinates") {
  CostSpec spec;
  spec.family = CostFamily::raw_power;
  spec.p = 1.0;
  double x1 = 0.0, y1 = 0.0, x2 = 3.0, y2 = 4.0;
  CHECK(eval_cost(spec, &x1, &y1, &x2, &y2, 1, 1) == doctest::Approx(5.0));
  spec.metric_x = Metric::l1;
  spec.metric_y = Metric::l1;
  CHECK(eval_cost(spec, &x1, &y1, &x2, &y2, 1, 1) == doctest::Approx(7.0));
  spec.metric_y = Metric::linf;
  CHECK_THROWS_AS(eval_cost(spec, &x1, &y1, &x2, &y2, 1, 1), UsageError);
}

TEST_CASE("min marginal cost") {
  CostSpec spec;
  spec.family = CostFamily::min_marginal;
  spec.p = 1.0;
  double x1 = 0.0, y1 = 0.0, x2 = 2.0, y2 = 5.0;
  CHECK(eval_cost(spec, &x1, &y1, &x2, &y2, 1, 1) == doctest::Approx(2.0));
}

TEST_CASE("alpha = inf is a routing marker, not a number") {
  CostSpec spec;
  spec.alpha = std::numeric_limits<double>::infinity();
  CHECK(spec.marginal_limit());
  double z = 0.0;
  CHECK_THROWS_AS(eval_cost(spec, &z, &z, &z, &z, 1, 1), UsageError);
}

TEST_CASE("factorized cost agrees with eval_cost") {
  Rng rng(991);
  for (int trial = 0; trial < 200; ++trial) {
    CostSpec spec;
    switch (rng.uniform_index(3)) {
      case 0: spec.family = CostFamily::additive; break;
      case 1: spec.family = CostFamily::raw_power; break;
      default: spec.family = CostFamily::min_marginal; break;
    }
    spec.metric_x = static_cast<Metric>(rng.uniform_index(3));
    spec.metric_y = spec.family == CostFamily::raw_power ? spec.metric_x
                                                         : static_cast<Metric>(rng.uniform_index(3));
    spec.alpha = std::exp(rng.uniform(-1.0, 1.0));
    spec.beta_x = rng.uniform_index(2) == 0 ? 1.0 : 2.0;
    spec.p = rng.uniform_index(2) == 0 ? 1.0 : 2.0;
    if (spec.family == CostFamily::raw_power) {
      spec.alpha = 1.0;
      spec.beta_x = 1.0;
    }

    auto fc = factorize(spec);
    std::size_t r = 1 + rng.uniform_index(2);
    std::size_t q = 1 + rng.uniform_index(2);
    std::vector<double> x1(r), x2(r), y1(q), y2(q);
    for (auto& v : x1) v = rng.uniform(-2.0, 2.0);
    for (auto& v : x2) v = rng.uniform(-2.0, 2.0);
    for (auto& v : y1) v = rng.uniform(-2.0, 2.0);
    for (auto& v : y2) v = rng.uniform(-2.0, 2.0);

    double direct = eval_cost(spec, x1.data(), y1.data(), x2.data(), y2.data(), r, q);
    double a = factor_value(fc.x_factor, x1.data(), x2.data(), r);
    double b = factor_value(fc.y_factor, y1.data(), y2.data(), q);
    CHECK(fc.combine(a, b) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("marginal slices bound the joint cost") {
  // c(x1,y,x2,y) <= c_X(x1,x2) with equality for the additive family,
  // and symmetrically in y.
  Rng rng(992);
  for (int trial = 0; trial < 200; ++trial) {
    CostSpec spec;
    spec.family = rng.uniform_index(2) == 0 ? CostFamily::additive : CostFamily::raw_power;
    spec.metric_x = static_cast<Metric>(rng.uniform_index(3));
    spec.metric_y = spec.family == CostFamily::raw_power ? spec.metric_x
                                                         : static_cast<Metric>(rng.uniform_index(3));
    spec.alpha = spec.family == CostFamily::raw_power ? 1.0 : std::exp(rng.uniform(-1.0, 1.0));
    spec.p = rng.uniform_index(2) == 0 ? 1.0 : 2.0;

    double x1 = rng.uniform(-2.0, 2.0), x2 = rng.uniform(-2.0, 2.0);
    double y1 = rng.uniform(-2.0, 2.0), y2 = rng.uniform(-2.0, 2.0);
    double same_y = eval_cost(spec, &x1, &y1, &x2, &y1, 1, 1);
    double same_x = eval_cost(spec, &x1, &y1, &x1, &y2, 1, 1);
    double cx = marginal_cost(x_marginal_cost(spec), &x1, &x2, 1);
    double cy = marginal_cost(y_marginal_cost(spec), &y1, &y2, 1);
    CHECK(same_y <= cx + 1e-12);
    CHECK(same_x <= cy + 1e-12);
    if (spec.family == CostFamily::additive) {
      CHECK(same_y == doctest::Approx(cx).epsilon(1e-12));
      CHECK(same_x == doctest::Approx(cy).epsilon(1e-12));
    }
  }
}

TEST_CASE("diameter is the expected pairwise cost") {
  // Unif{1,2,3} under |.|: pairs (1,2),(2,1),(1,3),(3,1),(2,3),(3,2) each 1/9
  // weight, distances 1,1,2,2,1,1 -> 8/9.
  auto mu = DiscreteMeasure::uniform({1.0, 2.0, 3.0}, 1);
  MarginalCostSpec cy{Metric::euclidean, 1.0, 1.0, 1.0};
  CHECK(diameter(mu, cy) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));

  auto point = DiscreteMeasure::point_mass({7.0});
  CHECK(diameter(point, cy) == 0.0);
}

TEST_CASE("isometric alpha balances the marginal diameters") {
  auto mu = DiscreteMeasure::uniform({0.0, 2.0}, 1);
  auto nu = DiscreteMeasure::uniform({0.0, 6.0}, 1);
  // p=1 diameters: 2*(1/4)*2 = 1 and 2*(1/4)*6 = 3; alpha = 3.
  CHECK(isometric_alpha(mu, nu, 1.0, Metric::euclidean, Metric::euclidean) ==
        doctest::Approx(3.0));
  CHECK_THROWS_AS(isometric_alpha(DiscreteMeasure::point_mass({0.0}), nu, 1.0, Metric::euclidean,
                                  Metric::euclidean),
                  DataError);
}

TEST_CASE("make_isometric normalizes both marginal diameters to one") {
  Rng rng(993);
  std::vector<double> xs(8), ys(8);
  for (auto& v : xs) v = rng.uniform(-1.0, 3.0);
  for (auto& v : ys) v = rng.uniform(0.0, 10.0);
  auto mu = DiscreteMeasure::uniform(xs, 1);
  auto nu = DiscreteMeasure::uniform(ys, 1);

  CostSpec base;
  base.p = 2.0;
  auto iso = make_isometric(base, mu, nu);
  CHECK(iso.family == CostFamily::normalized_isometric);
  CHECK(diameter(mu, x_marginal_cost(iso)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(diameter(nu, y_marginal_cost(iso)) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_isometric(base, DiscreteMeasure::point_mass({0.0}), nu), DataError);
}

TEST_CASE("string conversions") {
  CHECK(metric_from_string("l2") == Metric::euclidean);
  CHECK(metric_from_string("euclidean") == Metric::euclidean);
  CHECK(metric_from_string("l1") == Metric::l1);
  CHECK(metric_from_string("linf") == Metric::linf);
  CHECK(family_from_string("additive") == CostFamily::additive);
  CHECK(family_from_string("raw") == CostFamily::raw_power);
  CHECK(family_from_string("min") == CostFamily::min_marginal);
  CHECK(family_from_string("isometric") == CostFamily::normalized_isometric);
  CHECK_THROWS_AS(metric_from_string("l3"), UsageError);
  CHECK_THROWS_AS(family_from_string("bogus"), UsageError);
  CHECK(std::string(to_string(Metric::l1)) == "l1");
  CHECK(std::string(to_string(CostFamily::additive)) == "additive");
}

TEST_SUITE_END();
