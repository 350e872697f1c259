#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tdep/cost.hpp"
#include "tdep/dependency.hpp"
#include "tdep/error.hpp"
#include "tdep/measure.hpp"
#include "tdep/ot.hpp"
#include "tdep/rng.hpp"

using namespace tdep;

namespace {

const double kDiag3Tau = 2.0 * (2.0 + std::sqrt(2.0)) / 9.0;

JointDiscreteMeasure diag3() { return from_samples({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 1, 1); }

JointDiscreteMeasure square4() {
  return from_samples({1.0, 2.0, 4.0, 4.0}, {6.0, 1.0, 2.0, 5.0}, 1, 1);
}

}  // namespace

TEST_SUITE_BEGIN("dependency");

TEST_CASE("uniform diagonal under the raw euclidean metric") {
  CostSpec spec;
  spec.family = CostFamily::raw_power;
  spec.p = 1.0;
  auto t = tdep::tdep(diag3(), spec, SolverChoice::exact);
  CHECK(t.value == doctest::Approx(kDiag3Tau).epsilon(1e-12));
  CHECK(t.solver == SolverKind::exact);

  // independent oracle for the same instance
  CHECK(oracle::tdep_small(diag3(), spec) == doctest::Approx(kDiag3Tau).epsilon(1e-9));

  REQUIRE(t.bound_resample);
  REQUIRE(t.bound_diameter);
  REQUIRE(t.bound_marginal);
  CHECK(*t.bound_resample == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(*t.bound_diameter == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(*t.bound_marginal == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("uniform diagonal under the additive metric cost saturates its bound") {
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.alpha = 1.0;
  spec.p = 1.0;
  auto t = tdep::tdep(diag3(), spec, SolverChoice::exact);
  CHECK(t.value == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(t.diam_y == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("four-point instance orders the bounds strictly") {
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.metric_x = Metric::l1;
  spec.metric_y = Metric::l1;
  spec.p = 1.0;
  auto gamma = square4();
  auto t = tdep::tdep(gamma, spec, SolverChoice::exact);
  REQUIRE(t.bound_resample);
  REQUIRE(t.bound_diameter);
  REQUIRE(t.bound_marginal);
  CHECK(*t.bound_diameter == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*t.bound_marginal == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(*t.bound_resample == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(t.value < *t.bound_diameter - 1e-9);
  CHECK(*t.bound_diameter < *t.bound_marginal - 1e-9);
  CHECK(*t.bound_marginal < *t.bound_resample - 1e-9);
}

TEST_CASE("explicit products have zero dependency") {
  auto mu = DiscreteMeasure::uniform({0.0, 0.5, 1.0, 2.0}, 1);
  auto nu = DiscreteMeasure::uniform({-1.0, 0.0, 3.0}, 1);
  auto prod = product(mu, nu);
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.p = 1.0;
  auto t = tdep::tdep(prod, spec, SolverChoice::exact);
  CHECK(t.value <= 1e-7);
}

TEST_CASE("point mass has zero dependency and zero diameters") {
  auto gamma = from_samples({5.0}, {7.0}, 1, 1);
  CostSpec spec;
  auto t = tdep::tdep(gamma, spec, SolverChoice::exact);
  CHECK(t.value == 0.0);
  CHECK(t.diam_x == 0.0);
  CHECK(t.diam_y == 0.0);
}

TEST_CASE("keep_plan returns a feasible coupling with the product measure") {
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.p = 2.0;
  auto gamma = diag3();
  auto t = tdep::tdep(gamma, spec, SolverChoice::exact, true);
  REQUIRE(t.plan);
  CHECK(t.plan->src_size == 3);
  CHECK(t.plan->dst_size == 9);
  double mass = 0.0;
  for (const auto& e : t.plan->entries) mass += e.mass;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.plan->primal_cost == doctest::Approx(t.value).epsilon(1e-12));
}

TEST_CASE("marginal dependency groups by exact x-coordinate") {
  MarginalCostSpec cy{Metric::euclidean, 1.0, 1.0, 1.0};

  auto three = from_samples({0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, 1, 1);
  CHECK(marginal_tdep(three, cy) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));

  auto four = from_samples({0.0, 0.0, 1.0, 1.0}, {0.0, 1.0, 0.0, 1.0}, 1, 1);
  CHECK(marginal_tdep(four, cy) == doctest::Approx(0.0));

  // all-distinct x means point-mass conditionals, which reduces to the
  // resample bound
  auto gamma = from_samples({1.0, 2.0, 4.0, 5.0}, {6.0, 1.0, 2.0, 5.0}, 1, 1);
  CHECK(marginal_tdep(gamma, cy) == doctest::Approx(bound_resample(gamma, cy)).epsilon(1e-12));
}

TEST_CASE("marginal dependency tolerance grouping") {
  MarginalCostSpec cy{Metric::euclidean, 1.0, 1.0, 1.0};
  auto gamma = from_samples({0.0, 1e-12, 1.0}, {0.0, 1.0, 1.0}, 1, 1);
  // bitwise grouping sees three distinct x values
  CHECK(marginal_tdep(gamma, cy) == doctest::Approx(bound_resample(gamma, cy)).epsilon(1e-12));
  // grid grouping merges the two near-zero atoms
  CHECK(marginal_tdep(gamma, cy, 1e-9) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("negative zero x-coordinates group with positive zero") {
  MarginalCostSpec cy{Metric::euclidean, 1.0, 1.0, 1.0};
  auto gamma = from_samples({-0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, 1, 1);
  CHECK(marginal_tdep(gamma, cy) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("resample plan realizes the resample bound") {
  auto gamma = square4();
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.metric_x = Metric::l1;
  spec.metric_y = Metric::l1;
  spec.p = 1.0;
  auto plan = resample_plan(gamma, spec);
  auto [mu, nu] = marginals(gamma);
  auto prod = product(mu, nu);
  auto cost = cost_matrix(spec, gamma, prod);
  double realized = transport_cost(plan, [&](uint32_t i, uint32_t j) {
    return cost[i * prod.size() + j];
  });
  CHECK(realized == doctest::Approx(bound_resample(gamma, y_marginal_cost(spec))).epsilon(1e-9));
}

TEST_CASE("alpha schedule defaults and fixed alpha agree with tdep") {
  auto gamma = square4();
  double fixed = tdep_alpha_schedule(gamma, Metric::euclidean, Metric::euclidean, 1.0,
                                     [](std::size_t) { return 2.5; });
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.alpha = 2.5;
  spec.p = 1.0;
  CHECK(fixed == doctest::Approx(tdep::tdep(gamma, spec).value).epsilon(1e-12));

  auto single = from_samples({0.0}, {0.0}, 1, 1);
  CHECK(tdep_alpha_schedule(single, Metric::euclidean, Metric::euclidean, 1.0) == 0.0);

  // alpha-schedule values are non-decreasing in alpha on a fixed sample
  double prev = -1.0;
  for (double a : {1.0, 4.0, 16.0, 64.0}) {
    double v = tdep_alpha_schedule(gamma, Metric::euclidean, Metric::euclidean, 1.0,
                                   [a](std::size_t) { return a; });
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("solver auto-selection switches to sinkhorn on large products") {
  Rng rng(661);
  std::size_t n = 170;  // 170^3 exceeds the auto-exact limit
  std::vector<double> xs(n), ys(n), w(n, 1.0 / static_cast<double>(n));
  for (auto& v : xs) v = rng.uniform(0.0, 1.0);
  for (auto& v : ys) v = rng.uniform(0.0, 1.0);
  JointDiscreteMeasure gamma(xs, ys, w, 1, 1);
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.p = 2.0;
  auto t = tdep::tdep(gamma, spec);
  CHECK(t.solver == SolverKind::sinkhorn);
  CHECK(t.value >= 0.0);
}

TEST_CASE("forced sinkhorn tracks the exact value") {
  Rng rng(662);
  std::size_t n = 60;
  std::vector<double> xs(n), ys(n), w(n, 1.0 / static_cast<double>(n));
  for (auto& v : xs) v = rng.uniform(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) ys[i] = xs[i] * xs[i] + rng.uniform(0.0, 0.05);
  JointDiscreteMeasure gamma(xs, ys, w, 1, 1);
  CostSpec spec;
  spec.family = CostFamily::additive;
  spec.p = 2.0;
  auto exact = tdep::tdep(gamma, spec);  // 60^3 is inside the auto-exact limit
  CHECK(exact.solver == SolverKind::exact);
  auto approx = tdep::tdep(gamma, spec, SolverChoice::sinkhorn);
  CHECK(approx.solver == SolverKind::sinkhorn);
  double rel = std::abs(approx.value - exact.value) / std::max(exact.value, 1e-12);
  CHECK(rel <= 3e-2);  // entropic bias at eta_end
  CHECK(approx.value >= exact.value - 1e-9);
}

TEST_CASE("tau of a small product of uniforms vanishes") {
  std::vector<double> xs(6), ys(6);
  for (std::size_t i = 0; i < 6; ++i) {
    xs[i] = static_cast<double>(i) / 6.0;
    ys[i] = static_cast<double>(i) / 3.0;
  }
  auto prod = product(DiscreteMeasure::uniform(xs, 1), DiscreteMeasure::uniform(ys, 1));
  CostSpec spec;
  spec.family = CostFamily::raw_power;
  spec.p = 2.0;
  auto t = tdep::tdep(prod, spec, SolverChoice::exact);
  CHECK(t.value <= 1e-7);
}

TEST_SUITE_END();
