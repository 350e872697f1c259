#pragma once

#include <cstddef>
#include <vector>

#include "tdep/cost.hpp"
#include "tdep/measure.hpp"

// Reference implementations used only to cross-check the library. They share
// no code with the solvers under test: OT goes through successive shortest
// paths on the residual graph, and the 1-d case through the quantile
// coupling.
namespace oracle {

// Exact OT cost between weights a (n) and b (m) under a dense row-major cost
// matrix. Bellman-Ford based successive shortest paths; fine for n*m up to a
// few thousand.
double min_cost_transport(const std::vector<double>& a, const std::vector<double>& b,
                          const double* cost, std::size_t n, std::size_t m);

// Exact 1-d OT under c(x, y) = |x - y|^p with p >= 1, computed by walking the
// two quantile functions in lockstep.
double quantile_transport_1d(std::vector<double> x, std::vector<double> wx, std::vector<double> y,
                             std::vector<double> wy, double p);

// tau via the two pieces above the library does not use: product weights plus
// a min_cost_transport solve on an eval_cost matrix.
double tdep_small(const tdep::JointDiscreteMeasure& gamma, const tdep::CostSpec& spec);

}  // namespace oracle
