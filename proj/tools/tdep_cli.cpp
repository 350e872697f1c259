// Command line front end. Subcommands map onto the library modules:
//   compute  transport dependency with bounds (JSON)
//   corr     one dependence coefficient (JSON)
//   test     permutation independence test (JSON)
//   power    rejection rate over a contamination grid (CSV)
//   gauss    closed-form Gaussian curves over a rho grid (CSV)
//   synth    synthetic sample (CSV)
// Exit codes: 1 usage, 2 data, 3 capacity, 4 numeric.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tdep/coefficients.hpp"
#include "tdep/cost.hpp"
#include "tdep/dependency.hpp"
#include "tdep/error.hpp"
#include "tdep/gaussian.hpp"
#include "tdep/independence.hpp"
#include "tdep/io.hpp"
#include "tdep/measure.hpp"
#include "tdep/synth.hpp"

namespace {

using nlohmann::json;

struct InputOptions {
  std::string in_path;
  std::string geometry;
  int segments = 3;
  double slope = 3.0;
  std::vector<double> poly;
  std::size_t r = 1;
  std::size_t q = 1;
  double epsilon = -1.0;  // negative: no contamination
  double sigma = -1.0;    // negative: no additive noise
  std::size_t n = 50;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* geom_opt = nullptr;

  bool has_seed() const { return seed_opt != nullptr && seed_opt->count() > 0; }
  bool has_geometry() const { return geom_opt != nullptr && geom_opt->count() > 0; }
};

void add_generator_flags(CLI::App* cmd, InputOptions& in) {
  in.geom_opt = cmd->add_option("--geometry", in.geometry,
                                "synthetic geometry (identity|zigzag|polynomial|sine|circle|"
                                "cross|spiral|pretzel|sphere|uniform_noise|linear_highdim)");
  cmd->add_option("--segments", in.segments, "zigzag segment count");
  cmd->add_option("--slope", in.slope, "sine maximal slope");
  cmd->add_option("--poly-coeffs", in.poly, "polynomial coefficients, constant term first");
  cmd->add_option("--r", in.r, "X dimension for sphere/uniform_noise/linear_highdim");
  cmd->add_option("--q", in.q, "Y dimension for sphere/uniform_noise/linear_highdim");
  cmd->add_option("--epsilon", in.epsilon, "convex contamination level in [0,1]");
  cmd->add_option("--sigma", in.sigma, "additive Gaussian noise level");
  cmd->add_option("--n", in.n, "sample size");
  in.seed_opt = cmd->add_option("--seed", in.seed, "RNG seed (required for generators)");
}

void add_input_flags(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--in", in.in_path, "CSV file of paired samples");
  add_generator_flags(cmd, in);
}

tdep::GeometrySpec make_geometry(const InputOptions& in) {
  tdep::GeometrySpec spec;
  spec.kind = tdep::geometry_kind_from_string(in.geometry);
  spec.segments = in.segments;
  spec.slope = in.slope;
  if (!in.poly.empty()) spec.coefficients = in.poly;
  spec.r = in.r;
  spec.q = in.q;
  return spec;
}

tdep::JointDiscreteMeasure generate(const InputOptions& in, std::uint64_t index = 0) {
  if (!in.has_seed()) throw tdep::UsageError("--seed is required when generating data");
  if (in.epsilon >= 0.0 && in.sigma >= 0.0) {
    throw tdep::UsageError("--epsilon and --sigma are mutually exclusive noise models");
  }
  const tdep::GeometrySpec spec = make_geometry(in);
  if (in.epsilon >= 0.0) return tdep::convex_contaminate(spec, in.epsilon, in.n, in.seed, index);
  if (in.sigma >= 0.0) return tdep::gaussian_noise(spec, in.sigma, in.n, in.seed, index);
  return tdep::sample_geometry(spec, in.n, in.seed, index);
}

tdep::JointDiscreteMeasure load_input(const InputOptions& in) {
  if (!in.in_path.empty() && in.has_geometry()) {
    throw tdep::UsageError("--in and --geometry are mutually exclusive");
  }
  if (!in.in_path.empty()) return tdep::read_samples_csv_file(in.in_path);
  if (in.has_geometry()) return generate(in);
  throw tdep::UsageError("either --in or --geometry is required");
}

struct CostOptions {
  std::string family = "additive";
  std::string metric_x = "euclidean";
  std::string metric_y = "euclidean";
  double alpha = 1.0;
  double beta_x = 1.0;
  double p = 2.0;
};

void add_cost_flags(CLI::App* cmd, CostOptions& c) {
  cmd->add_option("--cost", c.family, "cost family (additive|raw|min|isometric)");
  cmd->add_option("--metric-x", c.metric_x, "X metric (euclidean|l1|linf)");
  cmd->add_option("--metric-y", c.metric_y, "Y metric (euclidean|l1|linf)");
  cmd->add_option("--alpha", c.alpha, "X weight in additive/min costs");
  cmd->add_option("--beta-x", c.beta_x, "exponent on the X distance");
  cmd->add_option("--p", c.p, "outer power");
}

tdep::CostSpec make_cost(const CostOptions& c, const tdep::JointDiscreteMeasure& gamma) {
  tdep::CostSpec spec;
  spec.family = tdep::family_from_string(c.family);
  spec.metric_x = tdep::metric_from_string(c.metric_x);
  spec.metric_y = tdep::metric_from_string(c.metric_y);
  spec.alpha = c.alpha;
  spec.beta_x = c.beta_x;
  spec.p = c.p;
  if (spec.family == tdep::CostFamily::normalized_isometric) {
    auto [mu, nu] = tdep::marginals(gamma);
    spec = tdep::make_isometric(spec, mu, nu);
  }
  return spec;
}

tdep::SolverChoice solver_from_string(const std::string& s) {
  if (s == "auto") return tdep::SolverChoice::automatic;
  if (s == "exact") return tdep::SolverChoice::exact;
  if (s == "sinkhorn") return tdep::SolverChoice::sinkhorn;
  throw tdep::UsageError("unknown solver '" + s + "' (auto|exact|sinkhorn)");
}

const char* to_string(tdep::SolverKind k) {
  return k == tdep::SolverKind::exact ? "exact" : "sinkhorn";
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw tdep::DataError("cannot open '" + path + "' for writing");
  out << content;
  if (!out.good()) throw tdep::DataError("write to '" + path + "' failed");
}

struct Grid {
  double start = 0.0, stop = 0.0, step = 0.0;
};

Grid parse_grid(const std::string& s) {
  Grid g;
  char extra = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lf%c", &g.start, &g.stop, &g.step, &extra) != 3) {
    throw tdep::UsageError("grid must look like start:stop:step, got '" + s + "'");
  }
  if (!(g.step > 0.0) || g.stop < g.start) throw tdep::UsageError("grid needs step > 0 and stop >= start");
  return g;
}

std::vector<double> grid_values(const Grid& g) {
  std::vector<double> vs;
  for (std::size_t i = 0;; ++i) {
    const double v = g.start + static_cast<double>(i) * g.step;
    if (v > g.stop + 1e-9 * g.step) break;
    vs.push_back(v);
  }
  return vs;
}

json cost_json(const tdep::CostSpec& spec) {
  return json{{"family", tdep::to_string(spec.family)},
              {"metric_x", tdep::to_string(spec.metric_x)},
              {"metric_y", tdep::to_string(spec.metric_y)},
              {"alpha", spec.alpha},
              {"beta_x", spec.beta_x},
              {"p", spec.p}};
}

int run_compute(const InputOptions& in, const CostOptions& cost_opt, const std::string& solver,
                const std::string& out_path) {
  const tdep::JointDiscreteMeasure gamma = load_input(in);
  const tdep::CostSpec spec = make_cost(cost_opt, gamma);
  const tdep::TdepResult res = tdep::tdep(gamma, spec, solver_from_string(solver));
  json j{{"schema", 1},
         {"n", gamma.size()},
         {"value", res.value},
         {"diam_x", res.diam_x},
         {"diam_y", res.diam_y},
         {"solver", to_string(res.solver)},
         {"cost", cost_json(spec)}};
  json bounds;
  if (res.bound_resample) bounds["resample"] = *res.bound_resample;
  if (res.bound_diameter) bounds["diameter"] = *res.bound_diameter;
  if (res.bound_marginal) bounds["marginal"] = *res.bound_marginal;
  if (!bounds.empty()) j["bounds"] = bounds;
  write_output(out_path, j.dump(2) + "\n");
  return 0;
}

struct CoeffOptions {
  std::string kind = "rho_alpha";
  double alpha = 1.0;
  double p = 2.0;
  std::string metric_x = "euclidean";
  std::string metric_y = "euclidean";
  std::string solver = "auto";
};

void add_coeff_flags(CLI::App* cmd, CoeffOptions& c) {
  cmd->add_option("--coeff", c.kind,
                  "coefficient (rho_alpha|rho_inf|rho_star|rho_contracting|pearson|spearman|dcor)");
  cmd->add_option("--alpha", c.alpha, "alpha for rho_alpha");
  cmd->add_option("--p", c.p, "outer power for the transport coefficients");
  cmd->add_option("--metric-x", c.metric_x, "X metric");
  cmd->add_option("--metric-y", c.metric_y, "Y metric");
  cmd->add_option("--solver", c.solver, "solver (auto|exact|sinkhorn)");
}

tdep::CoefficientRequest make_coeff(const CoeffOptions& c) {
  tdep::CoefficientRequest req;
  req.kind = tdep::coefficient_kind_from_string(c.kind);
  req.alpha = c.alpha;
  req.p = c.p;
  req.metric_x = tdep::metric_from_string(c.metric_x);
  req.metric_y = tdep::metric_from_string(c.metric_y);
  req.solver = solver_from_string(c.solver);
  return req;
}

bool is_transport(tdep::CoefficientKind k) {
  return k == tdep::CoefficientKind::rho_alpha || k == tdep::CoefficientKind::rho_inf ||
         k == tdep::CoefficientKind::rho_star || k == tdep::CoefficientKind::rho_contracting;
}

int run_corr(const InputOptions& in, const CoeffOptions& coeff_opt, const std::string& out_path) {
  const tdep::JointDiscreteMeasure gamma = load_input(in);
  const tdep::CoefficientRequest req = make_coeff(coeff_opt);
  const tdep::CoefficientResult res = tdep::coefficient(gamma, req);
  const bool transport = is_transport(req.kind);
  json j{{"schema", 1},
         {"kind", tdep::to_string(req.kind)},
         {"value", res.value},
         {"n", gamma.size()},
         {"p", req.p},
         {"alpha", req.kind == tdep::CoefficientKind::rho_alpha ? json(req.alpha) : json()},
         {"solver", transport ? json(to_string(res.solver)) : json()},
         {"tau", transport ? json(res.raw) : json()},
         {"diam_x", transport ? json(res.diam_x) : json()},
         {"diam_y", transport ? json(res.diam_y) : json()}};
  write_output(out_path, j.dump(2) + "\n");
  return 0;
}

int run_test(const InputOptions& in, const CoeffOptions& coeff_opt, int m, int k,
             std::uint64_t seed, const std::string& out_path) {
  const tdep::JointDiscreteMeasure gamma = load_input(in);
  const tdep::TestReport rep = tdep::permutation_test(gamma, make_coeff(coeff_opt), m, k, seed);
  json j{{"schema", 1},
         {"coeff", coeff_opt.kind},
         {"statistic", rep.statistic},
         {"perm_statistics", rep.perm_statistics},
         {"exceed_count", rep.exceed_count},
         {"k", rep.k},
         {"m", rep.m},
         {"reject", rep.reject},
         {"nominal_level", rep.nominal_level},
         {"seed", rep.seed}};
  write_output(out_path, j.dump(2) + "\n");
  return 0;
}

int run_power(const InputOptions& in, const CoeffOptions& coeff_opt, const std::string& eps_grid,
              int runs, int m, int k, const std::string& out_path) {
  if (!in.has_geometry()) throw tdep::UsageError("power needs --geometry");
  if (!in.has_seed()) throw tdep::UsageError("--seed is required");
  const tdep::GeometrySpec spec = make_geometry(in);
  const tdep::CoefficientRequest req = make_coeff(coeff_opt);
  std::ostringstream out;
  out << "epsilon,power\n";
  for (double eps : grid_values(parse_grid(eps_grid))) {
    const double power = tdep::power_estimate(spec, eps, req, runs, in.n, m, k, in.seed);
    out << tdep::format_double(eps) << "," << tdep::format_double(power) << "\n";
  }
  write_output(out_path, out.str());
  return 0;
}

int run_gauss(const std::string& rho_grid, double sigma, const std::string& out_path) {
  std::ostringstream out;
  out << "rho2,tdep,marginal_tdep,dcov2,mi\n";
  for (double rho : grid_values(parse_grid(rho_grid))) {
    if (rho > 1.0) rho = 1.0;  // grid endpoint roundoff
    out << tdep::format_double(rho * rho) << ","
        << tdep::format_double(tdep::gauss_tdep_bivariate(sigma, sigma, rho)) << ","
        << tdep::format_double(tdep::gauss_marginal_tdep_bivariate(sigma, rho)) << ","
        << tdep::format_double(tdep::gauss_dcov2_bivariate(sigma, rho)) << ",";
    // Mutual information diverges at the endpoint; emit inf instead of dying.
    if (std::abs(rho) == 1.0) {
      out << "inf\n";
    } else {
      out << tdep::format_double(tdep::gauss_mutual_info(rho)) << "\n";
    }
  }
  write_output(out_path, out.str());
  return 0;
}

int run_synth(const InputOptions& in, const std::string& out_path) {
  if (!in.has_geometry()) throw tdep::UsageError("synth needs --geometry");
  const tdep::JointDiscreteMeasure gamma = generate(in);
  std::ostringstream out;
  tdep::write_samples_csv(out, gamma);
  write_output(out_path, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transport dependency toolkit"};
  app.require_subcommand(1);

  InputOptions in_compute, in_corr, in_test, in_power, in_synth;
  CostOptions cost_opt;
  CoeffOptions coeff_corr, coeff_test, coeff_power;
  std::string solver = "auto";
  std::string out_compute, out_corr, out_test, out_power, out_gauss, out_synth;
  std::string eps_grid, rho_grid;
  int test_m = 29, test_k = 2, power_m = 29, power_k = 2, power_runs = 100;
  std::uint64_t test_seed = 0;
  double gauss_sigma = 1.0;

  CLI::App* c_compute = app.add_subcommand("compute", "transport dependency with bounds");
  add_input_flags(c_compute, in_compute);
  add_cost_flags(c_compute, cost_opt);
  c_compute->add_option("--solver", solver, "solver (auto|exact|sinkhorn)");
  c_compute->add_option("--out", out_compute, "output file (default stdout)");

  CLI::App* c_corr = app.add_subcommand("corr", "dependence coefficient");
  add_input_flags(c_corr, in_corr);
  add_coeff_flags(c_corr, coeff_corr);
  c_corr->add_option("--out", out_corr, "output file (default stdout)");

  CLI::App* c_test = app.add_subcommand("test", "permutation independence test");
  add_input_flags(c_test, in_test);
  add_coeff_flags(c_test, coeff_test);
  c_test->add_option("--m", test_m, "number of permutations");
  c_test->add_option("--k", test_k, "rejection threshold");
  c_test->add_option("--test-seed", test_seed, "seed for the permutations (defaults to --seed)")
      ->expected(1);
  c_test->add_option("--out", out_test, "output file (default stdout)");

  CLI::App* c_power = app.add_subcommand("power", "rejection rate over a contamination grid");
  add_generator_flags(c_power, in_power);
  add_coeff_flags(c_power, coeff_power);
  c_power->add_option("--eps-grid", eps_grid, "contamination grid start:stop:step")->required();
  c_power->add_option("--runs", power_runs, "datasets per grid point");
  c_power->add_option("--m", power_m, "number of permutations");
  c_power->add_option("--k", power_k, "rejection threshold");
  c_power->add_option("--out", out_power, "output file (default stdout)");

  CLI::App* c_gauss = app.add_subcommand("gauss", "closed-form Gaussian dependency curves");
  c_gauss->add_option("--rho-grid", rho_grid, "correlation grid start:stop:step")->required();
  c_gauss->add_option("--sigma", gauss_sigma, "common marginal standard deviation");
  c_gauss->add_option("--out", out_gauss, "output file (default stdout)");

  CLI::App* c_synth = app.add_subcommand("synth", "synthetic sample CSV");
  add_generator_flags(c_synth, in_synth);
  c_synth->add_option("--out", out_synth, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*c_compute) return run_compute(in_compute, cost_opt, solver, out_compute);
    if (*c_corr) return run_corr(in_corr, coeff_corr, out_corr);
    if (*c_test) {
      if (!in_test.has_seed() && c_test->count("--test-seed") == 0) {
        throw tdep::UsageError("--seed is required");
      }
      const std::uint64_t seed = c_test->count("--test-seed") > 0 ? test_seed : in_test.seed;
      return run_test(in_test, coeff_test, test_m, test_k, seed, out_test);
    }
    if (*c_power) {
      return run_power(in_power, coeff_power, eps_grid, power_runs, power_m, power_k, out_power);
    }
    if (*c_gauss) return run_gauss(rho_grid, gauss_sigma, out_gauss);
    if (*c_synth) return run_synth(in_synth, out_synth);
    throw tdep::UsageError("no subcommand selected");
  } catch (const tdep::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const tdep::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tdep::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tdep::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
