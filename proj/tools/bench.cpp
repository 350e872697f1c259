// Benchmark for the dense scan kernels: runs each serial reference against
// its OpenMP variant, checks the outputs are bitwise identical, and prints a
// timing table.
//
// Usage: tdep-bench [n] [reps]
//   n     atoms per measure (default 600)
//   reps  timed repetitions per kernel (default 5)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "tdep/cost.hpp"
#include "tdep/kernels.hpp"
#include "tdep/measure.hpp"
#include "tdep/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

struct Row {
  const char* name;
  double serial_s;
  double parallel_s;
  bool match;
};

template <typename F>
double time_best(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    fn();
    auto t1 = Clock::now();
    double s = seconds(t0, t1);
    if (s < best) best = s;
  }
  return best;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 600;
  int reps = 5;
  if (argc > 1) n = static_cast<std::size_t>(std::strtoull(argv[1], nullptr, 10));
  if (argc > 2) reps = std::atoi(argv[2]);
  if (n < 2 || reps < 1) {
    std::fprintf(stderr, "usage: tdep-bench [n>=2] [reps>=1]\n");
    return 1;
  }

  tdep::Rng rng(12345);
  std::vector<double> xs(2 * n), ys(2 * n), w(n, 1.0 / static_cast<double>(n));
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ys) v = rng.uniform(-1.0, 1.0);
  tdep::JointDiscreteMeasure gamma(xs, ys, w, 2, 2);
  auto [mu, nu] = tdep::marginals(gamma);

  tdep::CostSpec spec;
  spec.family = tdep::CostFamily::additive;
  spec.p = 2.0;
  auto fc = tdep::factorize(spec);

  std::vector<Row> rows;

  {
    std::vector<double> out_s(n * n), out_p(n * n);
    double ts = time_best(reps, [&] {
      tdep::kernels::factor_matrix_serial(fc.x_factor, xs.data(), n, xs.data(), n, 2, out_s.data());
    });
    double tp = time_best(reps, [&] {
      tdep::kernels::factor_matrix(fc.x_factor, xs.data(), n, xs.data(), n, 2, out_p.data());
    });
    rows.push_back({"factor_matrix", ts, tp, bits_equal(out_s, out_p)});
  }

  {
    std::vector<double> out_s, out_p;
    double ts = time_best(reps, [&] { out_s = tdep::kernels::joint_cost_matrix_serial(fc, gamma, gamma); });
    double tp = time_best(reps, [&] { out_p = tdep::kernels::joint_cost_matrix(fc, gamma, gamma); });
    rows.push_back({"joint_cost_matrix", ts, tp, bits_equal(out_s, out_p)});
  }

  {
    // n^3 entries; keep the product instance smaller so it stays in memory.
    std::size_t np = n > 220 ? 220 : n;
    std::vector<double> pxs(xs.begin(), xs.begin() + 2 * np);
    std::vector<double> pys(ys.begin(), ys.begin() + 2 * np);
    std::vector<double> pw(np, 1.0 / static_cast<double>(np));
    tdep::JointDiscreteMeasure pg(pxs, pys, pw, 2, 2);
    auto [pmu, pnu] = tdep::marginals(pg);
    std::vector<double> out_s, out_p;
    double ts = time_best(reps, [&] { out_s = tdep::kernels::product_cost_matrix_serial(fc, pg, pmu, pnu); });
    double tp = time_best(reps, [&] { out_p = tdep::kernels::product_cost_matrix(fc, pg, pmu, pnu); });
    rows.push_back({"product_cost_matrix", ts, tp, bits_equal(out_s, out_p)});
  }

  {
    std::vector<double> m(n * n);
    for (auto& v : m) v = rng.uniform(0.0, 1.0);
    double rs = 0.0, rp = 0.0;
    double ts = time_best(reps, [&] { rs = tdep::kernels::expectation_matrix_serial(m.data(), w.data(), n, w.data(), n); });
    double tp = time_best(reps, [&] { rp = tdep::kernels::expectation_matrix(m.data(), w.data(), n, w.data(), n); });
    rows.push_back({"expectation_matrix", ts, tp, rs == rp});
  }

  {
    std::vector<double> mx(n * n), my(n * n);
    for (auto& v : mx) v = rng.uniform(0.0, 1.0);
    for (auto& v : my) v = rng.uniform(0.0, 1.0);
    double rs = 0.0, rp = 0.0;
    double ts = time_best(reps, [&] { rs = tdep::kernels::expectation_min_serial(mx.data(), my.data(), w.data(), n); });
    double tp = time_best(reps, [&] { rp = tdep::kernels::expectation_min(mx.data(), my.data(), w.data(), n); });
    rows.push_back({"expectation_min", ts, tp, rs == rp});
  }

  {
    std::vector<double> dx(n * n), dy(n * n);
    for (auto& v : dx) v = rng.uniform(0.0, 1.0);
    for (auto& v : dy) v = rng.uniform(0.0, 1.0);
    tdep::kernels::DcovSums ss{}, sp{};
    double ts = time_best(reps, [&] { ss = tdep::kernels::dcov_sums_serial(dx.data(), dy.data(), w.data(), n); });
    double tp = time_best(reps, [&] { sp = tdep::kernels::dcov_sums(dx.data(), dy.data(), w.data(), n); });
    bool ok = ss.joint == sp.joint && ss.mean_x == sp.mean_x && ss.mean_y == sp.mean_y &&
              ss.cross == sp.cross;
    rows.push_back({"dcov_sums", ts, tp, ok});
  }

  std::printf("threads: %d, n: %zu, reps: %d (best-of)\n", tdep::kernels::thread_count(), n, reps);
  std::printf("%-22s %12s %12s %9s %7s\n", "kernel", "serial [s]", "openmp [s]", "speedup", "match");
  bool all_match = true;
  for (const auto& r : rows) {
    double speedup = r.parallel_s > 0.0 ? r.serial_s / r.parallel_s : 0.0;
    std::printf("%-22s %12.6f %12.6f %8.2fx %7s\n", r.name, r.serial_s, r.parallel_s, speedup,
                r.match ? "yes" : "NO");
    if (!r.match) all_match = false;
  }
  if (!all_match) {
    std::fprintf(stderr, "error: parallel kernel output differs from serial reference\n");
    return 1;
  }
  return 0;
}
