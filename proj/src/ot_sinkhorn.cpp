#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>

#include "tdep/error.hpp"
#include "tdep/ot.hpp"

// Log-domain Sinkhorn with geometric eta-scaling. Costs are scaled to [0,1]
// up front, so eta is always relative to the cost range. Three execution
// paths share the same math:
//   - dense: the matrix fits in memory (<= 8e6 entries), straight iteration;
//   - product: the destination is a product measure and the cost splits as
//     c[i][jk] = A[i][j] + B[i][k]. Early stages run on a relaxation that
//     only enforces the two projected destination marginals, which keeps
//     every update O(n*(nx+ny)); the final stage switches to the true
//     constraint on a truncated kernel whose excluded mass is certified by
//     a full scan;
//   - streaming: anything else too big to materialize, rows re-evaluated
//     per pass. Correct but slow, kept as the fallback.
// All paths end with prune + rounding to exact marginals.

namespace tdep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kDenseCap = 8'000'000;        // entries worth materializing
constexpr std::size_t kProductMin = 2'000'000;      // below this, dense wins anyway
constexpr std::size_t kActiveCap = 150'000'000;     // truncated-kernel entry budget
constexpr double kExcludedTol = 1e-9;               // certified mass outside the kernel

// exp via 2^n * e^r with |r| <= ln(2)/2, degree-10 Taylor tail. Relative
// error is ~1e-13, far below the 1e-7 marginal tolerances, and it beats
// libm by enough to matter in the dense passes.
inline double fast_exp(double x) {
  if (x < -708.0) return 0.0;
  if (x > 708.0) return std::numeric_limits<double>::infinity();
  const double y = x * 1.4426950408889634;  // log2(e)
  const double nd = std::nearbyint(y);
  const double r = (y - nd) * 0.6931471805599453;
  double p = 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const int64_t n = static_cast<int64_t>(nd);
  const double p2 = std::bit_cast<double>(static_cast<uint64_t>(n + 1023) << 52);
  return p * p2;
}

struct Neumaier {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  double get() const { return s + c; }
};

std::vector<double> eta_schedule(const SinkhornOptions& opts) {
  if (!(opts.eta_start > 0.0) || !(opts.eta_end > 0.0) || !std::isfinite(opts.eta_start))
    throw UsageError("solve_sinkhorn_scaled: eta values must be positive");
  if (opts.eta_end > opts.eta_start)
    throw UsageError("solve_sinkhorn_scaled: eta_end exceeds eta_start");
  std::vector<double> etas;
  double eta = opts.eta_start;
  while (eta > opts.eta_end * (1.0 + 1e-12)) {
    etas.push_back(eta);
    eta *= 0.5;
  }
  etas.push_back(opts.eta_end);
  return etas;
}

std::vector<double> log_weights(std::span<const double> w) {
  std::vector<double> lw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) lw[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
  return lw;
}

void check_weights(std::span<const double> w, const char* side) {
  if (w.empty()) throw DataError(std::string("solve_sinkhorn_scaled: empty ") + side);
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DataError(std::string("solve_sinkhorn_scaled: bad ") + side + " weight");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw DataError(std::string("solve_sinkhorn_scaled: ") + side + " weights sum to " +
                    std::to_string(s));
}

// Scale rows then columns down to their targets, then spread the remaining
// deficit with a two-pointer sweep. Exact marginals, at most n+m new
// entries, deterministic. (A dense rank-one repair is not an option at the
// sizes the product path produces.)
void round_to_marginals(std::vector<PlanEntry>& entries, std::span<const double> a,
                        std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> rs(n, 0.0);
  for (const PlanEntry& e : entries) rs[e.src] += e.mass;
  std::vector<double> rscale(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    if (rs[i] > a[i]) rscale[i] = a[i] / rs[i];
  for (PlanEntry& e : entries) e.mass *= rscale[e.src];

  std::vector<double> cs(m, 0.0);
  for (const PlanEntry& e : entries) cs[e.dst] += e.mass;
  std::vector<double> cscale(m, 1.0);
  for (std::size_t j = 0; j < m; ++j)
    if (cs[j] > b[j]) cscale[j] = b[j] / cs[j];
  for (PlanEntry& e : entries) e.mass *= cscale[e.dst];

  std::vector<double> dr(a.begin(), a.end()), dc(b.begin(), b.end());
  for (const PlanEntry& e : entries) {
    dr[e.src] -= e.mass;
    dc[e.dst] -= e.mass;
  }
  for (double& d : dr) d = std::max(d, 0.0);
  for (double& d : dc) d = std::max(d, 0.0);

  std::size_t i = 0, j = 0;
  std::vector<PlanEntry> extra;
  while (true) {
    while (i < n && dr[i] <= 0.0) ++i;
    while (j < m && dc[j] <= 0.0) ++j;
    if (i >= n || j >= m) break;
    const double mv = std::min(dr[i], dc[j]);
    extra.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j), mv});
    dr[i] -= mv;
    dc[j] -= mv;
    if (dr[i] <= dc[j])
      dr[i] = 0.0;
    else
      dc[j] = 0.0;
  }
  entries.insert(entries.end(), extra.begin(), extra.end());
  std::sort(entries.begin(), entries.end(), [](const PlanEntry& x, const PlanEntry& y) {
    return x.src != y.src ? x.src < y.src : x.dst < y.dst;
  });
  std::size_t out = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (out > 0 && entries[out - 1].src == entries[k].src &&
        entries[out - 1].dst == entries[k].dst) {
      entries[out - 1].mass += entries[k].mass;
    } else {
      entries[out++] = entries[k];
    }
  }
  entries.resize(out);
  std::erase_if(entries, [](const PlanEntry& e) { return e.mass <= 0.0; });
}

// The rounded entropic plan spreads each row's mass over every arc the kernel
// kept, which biases the primal upward by O(eta). The support almost always
// contains an unregularized optimum, so re-solving the transport problem
// restricted to the support arcs removes the bias: successive shortest paths
// under Johnson potentials, flow rebuilt from scratch, each Dijkstra stopped
// at the nearest sink that still wants mass. Skipped when the graph is too
// large for the quadratic augmentation count; the rounded plan is kept
// unchanged when the budget runs out. `cost` holds the scaled per-entry
// costs aligned with `entries` and is compacted together with them.
void refine_on_support(std::vector<PlanEntry>& entries, std::vector<double>& cost,
                       std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t nodes = n + m;
  const std::size_t arcs = entries.size();
  if (arcs < 2 || nodes > 3072 || arcs > 32768) return;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kSeedEps = 1e-15;  // supply below this cannot seed a path
  constexpr double kDoneTol = 1e-12;  // unshipped mass considered settled

  std::vector<uint32_t> head(nodes + 1, 0);
  for (const PlanEntry& e : entries) {
    ++head[e.src + 1];
    ++head[n + e.dst + 1];
  }
  for (std::size_t v = 0; v < nodes; ++v) head[v + 1] += head[v];
  std::vector<uint32_t> adj(2 * arcs);
  {
    std::vector<uint32_t> fill(head.begin(), head.end() - 1);
    for (std::size_t e = 0; e < arcs; ++e) {
      adj[fill[entries[e].src]++] = static_cast<uint32_t>(e);
      adj[fill[n + entries[e].dst]++] = static_cast<uint32_t>(e);
    }
  }

  std::vector<double> flow(arcs, 0.0);
  std::vector<double> pot(nodes, 0.0);
  std::vector<double> excess(a.begin(), a.end());
  std::vector<double> deficit(b.begin(), b.end());
  std::vector<double> dist(nodes);
  std::vector<int64_t> parent(nodes);  // +-(arc index + 1), sign is direction
  std::vector<char> done(nodes);
  using Item = std::pair<double, uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;

  const std::size_t max_rounds = 8 * nodes + 64;
  bool solved = false;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    double remaining = 0.0;
    for (const double v : excess) remaining += v;
    if (remaining <= kDoneTol) {
      solved = true;
      break;
    }

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), int64_t{0});
    std::fill(done.begin(), done.end(), char{0});
    pq = {};
    for (std::size_t i = 0; i < n; ++i)
      if (excess[i] > kSeedEps) {
        dist[i] = 0.0;
        pq.push({0.0, static_cast<uint32_t>(i)});
      }
    int64_t target = -1;
    while (!pq.empty()) {
      const auto [d, x] = pq.top();
      pq.pop();
      if (done[x]) continue;
      done[x] = 1;
      if (x >= n && deficit[x - n] > kSeedEps) {
        target = static_cast<int64_t>(x);
        break;
      }
      if (x < n) {
        for (uint32_t idx = head[x]; idx < head[x + 1]; ++idx) {
          const uint32_t e = adj[idx];
          const std::size_t v = n + entries[e].dst;
          if (done[v]) continue;
          const double nd = d + std::max(0.0, cost[e] + pot[x] - pot[v]);
          if (nd < dist[v]) {
            dist[v] = nd;
            parent[v] = static_cast<int64_t>(e) + 1;
            pq.push({nd, static_cast<uint32_t>(v)});
          }
        }
      } else {
        for (uint32_t idx = head[x]; idx < head[x + 1]; ++idx) {
          const uint32_t e = adj[idx];
          if (flow[e] <= kSeedEps) continue;
          const std::size_t u = entries[e].src;
          if (done[u]) continue;
          const double nd = d + std::max(0.0, -cost[e] + pot[x] - pot[u]);
          if (nd < dist[u]) {
            dist[u] = nd;
            parent[u] = -(static_cast<int64_t>(e) + 1);
            pq.push({nd, static_cast<uint32_t>(u)});
          }
        }
      }
    }
    if (target < 0) break;  // no sink reachable, keep the rounded plan

    const double dt = dist[static_cast<std::size_t>(target)];
    for (std::size_t v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], dt);

    double delta = deficit[static_cast<std::size_t>(target) - n];
    std::size_t x = static_cast<std::size_t>(target);
    while (parent[x] != 0) {
      const int64_t pe = parent[x];
      if (pe > 0) {
        x = entries[static_cast<std::size_t>(pe - 1)].src;
      } else {
        delta = std::min(delta, flow[static_cast<std::size_t>(-pe - 1)]);
        x = n + entries[static_cast<std::size_t>(-pe - 1)].dst;
      }
    }
    delta = std::min(delta, excess[x]);
    if (!(delta > 0.0)) break;

    std::size_t y = static_cast<std::size_t>(target);
    while (parent[y] != 0) {
      const int64_t pe = parent[y];
      if (pe > 0) {
        flow[static_cast<std::size_t>(pe - 1)] += delta;
        y = entries[static_cast<std::size_t>(pe - 1)].src;
      } else {
        flow[static_cast<std::size_t>(-pe - 1)] -= delta;
        y = n + entries[static_cast<std::size_t>(-pe - 1)].dst;
      }
    }
    excess[y] -= delta;
    deficit[static_cast<std::size_t>(target) - n] -= delta;
  }
  if (!solved) return;

  double before = 0.0, after = 0.0;
  for (std::size_t e = 0; e < arcs; ++e) {
    before += entries[e].mass * cost[e];
    after += flow[e] * cost[e];
  }
  if (after > before) return;

  std::size_t out = 0;
  for (std::size_t e = 0; e < arcs; ++e) {
    if (flow[e] > 0.0) {
      entries[out] = {entries[e].src, entries[e].dst, flow[e]};
      cost[out] = cost[e];
      ++out;
    }
  }
  entries.resize(out);
  cost.resize(out);
}

double plan_marginal_error(const TransportPlan& plan, std::span<const double> a,
                           std::span<const double> b) {
  std::vector<double> dr(a.begin(), a.end()), dc(b.begin(), b.end());
  for (const PlanEntry& e : plan.entries) {
    dr[e.src] -= e.mass;
    dc[e.dst] -= e.mass;
  }
  Neumaier acc;
  for (double d : dr) acc.add(std::abs(d));
  for (double d : dc) acc.add(std::abs(d));
  return 0.5 * acc.get();
}

// Cost rows for the dense and streaming paths, already divided by scale.
struct MatrixRows {
  const double* c;
  std::size_t m;
  const double* row(std::size_t i, double*) const { return c + i * m; }
};
struct OracleRows {
  const CostOracle* oracle;
  double inv_scale;
  const double* row(std::size_t i, double* buf) const {
    oracle->fill_row(i, buf);
    for (std::size_t j = 0; j < oracle->cols(); ++j) buf[j] *= inv_scale;
    return buf;
  }
};

// One full eta stage of standard alternating updates. Rows are made exact,
// the column violation is measured, and columns are only updated while the
// violation is above tol, so a converged stage ends with exact rows.
template <class Rows>
SinkhornStage run_stage(const Rows& rows, std::size_t n, std::size_t m,
                        std::span<const double> log_a, std::span<const double> b,
                        std::span<const double> log_b, double eta, const SinkhornOptions& opts,
                        std::vector<double>& f, std::vector<double>& g, std::vector<double>& tmp,
                        std::vector<double>& colmax, std::vector<double>& colsum) {
  const double inv = 1.0 / eta;
  SinkhornStage stage;
  stage.eta = eta;
  stage.marginal_error = std::numeric_limits<double>::infinity();
  while (stage.iterations < opts.max_inner) {
    ++stage.iterations;
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) {
        f[i] = 0.0;
        continue;
      }
      const double* c = rows.row(i, tmp.data() + m);
      double mx = kNegInf;
      for (std::size_t j = 0; j < m; ++j) {
        const double t = log_b[j] + (g[j] - c[j]) * inv;
        tmp[j] = t;
        if (t > mx) mx = t;
      }
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += fast_exp(tmp[j] - mx);
      f[i] = -eta * (mx + std::log(s));
    }

    std::fill(colmax.begin(), colmax.end(), kNegInf);
    std::fill(colsum.begin(), colsum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* c = rows.row(i, tmp.data() + m);
      const double base = log_a[i] + f[i] * inv;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = base - c[j] * inv;
        if (v > colmax[j]) colmax[j] = v;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* c = rows.row(i, tmp.data() + m);
      const double base = log_a[i] + f[i] * inv;
      for (std::size_t j = 0; j < m; ++j) colsum[j] += fast_exp(base - c[j] * inv - colmax[j]);
    }
    Neumaier err;
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] <= 0.0) continue;
      const double s_j = colmax[j] + std::log(colsum[j]);
      err.add(std::abs(b[j] * fast_exp(g[j] * inv + s_j) - b[j]));
      tmp[j] = -eta * s_j;
    }
    stage.marginal_error = 0.5 * err.get();
    if (stage.marginal_error <= opts.stage_tol) break;
    for (std::size_t j = 0; j < m; ++j)
      if (b[j] > 0.0) g[j] = tmp[j];
  }
  return stage;
}

template <class Rows>
double stage_primal(const Rows& rows, std::size_t n, std::size_t m, std::span<const double> a,
                    std::span<const double> b, double eta, std::span<const double> f,
                    std::span<const double> g, double scale, std::vector<double>& tmp) {
  const double inv = 1.0 / eta;
  Neumaier acc;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] <= 0.0) continue;
    const double* c = rows.row(i, tmp.data() + m);
    Neumaier row_acc;
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] <= 0.0) continue;
      row_acc.add(a[i] * b[j] * fast_exp((f[i] + g[j] - c[j]) * inv) * c[j]);
    }
    acc.add(row_acc.get());
  }
  return acc.get() * scale;
}

template <class Rows>
SinkhornResult run_dense_like(const Rows& rows, std::size_t n, std::size_t m,
                              std::span<const double> a, std::span<const double> b, double scale,
                              const SinkhornOptions& opts) {
  const std::vector<double> log_a = log_weights(a);
  const std::vector<double> log_b = log_weights(b);
  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> tmp(2 * m), colmax(m), colsum(m);
  const std::vector<double> etas = eta_schedule(opts);

  SinkhornResult res;
  for (std::size_t t = 0; t < etas.size(); ++t) {
    SinkhornStage stage =
        run_stage(rows, n, m, log_a, b, log_b, etas[t], opts, f, g, tmp, colmax, colsum);
    stage.primal_cost = stage_primal(rows, n, m, a, b, etas[t], f, g, scale, tmp);
    res.stages.push_back(stage);
    if (t + 1 == etas.size() && stage.marginal_error > opts.fail_tol)
      throw NumericError("solve_sinkhorn_scaled: final stage stalled at marginal violation " +
                         std::to_string(stage.marginal_error));
  }

  const double inv = 1.0 / etas.back();
  res.plan.src_size = n;
  res.plan.dst_size = m;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] <= 0.0) continue;
    const double* c = rows.row(i, tmp.data() + m);
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] <= 0.0) continue;
      const double mass = a[i] * b[j] * fast_exp((f[i] + g[j] - c[j]) * inv);
      if (mass > opts.prune)
        res.plan.entries.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j), mass});
    }
  }
  round_to_marginals(res.plan.entries, a, b);
  std::vector<double> ecost(res.plan.entries.size());
  std::size_t k = 0;
  std::size_t li = static_cast<std::size_t>(-1);
  const double* lrow = nullptr;
  for (const PlanEntry& e : res.plan.entries) {
    if (e.src != li) {
      lrow = rows.row(e.src, tmp.data() + m);
      li = e.src;
    }
    ecost[k++] = lrow[e.dst];
  }
  refine_on_support(res.plan.entries, ecost, a, b);
  std::vector<double> terms(res.plan.entries.size());
  for (std::size_t e = 0; e < terms.size(); ++e)
    terms[e] = res.plan.entries[e].mass * ecost[e] * scale;
  res.plan.primal_cost = stable_sum(terms);
  res.marginal_error = plan_marginal_error(res.plan, a, b);
  return res;
}

// Product path. Destination atoms are the nx*ny pairs (j,k) in row-major
// order, costs are A[i][j] + B[i][k] after scaling.
struct ProductSolver {
  std::size_t n, nx, ny, m;
  double scale;
  std::span<const double> a, b;
  std::vector<double> A, B;  // scaled factor matrices
  std::vector<double> u, v;  // projected destination marginals
  std::vector<double> log_a, log_u, log_v, log_b;
  const SinkhornOptions* opts;

  std::vector<double> f, gx, gy;  // relaxed duals
  std::vector<double> g;          // true duals over jk
  std::vector<double> Rx, Ry, colmax, colsum, tmp;

  // truncated kernel
  std::vector<int64_t> row_ptr;
  std::vector<uint16_t> js, ks;

  ProductSolver(const ProductCostOracle& oracle, std::span<const double> a_in,
                std::span<const double> b_in, const SinkhornOptions& o)
      : n(oracle.rows()), nx(oracle.nx()), ny(oracle.ny()), m(nx * ny), a(a_in), b(b_in),
        opts(&o) {
    scale = oracle.cost_bound();
    if (scale <= 0.0) scale = 1.0;
    A.assign(oracle.a(), oracle.a() + n * nx);
    B.assign(oracle.b(), oracle.b() + n * ny);
    for (double& x : A) x /= scale;
    for (double& x : B) x /= scale;
    u.assign(nx, 0.0);
    v.assign(ny, 0.0);
    for (std::size_t j = 0; j < nx; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < ny; ++k) s += b[j * ny + k];
      u[j] = s;
    }
    for (std::size_t k = 0; k < ny; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < nx; ++j) s += b[j * ny + k];
      v[k] = s;
    }
    log_a = log_weights(a);
    log_u = log_weights(u);
    log_v = log_weights(v);
    log_b = log_weights(b);
    f.assign(n, 0.0);
    gx.assign(nx, 0.0);
    gy.assign(ny, 0.0);
    Rx.resize(n);
    Ry.resize(n);
    tmp.resize(std::max(nx, ny));
  }

  void row_softmins(const std::vector<double>& M, std::size_t w, const std::vector<double>& gw,
                    const std::vector<double>& log_w, double inv, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = M.data() + i * w;
      double mx = kNegInf;
      for (std::size_t j = 0; j < w; ++j) {
        const double t = log_w[j] + (gw[j] - r[j]) * inv;
        tmp[j] = t;
        if (t > mx) mx = t;
      }
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += fast_exp(tmp[j] - mx);
      out[i] = mx + std::log(s);
    }
  }

  // One relaxed dual update (factor side): column softmin over rows with the
  // opposite factor folded in through R. Returns the L1 violation.
  double update_factor(const std::vector<double>& M, std::size_t w, std::vector<double>& gw,
                       const std::vector<double>& wts, const std::vector<double>& R, double eta,
                       double inv, std::vector<double>& cm, std::vector<double>& cs) {
    cm.assign(w, kNegInf);
    cs.assign(w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* r = M.data() + i * w;
      const double base = log_a[i] + f[i] * inv + R[i];
      for (std::size_t j = 0; j < w; ++j) {
        const double t = base - r[j] * inv;
        if (t > cm[j]) cm[j] = t;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* r = M.data() + i * w;
      const double base = log_a[i] + f[i] * inv + R[i];
      for (std::size_t j = 0; j < w; ++j) cs[j] += fast_exp(base - r[j] * inv - cm[j]);
    }
    Neumaier err;
    for (std::size_t j = 0; j < w; ++j) {
      if (wts[j] <= 0.0) continue;
      const double s_j = cm[j] + std::log(cs[j]);
      err.add(std::abs(wts[j] * fast_exp(gw[j] * inv + s_j) - wts[j]));
      gw[j] = -eta * s_j;
    }
    return err.get();
  }

  SinkhornStage relaxed_stage(double eta) {
    const double inv = 1.0 / eta;
    SinkhornStage stage;
    stage.eta = eta;
    stage.marginal_error = std::numeric_limits<double>::infinity();
    std::vector<double> cmx, csx;
    while (stage.iterations < opts->max_inner) {
      ++stage.iterations;
      row_softmins(A, nx, gx, log_u, inv, Rx);
      row_softmins(B, ny, gy, log_v, inv, Ry);
      for (std::size_t i = 0; i < n; ++i) f[i] = -eta * (Rx[i] + Ry[i]);
      const double errx = update_factor(A, nx, gx, u, Ry, eta, inv, cmx, csx);
      row_softmins(A, nx, gx, log_u, inv, Rx);
      const double erry = update_factor(B, ny, gy, v, Rx, eta, inv, cmx, csx);
      stage.marginal_error = 0.5 * (errx + erry);
      if (stage.marginal_error <= opts->stage_tol) break;
    }
    stage.primal_cost = relaxed_primal(eta);
    return stage;
  }

  double relaxed_primal(double eta) {
    const double inv = 1.0 / eta;
    row_softmins(A, nx, gx, log_u, inv, Rx);
    row_softmins(B, ny, gy, log_v, inv, Ry);
    Neumaier acc;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      Neumaier row_acc;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fb = f[i] * inv;
      for (std::size_t j = 0; j < nx; ++j)
        row_acc.add(a[i] * u[j] * fast_exp(fb + (gx[j] - ar[j]) * inv + Ry[i]) * ar[j]);
      for (std::size_t k = 0; k < ny; ++k)
        row_acc.add(a[i] * v[k] * fast_exp(fb + (gy[k] - br[k]) * inv + Rx[i]) * br[k]);
      acc.add(row_acc.get());
    }
    return acc.get() * scale;
  }

  // Build the active set: entries with (f + g - c)/eta >= -threshold, plus
  // the best entry of every otherwise-empty row and column so each
  // constraint stays represented.
  void build_active(double inv, double threshold) {
    std::vector<double> col_best(m, kNegInf);
    std::vector<uint32_t> col_best_i(m, 0);
    std::vector<double> row_best(n, kNegInf);
    std::vector<uint32_t> row_best_jk(n, 0);
    std::vector<int64_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      int64_t cnt = 0;
      std::size_t jk = 0;
      for (std::size_t j = 0; j < nx; ++j) {
        const double base = fi - ar[j] * inv;
        for (std::size_t k = 0; k < ny; ++k, ++jk) {
          const double s = base + (g[jk] - br[k]) * inv;
          cnt += s >= -threshold;
          if (s > col_best[jk]) {
            col_best[jk] = s;
            col_best_i[jk] = static_cast<uint32_t>(i);
          }
          if (s > row_best[i]) {
            row_best[i] = s;
            row_best_jk[i] = static_cast<uint32_t>(jk);
          }
        }
      }
      counts[i] = cnt;
    }
    // forced entries, grouped per row and sorted by jk
    std::vector<std::vector<uint32_t>> forced(n);
    for (std::size_t jk = 0; jk < m; ++jk) {
      if (b[jk] <= 0.0) continue;
      if (col_best[jk] < -threshold)
        forced[col_best_i[jk]].push_back(static_cast<uint32_t>(jk));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      if (counts[i] == 0 && forced[i].empty()) forced[i].push_back(row_best_jk[i]);
      std::sort(forced[i].begin(), forced[i].end());
      forced[i].erase(std::unique(forced[i].begin(), forced[i].end()), forced[i].end());
    }
    row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
      row_ptr[i + 1] = row_ptr[i] + counts[i] + static_cast<int64_t>(forced[i].size());
    const int64_t nnz = row_ptr[n];
    if (nnz > static_cast<int64_t>(kActiveCap))
      throw CapacityError("solve_sinkhorn_scaled: truncated kernel exceeds memory budget");
    js.resize(nnz);
    ks.resize(nnz);
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      int64_t w = row_ptr[i];
      std::size_t fpos = 0;
      std::size_t jk = 0;
      for (std::size_t j = 0; j < nx; ++j) {
        const double base = fi - ar[j] * inv;
        for (std::size_t k = 0; k < ny; ++k, ++jk) {
          const bool force = fpos < forced[i].size() && forced[i][fpos] == jk;
          if (force) ++fpos;
          const double s = base + (g[jk] - br[k]) * inv;
          if (s >= -threshold || force) {
            js[w] = static_cast<uint16_t>(j);
            ks[w] = static_cast<uint16_t>(k);
            ++w;
          }
        }
      }
      // forced entries sit strictly below the threshold, so the two sources
      // never overlap and the row must land exactly on its offset
      if (w != row_ptr[i + 1])
        throw NumericError("solve_sinkhorn_scaled: active set bookkeeping failed");
    }
  }

  // Mass outside the active set under the current duals; everything below
  // exp(-37) is dropped against a matching analytic bound.
  double excluded_mass(double inv) {
    Neumaier total_all;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      Neumaier row_acc;
      std::size_t jk = 0;
      for (std::size_t j = 0; j < nx; ++j) {
        const double base = fi - ar[j] * inv;
        for (std::size_t k = 0; k < ny; ++k, ++jk) {
          const double s = base + (g[jk] - br[k]) * inv;
          if (s > -37.0) row_acc.add(b[jk] * fast_exp(s));
        }
      }
      total_all.add(a[i] * row_acc.get());
    }
    Neumaier total_active;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      Neumaier row_acc;
      for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        const std::size_t j = js[e], k = ks[e];
        const double s = fi + (g[j * ny + k] - ar[j] - br[k]) * inv;
        if (s > -37.0) row_acc.add(b[j * ny + k] * fast_exp(s));
      }
      total_active.add(a[i] * row_acc.get());
    }
    return std::max(total_all.get() - total_active.get(), 0.0) + 8.6e-17;  // + exp(-37)
  }

  SinkhornStage true_stage(double eta) {
    const double inv = 1.0 / eta;
    g.resize(m);
    for (std::size_t j = 0; j < nx; ++j)
      for (std::size_t k = 0; k < ny; ++k) g[j * ny + k] = gx[j] + gy[k];
    colmax.resize(m);
    colsum.resize(m);

    double threshold = 45.0;
    int rebuilds = 0;
    build_active(inv, threshold);

    SinkhornStage stage;
    stage.eta = eta;
    stage.marginal_error = std::numeric_limits<double>::infinity();
    bool certified = false;
    double best_err = std::numeric_limits<double>::infinity();
    int stall = 0;
    int recenters = 0;
    while (stage.iterations < opts->max_inner) {
      ++stage.iterations;
      for (std::size_t i = 0; i < n; ++i) {
        if (log_a[i] == kNegInf) {
          f[i] = 0.0;
          continue;
        }
        const double* ar = A.data() + i * nx;
        const double* br = B.data() + i * ny;
        double mx = kNegInf;
        for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
          const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
          const double t = log_b[jk] + (g[jk] - ar[j] - br[k]) * inv;
          if (t > mx) mx = t;
        }
        double s = 0.0;
        for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
          const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
          s += fast_exp(log_b[jk] + (g[jk] - ar[j] - br[k]) * inv - mx);
        }
        f[i] = -eta * (mx + std::log(s));
      }

      std::fill(colmax.begin(), colmax.end(), kNegInf);
      std::fill(colsum.begin(), colsum.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (log_a[i] == kNegInf) continue;
        const double* ar = A.data() + i * nx;
        const double* br = B.data() + i * ny;
        const double base = log_a[i] + f[i] * inv;
        for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
          const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
          const double t = base - (ar[j] + br[k]) * inv;
          if (t > colmax[jk]) colmax[jk] = t;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (log_a[i] == kNegInf) continue;
        const double* ar = A.data() + i * nx;
        const double* br = B.data() + i * ny;
        const double base = log_a[i] + f[i] * inv;
        for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
          const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
          colsum[jk] += fast_exp(base - (ar[j] + br[k]) * inv - colmax[jk]);
        }
      }
      Neumaier err;
      for (std::size_t jk = 0; jk < m; ++jk) {
        if (b[jk] <= 0.0 || colsum[jk] <= 0.0) continue;
        const double s_jk = colmax[jk] + std::log(colsum[jk]);
        err.add(std::abs(b[jk] * fast_exp(g[jk] * inv + s_jk) - b[jk]));
        colmax[jk] = -eta * s_jk;  // reuse as the pending update
      }
      stage.marginal_error = 0.5 * err.get();
      if (stage.marginal_error <= opts->stage_tol) {
        const double excluded = excluded_mass(inv);
        if (excluded <= kExcludedTol) {
          stage.marginal_error += excluded;
          certified = true;
          break;
        }
        if (++rebuilds > 3)
          throw NumericError("solve_sinkhorn_scaled: truncated kernel failed to certify");
        threshold += 10.0;
        build_active(inv, threshold);
        continue;
      }
      for (std::size_t jk = 0; jk < m; ++jk)
        if (b[jk] > 0.0 && colsum[jk] > 0.0) g[jk] = colmax[jk];
      // The truncated kernel has its own fixed point whose marginals sit
      // above the target when the potentials drift away from the set they
      // were built around. Recenter the set once progress flattens out.
      if (stage.marginal_error < 0.7 * best_err) {
        best_err = stage.marginal_error;
        stall = 0;
      } else if (++stall >= 48 && recenters < 12) {
        build_active(inv, threshold);
        ++recenters;
        stall = 0;
        best_err = stage.marginal_error;
      }
    }
    if (!certified && stage.marginal_error <= opts->fail_tol) {
      // Rounding repairs this much violation; all that is still needed is the
      // truncation certificate.
      const double excluded = excluded_mass(inv);
      if (excluded <= kExcludedTol) {
        stage.marginal_error += excluded;
        certified = true;
      }
    }
    if (!certified)
      throw NumericError("solve_sinkhorn_scaled: final stage stalled at marginal violation " +
                         std::to_string(stage.marginal_error));
    stage.primal_cost = active_primal(inv);
    return stage;
  }

  double active_primal(double inv) {
    Neumaier acc;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      Neumaier row_acc;
      for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
        const double c = ar[j] + br[k];
        row_acc.add(b[jk] * fast_exp(fi + (g[jk] - c) * inv) * c);
      }
      acc.add(a[i] * row_acc.get());
    }
    return acc.get() * scale;
  }

  SinkhornResult solve() {
    const std::vector<double> etas = eta_schedule(*opts);
    SinkhornResult res;
    for (std::size_t t = 0; t + 1 < etas.size(); ++t) res.stages.push_back(relaxed_stage(etas[t]));
    res.stages.push_back(true_stage(etas.back()));

    const double inv = 1.0 / etas.back();
    res.plan.src_size = n;
    res.plan.dst_size = m;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      const double* ar = A.data() + i * nx;
      const double* br = B.data() + i * ny;
      const double fi = f[i] * inv;
      for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        const std::size_t j = js[e], k = ks[e], jk = j * ny + k;
        const double mass = a[i] * b[jk] * fast_exp(fi + (g[jk] - ar[j] - br[k]) * inv);
        if (mass > opts->prune)
          res.plan.entries.push_back(
              {static_cast<uint32_t>(i), static_cast<uint32_t>(jk), mass});
      }
    }
    round_to_marginals(res.plan.entries, a, b);
    std::vector<double> terms(res.plan.entries.size());
    for (std::size_t e = 0; e < res.plan.entries.size(); ++e) {
      const PlanEntry& pe = res.plan.entries[e];
      const std::size_t j = pe.dst / ny, k = pe.dst % ny;
      terms[e] = pe.mass * (A[pe.src * nx + j] + B[pe.src * ny + k]) * scale;
    }
    res.plan.primal_cost = stable_sum(terms);
    res.marginal_error = plan_marginal_error(res.plan, a, b);
    return res;
  }
};

}  // namespace

DenseCostOracle::DenseCostOracle(const double* cost, std::size_t n, std::size_t m)
    : cost_(cost), n_(n), m_(m) {}

void DenseCostOracle::fill_row(std::size_t i, double* out) const {
  std::memcpy(out, cost_ + i * m_, m_ * sizeof(double));
}

double DenseCostOracle::cost_bound() const {
  double mx = 0.0;
  for (std::size_t e = 0; e < n_ * m_; ++e) mx = std::max(mx, cost_[e]);
  return mx;
}

ProductCostOracle::ProductCostOracle(std::vector<double> a, std::vector<double> b, std::size_t n,
                                     std::size_t nx, std::size_t ny, Combine op, double outer_exp)
    : a_(std::move(a)), b_(std::move(b)), n_(n), nx_(nx), ny_(ny) {
  fc_.op = op;
  fc_.outer_exp = outer_exp;
  if (a_.size() != n * nx || b_.size() != n * ny)
    throw UsageError("ProductCostOracle: factor matrix shape mismatch");
}

void ProductCostOracle::fill_row(std::size_t i, double* out) const {
  const double* ar = a_.data() + i * nx_;
  const double* br = b_.data() + i * ny_;
  std::size_t t = 0;
  for (std::size_t j = 0; j < nx_; ++j) {
    const double aj = ar[j];
    for (std::size_t k = 0; k < ny_; ++k) out[t++] = fc_.combine(aj, br[k]);
  }
}

double ProductCostOracle::cost_bound() const {
  // every combine is nondecreasing in both arguments, so the row maximum is
  // the combine of the factor row maxima
  double mx = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t j = 0; j < nx_; ++j) ma = std::max(ma, a_[i * nx_ + j]);
    for (std::size_t k = 0; k < ny_; ++k) mb = std::max(mb, b_[i * ny_ + k]);
    mx = std::max(mx, fc_.combine(ma, mb));
  }
  return mx;
}

SinkhornResult solve_sinkhorn_scaled(std::span<const double> src_weights,
                                     std::span<const double> dst_weights, const CostOracle& cost,
                                     const SinkhornOptions& opts) {
  check_weights(src_weights, "source");
  check_weights(dst_weights, "destination");
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n != src_weights.size() || m != dst_weights.size())
    throw UsageError("solve_sinkhorn_scaled: oracle shape does not match weights");
  if (n > 0xFFFFFFFFull || m > 0xFFFFFFFFull)
    throw CapacityError("solve_sinkhorn_scaled: instance too large");

  const auto* product = dynamic_cast<const ProductCostOracle*>(&cost);
  if (product && product->additive() && n * m > kProductMin && product->nx() <= 65535 &&
      product->ny() <= 65535) {
    ProductSolver solver(*product, src_weights, dst_weights, opts);
    return solver.solve();
  }

  if (n * m <= kDenseCap) {
    std::vector<double> C(n * m);
    for (std::size_t i = 0; i < n; ++i) cost.fill_row(i, C.data() + i * m);
    double scale = 0.0;
    for (double c : C) {
      if (!(c >= 0.0) || !std::isfinite(c))
        throw DataError("solve_sinkhorn_scaled: costs must be finite and nonnegative");
      scale = std::max(scale, c);
    }
    if (scale <= 0.0) scale = 1.0;
    for (double& c : C) c /= scale;
    return run_dense_like(MatrixRows{C.data(), m}, n, m, src_weights, dst_weights, scale, opts);
  }

  double scale = cost.cost_bound();
  if (scale <= 0.0) scale = 1.0;
  return run_dense_like(OracleRows{&cost, 1.0 / scale}, n, m, src_weights, dst_weights, scale,
                        opts);
}

}  // namespace tdep
