#include <algorithm>
#include <cmath>
#include <limits>

#include "tdep/error.hpp"
#include "tdep/ot.hpp"

// Primal network simplex on the dense bipartite transportation graph, after
// the classic LEMON layout: an artificial root node with one artificial arc
// per real node forms the initial spanning tree, the tree is kept as
// parent/pred/thread/rev_thread/succ_num/last_succ arrays, and entering arcs
// come from a cyclic block search over reduced costs. Real arcs are implicit
// (arc i*m+j runs source i -> sink j with cost C[i*m+j]) and flow is stored
// per node on its pred arc, so non-tree arcs cost no memory. Uncapacitated,
// which means non-tree arcs always sit at zero flow and no state array is
// needed: tree arcs have reduced cost within roundoff of zero and never pass
// the relative eligibility threshold.

namespace tdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEligibleEps = 1e-14;  // relative reduced-cost threshold
constexpr double kDualFeasTol = 1e-7;
constexpr double kGapTol = 1e-7;

void check_weights_arg(std::span<const double> w, const char* side) {
  if (w.empty()) throw DataError(std::string("solve_exact: empty ") + side + " measure");
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DataError(std::string("solve_exact: bad ") + side + " weight");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw DataError(std::string("solve_exact: ") + side + " weights sum to " + std::to_string(s));
}

}  // namespace

struct ExactSolver::Impl {
  int32_t n = 0, m = 0;    // sources, sinks
  int32_t node_num = 0;    // n + m + 1, root is node n + m
  int64_t arc_num = 0;     // real arcs
  const double* cost = nullptr;

  std::vector<double> supply;      // +a_i for sources, -b_j for sinks
  std::vector<int32_t> parent, thread, rev_thread, succ_num, last_succ;
  std::vector<int64_t> pred;       // pred arc id per node
  std::vector<uint8_t> forward;    // node is the source of its pred arc
  std::vector<double> flow;        // flow on the pred arc per node
  std::vector<double> pi;
  std::vector<uint8_t> art_to_root;  // artificial arc direction per node
  std::vector<int32_t> order;        // scratch: thread order
  std::vector<double> col_min;       // scratch for initial pivots
  std::vector<int64_t> col_min_arc;
  std::vector<int32_t> dirty_revs;
  double art_cost = 0.0;
  bool warm = false;

  // pivot state
  int64_t next_arc = 0, in_arc = -1;
  int64_t block_size = 0;
  int32_t join = -1, u_in = -1, v_in = -1, u_out = -1, v_out = -1;
  double delta = 0.0;
  double in_flow = 0.0;

  int32_t root() const { return node_num - 1; }
  bool is_real(int64_t e) const { return e < arc_num; }

  int32_t arc_source(int64_t e) const {
    if (is_real(e)) return static_cast<int32_t>(e / m);
    const int32_t u = static_cast<int32_t>(e - arc_num);
    return art_to_root[u] ? u : root();
  }
  int32_t arc_target(int64_t e) const {
    if (is_real(e)) return n + static_cast<int32_t>(e % m);
    const int32_t u = static_cast<int32_t>(e - arc_num);
    return art_to_root[u] ? root() : u;
  }
  double arc_cost(int64_t e) const {
    if (is_real(e)) return cost[e];
    return art_to_root[static_cast<int32_t>(e - arc_num)] ? 0.0 : art_cost;
  }

  void init_tree() {
    const int32_t rt = root();
    double max_c = 0.0;
    for (int64_t e = 0; e < arc_num; ++e) max_c = std::max(max_c, std::abs(cost[e]));
    if (!std::isfinite(max_c)) throw DataError("solve_exact: non-finite cost");
    art_cost = (max_c + 1.0) * node_num;

    double total = 0.0;
    for (int32_t u = 0; u < rt; ++u) total += supply[u];

    parent[rt] = -1;
    pred[rt] = -1;
    thread[rt] = 0;
    rev_thread[0] = rt;
    succ_num[rt] = node_num;
    last_succ[rt] = rt - 1;
    pi[rt] = 0.0;
    flow[rt] = 0.0;

    for (int32_t u = 0; u < rt; ++u) {
      parent[u] = rt;
      pred[u] = arc_num + u;
      thread[u] = u + 1;
      rev_thread[u + 1] = u;
      succ_num[u] = 1;
      last_succ[u] = u;
      if (supply[u] >= 0.0) {
        art_to_root[u] = 1;
        forward[u] = 1;
        pi[u] = 0.0;
        flow[u] = supply[u];
      } else {
        art_to_root[u] = 0;
        forward[u] = 0;
        pi[u] = art_cost;
        flow[u] = -supply[u];
      }
    }
    thread[rt - 1] = rt;

    next_arc = 0;
    block_size = std::max<int64_t>(
        static_cast<int64_t>(std::sqrt(static_cast<double>(arc_num))), 10);
    (void)total;  // imbalance (~1e-16) parks on the root's artificial arcs
  }

  bool accept(double min_rc, int64_t e) const {
    const double a = std::max({std::abs(pi[arc_source(e)]), std::abs(pi[arc_target(e)]),
                               std::abs(arc_cost(e))});
    return min_rc < -kEligibleEps * a;
  }

  // Cyclic block search over the real arcs, most negative reduced cost in
  // the block wins, lowest id on ties. Artificial arcs never re-enter.
  bool find_entering_arc() {
    double best = 0.0;
    int64_t best_arc = -1;
    int64_t e = next_arc;
    int64_t cnt = block_size;
    int32_t i = static_cast<int32_t>(e / m);
    double pi_i = pi[i];
    int64_t row_end = static_cast<int64_t>(i + 1) * m;
    const double* pg = pi.data() + n;
    int64_t scanned = 0;
    while (scanned < arc_num) {
      const int64_t chunk = std::min({row_end - e, cnt, arc_num - scanned});
      const double* c = cost + e;
      const double* g = pg + (e - (row_end - m));
      for (int64_t t = 0; t < chunk; ++t) {
        const double rc = c[t] + pi_i - g[t];
        if (rc < best) {
          best = rc;
          best_arc = e + t;
        }
      }
      e += chunk;
      scanned += chunk;
      cnt -= chunk;
      if (e == row_end) {
        if (e == arc_num) {
          e = 0;
          i = 0;
        } else {
          ++i;
        }
        pi_i = pi[i];
        row_end = static_cast<int64_t>(i + 1) * m;
      }
      if (cnt == 0) {
        if (best_arc >= 0 && accept(best, best_arc)) {
          in_arc = best_arc;
          next_arc = e;
          return true;
        }
        cnt = block_size;
      }
    }
    if (best_arc >= 0 && accept(best, best_arc)) {
      in_arc = best_arc;
      next_arc = e;
      return true;
    }
    return false;
  }

  void find_join_node() {
    int32_t u = arc_source(in_arc), v = arc_target(in_arc);
    while (u != v) {
      if (succ_num[u] < succ_num[v])
        u = parent[u];
      else
        v = parent[v];
    }
    join = u;
  }

  // Entering arcs always come from the lower bound here, so the cycle runs
  // in arc direction. Tie rule (strict < on the first path, <= on the
  // second) keeps the tree strongly feasible.
  bool find_leaving_arc() {
    const int32_t first = arc_source(in_arc), second = arc_target(in_arc);
    delta = kInf;
    int result = 0;
    for (int32_t u = first; u != join; u = parent[u]) {
      const double d = forward[u] ? flow[u] : kInf;
      if (d < delta) {
        delta = d;
        u_out = u;
        result = 1;
      }
    }
    for (int32_t u = second; u != join; u = parent[u]) {
      const double d = forward[u] ? kInf : flow[u];
      if (d <= delta) {
        delta = d;
        u_out = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in = first;
      v_in = second;
    } else {
      u_in = second;
      v_in = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta > 0.0) {
      for (int32_t u = arc_source(in_arc); u != join; u = parent[u])
        flow[u] += forward[u] ? -delta : delta;
      for (int32_t u = arc_target(in_arc); u != join; u = parent[u])
        flow[u] += forward[u] ? delta : -delta;
    }
    in_flow = delta;
  }

  void update_tree_structure() {
    int32_t w;
    int32_t u = last_succ[u_in];
    const int32_t old_rev_thread = rev_thread[u_out];
    const int32_t old_succ_num = succ_num[u_out];
    const int32_t old_last_succ = last_succ[u_out];
    v_out = parent[u_out];
    int32_t right = thread[u];
    int32_t last = (old_rev_thread == v_in) ? thread[last_succ[u_out]] : thread[v_in];

    thread[v_in] = u_in;
    int32_t stem = u_in;
    dirty_revs.clear();
    dirty_revs.push_back(v_in);
    int32_t par_stem = v_in;
    while (stem != u_out) {
      const int32_t new_stem = parent[stem];
      thread[u] = new_stem;
      dirty_revs.push_back(u);

      w = rev_thread[stem];
      thread[w] = right;
      rev_thread[right] = w;

      parent[stem] = par_stem;
      par_stem = stem;
      stem = new_stem;

      u = (last_succ[stem] == last_succ[par_stem]) ? rev_thread[par_stem] : last_succ[stem];
      right = thread[u];
    }
    parent[u_out] = par_stem;
    thread[u] = last;
    rev_thread[last] = last_succ[u_out] = u;

    if (old_rev_thread != v_in) {
      thread[old_rev_thread] = right;
      rev_thread[right] = old_rev_thread;
    }

    for (int32_t d : dirty_revs) rev_thread[thread[d]] = d;

    // Walk the reversed stem, handing each node the pred arc (and its flow)
    // that previously belonged to its new parent.
    int32_t tmp_sc = 0;
    const int32_t tmp_ls = last_succ[u_out];
    u = u_out;
    while (u != u_in) {
      w = parent[u];
      pred[u] = pred[w];
      forward[u] = !forward[w];
      flow[u] = flow[w];
      tmp_sc += succ_num[u] - succ_num[w];
      succ_num[u] = tmp_sc;
      last_succ[w] = tmp_ls;
      u = w;
    }
    pred[u_in] = in_arc;
    forward[u_in] = (u_in == arc_source(in_arc));
    flow[u_in] = in_flow;
    succ_num[u_in] = old_succ_num;

    int32_t up_limit_in = -1, up_limit_out = -1;
    if (last_succ[join] == v_in)
      up_limit_out = join;
    else
      up_limit_in = join;

    for (u = v_in; u != up_limit_in && last_succ[u] == v_in; u = parent[u])
      last_succ[u] = last_succ[u_out];

    if (join != old_rev_thread && v_in != old_rev_thread) {
      for (u = v_out; u != up_limit_out && last_succ[u] == old_last_succ; u = parent[u])
        last_succ[u] = old_rev_thread;
    } else {
      for (u = v_out; u != up_limit_out && last_succ[u] == old_last_succ; u = parent[u])
        last_succ[u] = last_succ[u_out];
    }

    for (u = v_in; u != join; u = parent[u]) succ_num[u] += old_succ_num;
    for (u = v_out; u != join; u = parent[u]) succ_num[u] -= old_succ_num;
  }

  void update_potential() {
    const double c = arc_cost(pred[u_in]);
    const double sigma = forward[u_in] ? pi[v_in] - pi[u_in] - c : pi[v_in] - pi[u_in] + c;
    const int32_t end = thread[last_succ[u_in]];
    for (int32_t u = u_in; u != end; u = thread[u]) pi[u] += sigma;
  }

  bool pivot(int64_t entering) {
    in_arc = entering;
    find_join_node();
    if (!find_leaving_arc()) throw NumericError("solve_exact: unbounded pivot cycle");
    if (delta == kInf) throw NumericError("solve_exact: unbounded pivot cycle");
    change_flow();
    update_tree_structure();
    update_potential();
    return true;
  }

  // One min-cost incoming arc per sink, pivoted in sink order. Cuts the cold
  // start pivot count substantially on metric instances.
  void initial_pivots() {
    col_min.assign(m, kInf);
    col_min_arc.assign(m, -1);
    for (int32_t i = 0; i < n; ++i) {
      const double* row = cost + static_cast<int64_t>(i) * m;
      const int64_t base = static_cast<int64_t>(i) * m;
      for (int32_t j = 0; j < m; ++j) {
        if (row[j] < col_min[j]) {
          col_min[j] = row[j];
          col_min_arc[j] = base + j;
        }
      }
    }
    for (int32_t j = 0; j < m; ++j) {
      const int64_t e = col_min_arc[j];
      if (e < 0) continue;
      const int32_t s = arc_source(e), t = arc_target(e);
      if (pred[s] == e || pred[t] == e) continue;  // already in tree
      if (arc_cost(e) + pi[s] - pi[t] >= 0.0) continue;
      pivot(e);
    }
  }

  void rebuild_thread_order() {
    order.clear();
    order.reserve(node_num);
    const int32_t rt = root();
    order.push_back(rt);
    for (int32_t v = thread[rt]; v != rt; v = thread[v]) order.push_back(v);
    if (static_cast<int32_t>(order.size()) != node_num)
      throw NumericError("solve_exact: corrupted tree thread");
  }

  // Tree flows are uniquely determined by the supplies; recomputing them
  // from scratch discards the roundoff the pivot updates accumulate.
  void recompute_flows() {
    std::vector<double> ex(supply);
    ex[root()] = 0.0;
    for (std::size_t k = order.size(); k-- > 1;) {
      const int32_t u = order[k];
      const double e = ex[u];
      ex[parent[u]] += e;
      flow[u] = std::max(forward[u] ? e : -e, 0.0);
    }
  }

  void recompute_potentials() {
    pi[root()] = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) {
      const int32_t u = order[k];
      const double c = arc_cost(pred[u]);
      pi[u] = forward[u] ? pi[parent[u]] - c : pi[parent[u]] + c;
    }
  }

  void run_pivots() {
    const int64_t pivot_limit = 50LL * node_num + 100000;
    int64_t pivots = 0;
    while (find_entering_arc()) {
      if (++pivots > pivot_limit) throw NumericError("solve_exact: pivot limit exceeded");
      pivot(in_arc);
    }
  }

  ExactResult extract() {
    const int32_t rt = root();
    for (int32_t u = 0; u < rt; ++u) {
      if (!is_real(pred[u]) && flow[u] > 1e-7)
        throw DataError("solve_exact: supplies and demands do not balance");
    }
    rebuild_thread_order();
    recompute_flows();
    recompute_potentials();

    ExactResult res;
    res.plan.src_size = static_cast<std::size_t>(n);
    res.plan.dst_size = static_cast<std::size_t>(m);
    for (int32_t u = 0; u < rt; ++u) {
      const int64_t e = pred[u];
      if (!is_real(e) || flow[u] <= 0.0) continue;
      res.plan.entries.push_back({static_cast<uint32_t>(arc_source(e)),
                                  static_cast<uint32_t>(arc_target(e) - n), flow[u]});
    }
    std::sort(res.plan.entries.begin(), res.plan.entries.end(),
              [](const PlanEntry& a, const PlanEntry& b) {
                return a.src != b.src ? a.src < b.src : a.dst < b.dst;
              });
    std::vector<double> terms(res.plan.entries.size());
    for (std::size_t k = 0; k < res.plan.entries.size(); ++k) {
      const PlanEntry& pe = res.plan.entries[k];
      terms[k] = pe.mass * cost[static_cast<int64_t>(pe.src) * m + pe.dst];
    }
    res.plan.primal_cost = stable_sum(terms);

    res.dual.f.resize(n);
    res.dual.g.resize(m);
    std::vector<double> dual_terms(n + m);
    for (int32_t i = 0; i < n; ++i) {
      res.dual.f[i] = -pi[i];
      dual_terms[i] = supply[i] * res.dual.f[i];
    }
    for (int32_t j = 0; j < m; ++j) {
      res.dual.g[j] = pi[n + j];
      dual_terms[n + j] = -supply[n + j] * res.dual.g[j];
    }
    res.dual.dual_value = stable_sum(dual_terms);
    res.gap = res.plan.primal_cost - res.dual.dual_value;

    certify(res);
    return res;
  }

  void certify(const ExactResult& res) const {
    double worst = -kInf;
    for (int32_t i = 0; i < n; ++i) {
      const double* row = cost + static_cast<int64_t>(i) * m;
      double row_max = -kInf;
      for (int32_t j = 0; j < m; ++j) row_max = std::max(row_max, res.dual.g[j] - row[j]);
      worst = std::max(worst, row_max + res.dual.f[i]);
    }
    if (worst > kDualFeasTol)
      throw NumericError("solve_exact: dual infeasible by " + std::to_string(worst));
    const double budget = kGapTol * (1.0 + std::abs(res.plan.primal_cost));
    if (std::abs(res.gap) > budget)
      throw NumericError("solve_exact: duality gap " + std::to_string(res.gap) +
                         " exceeds certificate budget");
  }

  ExactResult solve(const double* c) {
    cost = c;
    if (!warm) {
      init_tree();
      initial_pivots();
      warm = true;
    } else {
      rebuild_thread_order();
      recompute_flows();
      recompute_potentials();
      next_arc = 0;
    }
    run_pivots();
    ExactResult res = extract();
    cost = nullptr;
    return res;
  }
};

ExactSolver::ExactSolver(std::vector<double> src_weights, std::vector<double> dst_weights)
    : impl_(std::make_unique<Impl>()) {
  check_weights_arg(src_weights, "source");
  check_weights_arg(dst_weights, "destination");
  const std::size_t n = src_weights.size(), m = dst_weights.size();
  if (n > static_cast<std::size_t>(std::numeric_limits<int32_t>::max()) - 2 ||
      m > static_cast<std::size_t>(std::numeric_limits<int32_t>::max()) - 2 ||
      n * m > (1ull << 40))
    throw CapacityError("solve_exact: instance too large");
  impl_->n = static_cast<int32_t>(n);
  impl_->m = static_cast<int32_t>(m);
  impl_->node_num = impl_->n + impl_->m + 1;
  impl_->arc_num = static_cast<int64_t>(n) * m;
  impl_->supply.resize(impl_->node_num);
  for (std::size_t i = 0; i < n; ++i) impl_->supply[i] = src_weights[i];
  for (std::size_t j = 0; j < m; ++j) impl_->supply[n + j] = -dst_weights[j];
  impl_->supply[impl_->node_num - 1] = 0.0;
  const std::size_t v = impl_->node_num;
  impl_->parent.resize(v);
  impl_->thread.resize(v);
  impl_->rev_thread.resize(v);
  impl_->succ_num.resize(v);
  impl_->last_succ.resize(v);
  impl_->pred.resize(v);
  impl_->forward.resize(v);
  impl_->flow.resize(v);
  impl_->pi.resize(v);
  impl_->art_to_root.resize(v);
}

ExactSolver::~ExactSolver() = default;
ExactSolver::ExactSolver(ExactSolver&&) noexcept = default;
ExactSolver& ExactSolver::operator=(ExactSolver&&) noexcept = default;

ExactResult ExactSolver::solve(const double* cost) { return impl_->solve(cost); }
std::size_t ExactSolver::src_size() const { return impl_->n; }
std::size_t ExactSolver::dst_size() const { return impl_->m; }

ExactResult solve_exact(std::span<const double> src_weights, std::span<const double> dst_weights,
                        const double* cost) {
  ExactSolver solver(std::vector<double>(src_weights.begin(), src_weights.end()),
                     std::vector<double>(dst_weights.begin(), dst_weights.end()));
  return solver.solve(cost);
}

ExactResult solve_exact(const JointDiscreteMeasure& src, const JointDiscreteMeasure& dst,
                        const CostSpec& spec) {
  const std::vector<double> c = cost_matrix(spec, src, dst);
  return solve_exact(src.weights(), dst.weights(), c.data());
}

double transport_cost(const TransportPlan& plan,
                      const std::function<double(uint32_t, uint32_t)>& cost) {
  std::vector<double> terms(plan.entries.size());
  for (std::size_t k = 0; k < plan.entries.size(); ++k)
    terms[k] = plan.entries[k].mass * cost(plan.entries[k].src, plan.entries[k].dst);
  return stable_sum(terms);
}

double transport_cost(const TransportPlan& plan, const CostOracle& cost) {
  std::vector<double> row(cost.cols());
  std::vector<double> terms(plan.entries.size());
  std::size_t loaded_row = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    const PlanEntry& pe = plan.entries[k];
    if (pe.src != loaded_row) {
      cost.fill_row(pe.src, row.data());
      loaded_row = pe.src;
    }
    terms[k] = pe.mass * row[pe.dst];
  }
  return stable_sum(terms);
}

}  // namespace tdep
