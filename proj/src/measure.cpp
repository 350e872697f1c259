#include "tdep/measure.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>

#include "tdep/error.hpp"

namespace tdep {

namespace {

constexpr double kWeightSumTol = 1e-9;

void check_coords(const std::vector<double>& pts, const char* what) {
  for (double v : pts) {
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite coordinate");
  }
}

// Validates and renormalizes in place. Returns the (compensated) weight sum
// before renormalization.
void check_weights(std::vector<double>& w) {
  for (double v : w) {
    if (!(v >= 0.0)) throw DataError("measure: negative or NaN weight");
    if (!std::isfinite(v)) throw DataError("measure: non-finite weight");
  }
  if (w.empty()) throw DataError("measure: no atoms");
  const double s = stable_sum(w);
  if (std::abs(s - 1.0) > kWeightSumTol)
    throw DataError("measure: weights sum to " + std::to_string(s) + ", expected 1");
  if (s != 1.0) {
    for (double& v : w) v /= s;
  }
}

// Canonical 64-bit key of a coordinate: collapses -0.0 and +0.0.
uint64_t coord_key(double v) {
  if (v == 0.0) v = 0.0;
  uint64_t k;
  std::memcpy(&k, &v, sizeof k);
  return k;
}

uint64_t grid_key(double v, double tol) { return coord_key(std::floor(v / tol + 0.5)); }

struct KeyHash {
  std::size_t operator()(const std::vector<uint64_t>& key) const {
    // FNV-1a over the raw words; deterministic across runs.
    uint64_t h = 1469598103934665603ull;
    for (uint64_t w : key) {
      for (int b = 0; b < 8; ++b) {
        h ^= (w >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

double stable_sum(std::span<const double> xs) {
  double s = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x))
      comp += (s - t) + x;
    else
      comp += (x - t) + s;
    s = t;
  }
  return s + comp;
}

DiscreteMeasure::DiscreteMeasure(std::vector<double> points, std::vector<double> weights,
                                 std::size_t dim)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
  if (dim_ == 0) throw DataError("measure: dimension must be positive");
  if (points_.size() != weights_.size() * dim_)
    throw DataError("measure: point/weight size mismatch");
  check_coords(points_, "measure");
  check_weights(weights_);
}

DiscreteMeasure DiscreteMeasure::point_mass(std::vector<double> point) {
  const std::size_t d = point.size();
  return DiscreteMeasure(std::move(point), {1.0}, d);
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<double> points, std::size_t dim) {
  if (dim == 0 || points.size() % dim != 0) throw DataError("measure: bad uniform atom data");
  const std::size_t n = points.size() / dim;
  return DiscreteMeasure(std::move(points), std::vector<double>(n, 1.0 / double(n)), dim);
}

JointDiscreteMeasure::JointDiscreteMeasure(std::vector<double> x_points,
                                           std::vector<double> y_points,
                                           std::vector<double> weights, std::size_t x_dim,
                                           std::size_t y_dim)
    : x_dim_(x_dim), y_dim_(y_dim), xs_(std::move(x_points)), ys_(std::move(y_points)),
      weights_(std::move(weights)) {
  if (x_dim_ == 0 || y_dim_ == 0) throw DataError("joint measure: dimensions must be positive");
  if (xs_.size() != weights_.size() * x_dim_ || ys_.size() != weights_.size() * y_dim_)
    throw DataError("joint measure: point/weight size mismatch");
  check_coords(xs_, "joint measure");
  check_coords(ys_, "joint measure");
  check_weights(weights_);
}

JointDiscreteMeasure from_samples(std::vector<double> xs, std::vector<double> ys,
                                  std::size_t x_dim, std::size_t y_dim) {
  if (x_dim == 0 || y_dim == 0) throw DataError("from_samples: dimensions must be positive");
  if (xs.size() % x_dim != 0 || ys.size() % y_dim != 0)
    throw DataError("from_samples: ragged sample data");
  const std::size_t n = xs.size() / x_dim;
  if (n == 0 || ys.size() / y_dim != n) throw DataError("from_samples: x/y sample count mismatch");
  return JointDiscreteMeasure(std::move(xs), std::move(ys),
                              std::vector<double>(n, 1.0 / double(n)), x_dim, y_dim);
}

std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const JointDiscreteMeasure& gamma) {
  return {DiscreteMeasure(gamma.x_points(), gamma.weights(), gamma.x_dim()),
          DiscreteMeasure(gamma.y_points(), gamma.weights(), gamma.y_dim())};
}

JointDiscreteMeasure product(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             std::size_t atom_budget) {
  const std::size_t n = mu.size(), m = nu.size();
  if (m != 0 && n > atom_budget / m)
    throw CapacityError("product: " + std::to_string(n) + "x" + std::to_string(m) +
                        " atoms exceed budget of " + std::to_string(atom_budget));
  std::vector<double> xs(n * m * mu.dim()), ys(n * m * nu.dim()), w(n * m);
  std::size_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j, ++at) {
      std::memcpy(xs.data() + at * mu.dim(), mu.point(i), mu.dim() * sizeof(double));
      std::memcpy(ys.data() + at * nu.dim(), nu.point(j), nu.dim() * sizeof(double));
      w[at] = mu.weight(i) * nu.weight(j);
    }
  }
  return JointDiscreteMeasure(std::move(xs), std::move(ys), std::move(w), mu.dim(), nu.dim());
}

JointDiscreteMeasure mixture(const JointDiscreteMeasure& gamma0, const JointDiscreteMeasure& gamma1,
                             double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DataError("mixture: t must lie in [0, 1]");
  if (gamma0.x_dim() != gamma1.x_dim() || gamma0.y_dim() != gamma1.y_dim())
    throw DataError("mixture: dimension mismatch");
  if (t == 0.0) return gamma0;
  if (t == 1.0) return gamma1;
  std::vector<double> xs(gamma0.x_points());
  std::vector<double> ys(gamma0.y_points());
  std::vector<double> w(gamma0.weights());
  for (double& v : w) v *= 1.0 - t;
  xs.insert(xs.end(), gamma1.x_points().begin(), gamma1.x_points().end());
  ys.insert(ys.end(), gamma1.y_points().begin(), gamma1.y_points().end());
  for (double v : gamma1.weights()) w.push_back(t * v);
  return JointDiscreteMeasure(std::move(xs), std::move(ys), std::move(w), gamma0.x_dim(),
                              gamma0.y_dim());
}

JointDiscreteMeasure convolve(const JointDiscreteMeasure& gamma, const DiscreteMeasure& kappa_x,
                              const DiscreteMeasure& kappa_y, std::size_t atom_budget) {
  if (kappa_x.dim() != gamma.x_dim() || kappa_y.dim() != gamma.y_dim())
    throw DataError("convolve: kernel dimension mismatch");
  const std::size_t n = gamma.size(), nj = kappa_x.size(), nk = kappa_y.size();
  if (nj != 0 && nk != 0 && (n > atom_budget / nj || n * nj > atom_budget / nk))
    throw CapacityError("convolve: output atom count exceeds budget of " +
                        std::to_string(atom_budget));
  const std::size_t r = gamma.x_dim(), q = gamma.y_dim(), total = n * nj * nk;
  std::vector<double> xs(total * r), ys(total * q), w(total);
  std::size_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = gamma.x_point(i);
    const double* yi = gamma.y_point(i);
    for (std::size_t j = 0; j < nj; ++j) {
      const double* aj = kappa_x.point(j);
      const double wij = gamma.weight(i) * kappa_x.weight(j);
      for (std::size_t k = 0; k < nk; ++k, ++at) {
        const double* bk = kappa_y.point(k);
        double* xo = xs.data() + at * r;
        double* yo = ys.data() + at * q;
        for (std::size_t d = 0; d < r; ++d) xo[d] = xi[d] + aj[d];
        for (std::size_t d = 0; d < q; ++d) yo[d] = yi[d] + bk[d];
        w[at] = wij * kappa_y.weight(k);
      }
    }
  }
  return JointDiscreteMeasure(std::move(xs), std::move(ys), std::move(w), r, q);
}

AffineMap AffineMap::identity(std::size_t dim) {
  AffineMap m;
  m.rows = m.cols = dim;
  m.a.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) m.a[i * dim + i] = 1.0;
  m.b.assign(dim, 0.0);
  return m;
}

AffineMap AffineMap::translation(std::vector<double> shift) {
  AffineMap m = identity(shift.size());
  m.b = std::move(shift);
  return m;
}

AffineMap AffineMap::linear(std::vector<double> a, std::size_t rows, std::size_t cols) {
  if (a.size() != rows * cols) throw DataError("affine map: matrix size mismatch");
  AffineMap m;
  m.rows = rows;
  m.cols = cols;
  m.a = std::move(a);
  m.b.assign(rows, 0.0);
  return m;
}

void AffineMap::apply(const double* in, double* out) const {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = b[i];
    const double* row = a.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * in[j];
    out[i] = acc;
  }
}

JointDiscreteMeasure push_forward(const JointDiscreteMeasure& gamma, const AffineMap& fx,
                                  const AffineMap& fy) {
  if (fx.cols != gamma.x_dim() || fy.cols != gamma.y_dim())
    throw DataError("push_forward: map domain dimension mismatch");
  const std::size_t n = gamma.size();
  std::vector<double> xs(n * fx.rows), ys(n * fy.rows);
  for (std::size_t i = 0; i < n; ++i) {
    fx.apply(gamma.x_point(i), xs.data() + i * fx.rows);
    fy.apply(gamma.y_point(i), ys.data() + i * fy.rows);
  }
  return JointDiscreteMeasure(std::move(xs), std::move(ys), gamma.weights(), fx.rows, fy.rows);
}

namespace {

// Shared coalescing core: rows of `coords` (dim doubles each) are keyed either
// bitwise or on a tol-grid; returns, in first-occurrence order, the surviving
// row indices and for every input row the surviving row it merged into.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> merge_rows(
    const std::vector<double>& coords, std::size_t dim, std::size_t n, double tol) {
  std::unordered_map<std::vector<uint64_t>, std::size_t, KeyHash> seen;
  seen.reserve(n);
  std::vector<std::size_t> keep, target(n);
  std::vector<uint64_t> key(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = coords.data() + i * dim;
    for (std::size_t d = 0; d < dim; ++d)
      key[d] = tol > 0.0 ? grid_key(row[d], tol) : coord_key(row[d]);
    auto [it, fresh] = seen.try_emplace(key, keep.size());
    if (fresh) keep.push_back(i);
    target[i] = it->second;
  }
  return {std::move(keep), std::move(target)};
}

}  // namespace

DiscreteMeasure coalesce(const DiscreteMeasure& mu, double tol) {
  if (tol < 0.0) throw DataError("coalesce: negative tolerance");
  auto [keep, target] = merge_rows(mu.points(), mu.dim(), mu.size(), tol);
  if (keep.size() == mu.size()) return mu;
  std::vector<double> pts(keep.size() * mu.dim()), w(keep.size(), 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k)
    std::memcpy(pts.data() + k * mu.dim(), mu.point(keep[k]), mu.dim() * sizeof(double));
  for (std::size_t i = 0; i < mu.size(); ++i) w[target[i]] += mu.weight(i);
  return DiscreteMeasure(std::move(pts), std::move(w), mu.dim());
}

JointDiscreteMeasure coalesce(const JointDiscreteMeasure& gamma, double tol) {
  if (tol < 0.0) throw DataError("coalesce: negative tolerance");
  const std::size_t n = gamma.size(), r = gamma.x_dim(), q = gamma.y_dim();
  // Key on the concatenated (x, y) row.
  std::vector<double> cat(n * (r + q));
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(cat.data() + i * (r + q), gamma.x_point(i), r * sizeof(double));
    std::memcpy(cat.data() + i * (r + q) + r, gamma.y_point(i), q * sizeof(double));
  }
  auto [keep, target] = merge_rows(cat, r + q, n, tol);
  if (keep.size() == n) return gamma;
  std::vector<double> xs(keep.size() * r), ys(keep.size() * q), w(keep.size(), 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    std::memcpy(xs.data() + k * r, gamma.x_point(keep[k]), r * sizeof(double));
    std::memcpy(ys.data() + k * q, gamma.y_point(keep[k]), q * sizeof(double));
  }
  for (std::size_t i = 0; i < n; ++i) w[target[i]] += gamma.weight(i);
  return JointDiscreteMeasure(std::move(xs), std::move(ys), std::move(w), r, q);
}

JointDiscreteMeasure swap_xy(const JointDiscreteMeasure& gamma) {
  return JointDiscreteMeasure(gamma.y_points(), gamma.x_points(), gamma.weights(), gamma.y_dim(),
                              gamma.x_dim());
}

}  // namespace tdep
