#include "tdep/kernels.hpp"

#include <omp.h>

#include <cstdlib>

namespace tdep::kernels {

int thread_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("TDEP_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    return omp_get_max_threads();
  }();
  return cached;
}

void factor_matrix_serial(const FactorSpec& f, const double* a, std::size_t n, const double* b,
                          std::size_t m, std::size_t dim, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * dim;
    double* row = out + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = factor_value(f, ai, b + j * dim, dim);
  }
}

void factor_matrix(const FactorSpec& f, const double* a, std::size_t n, const double* b,
                   std::size_t m, std::size_t dim, double* out) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * dim;
    double* row = out + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = factor_value(f, ai, b + j * dim, dim);
  }
}

namespace {

template <bool Parallel>
std::vector<double> joint_cost_matrix_impl(const FactorizedCost& fc,
                                           const JointDiscreteMeasure& src,
                                           const JointDiscreteMeasure& dst) {
  const std::size_t n = src.size(), m = dst.size(), r = src.x_dim(), q = src.y_dim();
  std::vector<double> out(n * m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (Parallel)
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = src.x_point(i);
    const double* yi = src.y_point(i);
    double* row = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j)
      row[j] = fc.combine(factor_value(fc.x_factor, xi, dst.x_point(j), r),
                          factor_value(fc.y_factor, yi, dst.y_point(j), q));
  }
  return out;
}

template <bool Parallel>
std::vector<double> product_cost_matrix_impl(const FactorizedCost& fc,
                                             const JointDiscreteMeasure& src,
                                             const DiscreteMeasure& mu,
                                             const DiscreteMeasure& nu) {
  const std::size_t n = src.size(), nx = mu.size(), ny = nu.size();
  std::vector<double> a(n * nx), b(n * ny);
  if constexpr (Parallel) {
    factor_matrix(fc.x_factor, src.x_points().data(), n, mu.points().data(), nx, src.x_dim(),
                  a.data());
    factor_matrix(fc.y_factor, src.y_points().data(), n, nu.points().data(), ny, src.y_dim(),
                  b.data());
  } else {
    factor_matrix_serial(fc.x_factor, src.x_points().data(), n, mu.points().data(), nx,
                         src.x_dim(), a.data());
    factor_matrix_serial(fc.y_factor, src.y_points().data(), n, nu.points().data(), ny,
                         src.y_dim(), b.data());
  }
  std::vector<double> out(n * nx * ny);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (Parallel)
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * nx;
    const double* bi = b.data() + i * ny;
    double* row = out.data() + i * nx * ny;
    for (std::size_t j = 0; j < nx; ++j) {
      const double aij = ai[j];
      double* cell = row + j * ny;
      for (std::size_t k = 0; k < ny; ++k) cell[k] = fc.combine(aij, bi[k]);
    }
  }
  return out;
}

}  // namespace

std::vector<double> joint_cost_matrix_serial(const FactorizedCost& fc,
                                             const JointDiscreteMeasure& src,
                                             const JointDiscreteMeasure& dst) {
  return joint_cost_matrix_impl<false>(fc, src, dst);
}

std::vector<double> joint_cost_matrix(const FactorizedCost& fc, const JointDiscreteMeasure& src,
                                      const JointDiscreteMeasure& dst) {
  return joint_cost_matrix_impl<true>(fc, src, dst);
}

std::vector<double> product_cost_matrix_serial(const FactorizedCost& fc,
                                               const JointDiscreteMeasure& src,
                                               const DiscreteMeasure& mu,
                                               const DiscreteMeasure& nu) {
  return product_cost_matrix_impl<false>(fc, src, mu, nu);
}

std::vector<double> product_cost_matrix(const FactorizedCost& fc, const JointDiscreteMeasure& src,
                                        const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return product_cost_matrix_impl<true>(fc, src, mu, nu);
}

namespace {

// Row partials are computed serially within each row and combined in index
// order afterwards, so thread count never changes the result.
template <bool Parallel, class RowFn>
double row_reduce(std::size_t n, RowFn&& fn) {
  std::vector<double> partial(n);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (Parallel)
  for (std::size_t i = 0; i < n; ++i) partial[i] = fn(i);
  return stable_sum(partial);
}

}  // namespace

double expectation_matrix_serial(const double* m_vals, const double* wa, std::size_t n,
                                 const double* wb, std::size_t m) {
  return row_reduce<false>(n, [&](std::size_t i) {
    const double* row = m_vals + i * m;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += wb[j] * row[j];
    return wa[i] * s;
  });
}

double expectation_matrix(const double* m_vals, const double* wa, std::size_t n, const double* wb,
                          std::size_t m) {
  return row_reduce<true>(n, [&](std::size_t i) {
    const double* row = m_vals + i * m;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += wb[j] * row[j];
    return wa[i] * s;
  });
}

namespace {

template <bool Parallel>
double expectation_min_impl(const double* mx, const double* my, const double* w, std::size_t n) {
  return row_reduce<Parallel>(n, [&](std::size_t i) {
    const double* rx = mx + i * n;
    const double* ry = my + i * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[j] * std::min(rx[j], ry[j]);
    return w[i] * s;
  });
}

template <bool Parallel>
DcovSums dcov_sums_impl(const double* dx, const double* dy, const double* w, std::size_t n) {
  struct Row {
    double joint, mx, my;
  };
  std::vector<Row> rows(n);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (Parallel)
  for (std::size_t i = 0; i < n; ++i) {
    const double* rx = dx + i * n;
    const double* ry = dy + i * n;
    double j_acc = 0.0, x_acc = 0.0, y_acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      j_acc += w[j] * rx[j] * ry[j];
      x_acc += w[j] * rx[j];
      y_acc += w[j] * ry[j];
    }
    rows[i] = {j_acc, x_acc, y_acc};
  }
  std::vector<double> a(n), b(n), c(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = w[i] * rows[i].joint;
    b[i] = w[i] * rows[i].mx;
    c[i] = w[i] * rows[i].my;
    d[i] = w[i] * rows[i].mx * rows[i].my;
  }
  DcovSums s;
  s.joint = stable_sum(a);
  s.mean_x = stable_sum(b);
  s.mean_y = stable_sum(c);
  s.cross = stable_sum(d);
  return s;
}

}  // namespace

double expectation_min_serial(const double* mx, const double* my, const double* w, std::size_t n) {
  return expectation_min_impl<false>(mx, my, w, n);
}

double expectation_min(const double* mx, const double* my, const double* w, std::size_t n) {
  return expectation_min_impl<true>(mx, my, w, n);
}

DcovSums dcov_sums_serial(const double* dx, const double* dy, const double* w, std::size_t n) {
  return dcov_sums_impl<false>(dx, dy, w, n);
}

DcovSums dcov_sums(const double* dx, const double* dy, const double* w, std::size_t n) {
  return dcov_sums_impl<true>(dx, dy, w, n);
}

}  // namespace tdep::kernels
