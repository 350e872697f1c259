#include "tdep/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "tdep/error.hpp"

namespace tdep {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols,
                   const char* name) {
  if (v.size() != rows * cols) {
    throw UsageError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(rows * cols));
  }
  MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i * cols + j];
  }
  return m;
}

struct Blocks {
  MatrixXd s11, s12, s22;
  VectorXd mean;
};

// Assembles the full covariance and checks symmetry and PSD-ness (eigenvalues
// down to -1e-10 pass, covering roundoff in caller-built matrices).
Blocks validate(const GaussianSpec& spec) {
  if (spec.r == 0 || spec.q == 0) throw UsageError("block dimensions must be positive");
  Blocks b;
  b.s11 = to_matrix(spec.sigma11, spec.r, spec.r, "sigma11");
  b.s12 = to_matrix(spec.sigma12, spec.r, spec.q, "sigma12");
  b.s22 = to_matrix(spec.sigma22, spec.q, spec.q, "sigma22");
  const std::size_t n = spec.r + spec.q;
  b.mean = VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (!spec.mean.empty()) {
    if (spec.mean.size() != n) throw UsageError("mean must have r+q entries");
    for (std::size_t i = 0; i < n; ++i) b.mean(static_cast<Eigen::Index>(i)) = spec.mean[i];
  }
  MatrixXd full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  full.topLeftCorner(b.s11.rows(), b.s11.cols()) = b.s11;
  full.topRightCorner(b.s12.rows(), b.s12.cols()) = b.s12;
  full.bottomLeftCorner(b.s12.cols(), b.s12.rows()) = b.s12.transpose();
  full.bottomRightCorner(b.s22.rows(), b.s22.cols()) = b.s22;
  if (!full.allFinite() || !b.mean.allFinite()) {
    throw DataError("Gaussian spec has non-finite entries");
  }
  const double scale = full.cwiseAbs().maxCoeff();
  if ((full - full.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, scale)) {
    throw DataError("covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (full + full.transpose()),
                                             Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-10) {
    throw DataError("covariance is not PSD (smallest eigenvalue " + std::to_string(lmin) + ")");
  }
  return b;
}

// Scaled Denman-Beavers iteration. Returns false when an iterate goes
// singular or non-finite; singular inputs (rho = 1 couplings) land there.
bool denman_beavers(const MatrixXd& m, MatrixXd& out) {
  const Eigen::Index n = m.rows();
  MatrixXd y = m;
  MatrixXd z = MatrixXd::Identity(n, n);
  for (int iter = 0; iter < 80; ++iter) {
    Eigen::PartialPivLU<MatrixXd> lu_y(y);
    Eigen::PartialPivLU<MatrixXd> lu_z(z);
    const double det_y = lu_y.determinant();
    const double det_z = lu_z.determinant();
    const double prod = std::abs(det_y * det_z);
    if (!std::isfinite(prod) || prod == 0.0) return false;
    double mu = std::pow(prod, -0.5 / static_cast<double>(n));
    if (!std::isfinite(mu) || mu <= 0.0) mu = 1.0;
    const MatrixXd y_next = 0.5 * (mu * y + lu_z.inverse() / mu);
    const MatrixXd z_next = 0.5 * (mu * z + lu_y.inverse() / mu);
    const double step = (y_next - y).norm();
    y = y_next;
    z = z_next;
    if (!y.allFinite() || !z.allFinite()) return false;
    if (step <= 1e-14 * std::max(1.0, y.norm())) {
      out = y;
      return true;
    }
  }
  out = y;
  return true;  // the residual check decides whether this is good enough
}

// Square root of a real matrix with no strictly negative real eigenvalues.
// Denman-Beavers first, real-Schur route as fallback, residual-checked.
MatrixXd sqrt_checked(const MatrixXd& m) {
  const double m_norm = m.norm();
  if (m_norm == 0.0) return MatrixXd::Zero(m.rows(), m.cols());
  MatrixXd s;
  if (denman_beavers(m, s) && (s * s - m).norm() <= 1e-9 * m_norm) return s;
  s = m.sqrt();
  if (s.allFinite() && (s * s - m).norm() <= 1e-9 * m_norm) return s;
  throw NumericError("matrix square root did not reach the 1e-9 residual");
}

double tdep_from_blocks(const Blocks& b) {
  const Eigen::Index r = b.s11.rows();
  const Eigen::Index q = b.s22.rows();
  MatrixXd block(r + q, r + q);
  block.topLeftCorner(r, r) = b.s11 * b.s11;
  block.topRightCorner(r, q) = b.s11 * b.s12;
  block.bottomLeftCorner(q, r) = b.s22 * b.s12.transpose();
  block.bottomRightCorner(q, q) = b.s22 * b.s22;
  const MatrixXd s = sqrt_checked(block);
  const double traces = 2.0 * b.s11.trace() + 2.0 * b.s22.trace();
  double v = traces - 2.0 * s.trace();
  if (v < 0.0 && -v <= 1e-9 * (1.0 + traces)) v = 0.0;
  return v;
}

void check_rho(double rho) {
  if (!(std::abs(rho) <= 1.0)) throw UsageError("rho must lie in [-1, 1]");
}

}  // namespace

GaussianSpec GaussianSpec::bivariate(double sigma1, double sigma2, double rho) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw UsageError("sigma1 and sigma2 must be positive");
  check_rho(rho);
  GaussianSpec spec;
  spec.r = 1;
  spec.q = 1;
  spec.sigma11 = {sigma1 * sigma1};
  spec.sigma12 = {rho * sigma1 * sigma2};
  spec.sigma22 = {sigma2 * sigma2};
  return spec;
}

double gauss_tdep(const GaussianSpec& spec) { return tdep_from_blocks(validate(spec)); }

double gauss_tdep_weighted(const GaussianSpec& spec, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be positive and finite");
  GaussianSpec scaled = spec;
  const double root = std::sqrt(alpha);
  for (double& v : scaled.sigma11) v *= alpha;
  for (double& v : scaled.sigma12) v *= root;
  return gauss_tdep(scaled);
}

double gauss_tdep_bivariate(double sigma1, double sigma2, double rho) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw UsageError("sigma1 and sigma2 must be positive");
  check_rho(rho);
  const double s1 = sigma1 * sigma1;
  const double s2 = sigma2 * sigma2;
  const double root = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  return 2.0 * (s1 + s2 - std::sqrt(s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * root));
}

double gauss_marginal_tdep_bivariate(double sigma2, double rho) {
  if (!(sigma2 > 0.0)) throw UsageError("sigma2 must be positive");
  check_rho(rho);
  return 2.0 * sigma2 * sigma2 * (1.0 - std::sqrt(std::max(0.0, 1.0 - rho * rho)));
}

double gauss_mutual_info(double rho) {
  check_rho(rho);
  if (std::abs(rho) == 1.0) throw DataError("mutual information diverges at |rho| = 1");
  return -0.5 * std::log1p(-rho * rho);
}

double gauss_dcov2_bivariate(double sigma, double rho) {
  if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
  check_rho(rho);
  const double v = rho * std::asin(rho) + std::sqrt(std::max(0.0, 1.0 - rho * rho)) -
                   rho * std::asin(0.5 * rho) - std::sqrt(4.0 - rho * rho) + 1.0;
  return 4.0 * sigma * sigma / M_PI * std::max(0.0, v);
}

JointDiscreteMeasure gauss_sample(const GaussianSpec& spec, std::size_t n, Rng& rng) {
  const Blocks b = validate(spec);
  const Eigen::Index dim = b.mean.size();
  MatrixXd full(dim, dim);
  full.topLeftCorner(b.s11.rows(), b.s11.cols()) = b.s11;
  full.topRightCorner(b.s12.rows(), b.s12.cols()) = b.s12;
  full.bottomLeftCorner(b.s12.cols(), b.s12.rows()) = b.s12.transpose();
  full.bottomRightCorner(b.s22.rows(), b.s22.cols()) = b.s22;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (full + full.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  // Eigen-based transform instead of Cholesky so singular covariances work.
  const VectorXd scales = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatrixXd t = es.eigenvectors() * scales.asDiagonal();
  std::vector<double> xs(n * spec.r), ys(n * spec.q);
  VectorXd z(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) z(d) = rng.normal();
    const VectorXd p = b.mean + t * z;
    for (std::size_t d = 0; d < spec.r; ++d) xs[i * spec.r + d] = p(static_cast<Eigen::Index>(d));
    for (std::size_t d = 0; d < spec.q; ++d) {
      ys[i * spec.q + d] = p(static_cast<Eigen::Index>(spec.r + d));
    }
  }
  return from_samples(std::move(xs), std::move(ys), spec.r, spec.q);
}

}  // namespace tdep
