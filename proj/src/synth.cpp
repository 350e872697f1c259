#include "tdep/synth.hpp"

#include <cmath>
#include <utility>

#include "tdep/error.hpp"
#include "tdep/rng.hpp"

namespace tdep {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Spiral parameters: r(t) = a t for t in [0, kSpiralTurns * 2pi], scaled to
// reach radius 0.45 around the center of the unit square.
constexpr double kSpiralTheta = 3.0 * kPi;
constexpr double kRadius = 0.45;

double poly_eval(const std::vector<double>& coeff, double x) {
  double v = 0.0;
  for (std::size_t j = coeff.size(); j-- > 0;) v = v * x + coeff[j];
  return v;
}

// Arc length of r = a t from 0 to t (integral of a sqrt(1 + t^2)).
double spiral_arc(double a, double t) {
  return 0.5 * a * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

struct Sampler {
  const GeometrySpec& spec;
  std::size_t r, q;

  explicit Sampler(const GeometrySpec& s) : spec(s), r(1), q(1) {
    switch (spec.kind) {
      case GeometryKind::zigzag:
        if (spec.segments < 1) throw UsageError("zigzag needs at least one segment");
        break;
      case GeometryKind::polynomial:
        if (spec.coefficients.empty()) throw UsageError("polynomial needs coefficients");
        break;
      case GeometryKind::sine:
        if (!(spec.slope > 0.0)) throw UsageError("sine slope must be positive");
        break;
      case GeometryKind::sphere:
      case GeometryKind::uniform_noise:
        if (spec.r == 0 || spec.q == 0) throw UsageError("dimensions must be positive");
        r = spec.r;
        q = spec.q;
        break;
      case GeometryKind::linear_highdim:
        if (spec.r == 0 || spec.q == 0) throw UsageError("dimensions must be positive");
        if (spec.q > spec.r) throw UsageError("linear_highdim needs q <= r");
        r = spec.r;
        q = spec.q;
        break;
      default:
        break;
    }
  }

  void draw(Rng& rng, std::vector<double>& xs, std::vector<double>& ys) const {
    switch (spec.kind) {
      case GeometryKind::identity: {
        const double x = rng.uniform();
        xs.push_back(x);
        ys.push_back(x);
        return;
      }
      case GeometryKind::zigzag: {
        const double x = rng.uniform();
        xs.push_back(x);
        ys.push_back(zigzag_value(spec.segments, x));
        return;
      }
      case GeometryKind::polynomial: {
        const double x = rng.uniform();
        xs.push_back(x);
        ys.push_back(poly_eval(spec.coefficients, x));
        return;
      }
      case GeometryKind::sine: {
        const double x = rng.uniform();
        xs.push_back(x);
        ys.push_back(0.5 + 0.5 * std::sin(spec.slope * (2.0 * x - 1.0)));
        return;
      }
      case GeometryKind::circle: {
        const double t = 2.0 * kPi * rng.uniform();
        xs.push_back(0.5 + kRadius * std::cos(t));
        ys.push_back(0.5 + kRadius * std::sin(t));
        return;
      }
      case GeometryKind::cross: {
        const double t = rng.uniform();
        const bool main_diag = rng.uniform() < 0.5;
        xs.push_back(t);
        ys.push_back(main_diag ? t : 1.0 - t);
        return;
      }
      case GeometryKind::spiral: {
        // Invert the arc length by bisection for a uniform speed traversal.
        const double a = kRadius / kSpiralTheta;
        const double s = rng.uniform() * spiral_arc(a, kSpiralTheta);
        double lo = 0.0, hi = kSpiralTheta;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (spiral_arc(a, mid) < s ? lo : hi) = mid;
        }
        const double t = 0.5 * (lo + hi);
        xs.push_back(0.5 + a * t * std::cos(t));
        ys.push_back(0.5 + a * t * std::sin(t));
        return;
      }
      case GeometryKind::pretzel: {
        // Figure eight: x = 1/2 + 0.45 cos t, y = 1/2 + 0.45 sin 2t.
        const double t = 2.0 * kPi * rng.uniform();
        xs.push_back(0.5 + kRadius * std::cos(t));
        ys.push_back(0.5 + kRadius * std::sin(2.0 * t));
        return;
      }
      case GeometryKind::sphere: {
        const std::size_t dim = r + q;
        std::vector<double> g(dim);
        double norm2 = 0.0;
        do {
          norm2 = 0.0;
          for (std::size_t d = 0; d < dim; ++d) {
            g[d] = rng.normal();
            norm2 += g[d] * g[d];
          }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t d = 0; d < r; ++d) xs.push_back(g[d] * inv);
        for (std::size_t d = 0; d < q; ++d) ys.push_back(g[r + d] * inv);
        return;
      }
      case GeometryKind::uniform_noise: {
        for (std::size_t d = 0; d < r; ++d) xs.push_back(rng.uniform());
        for (std::size_t d = 0; d < q; ++d) ys.push_back(rng.uniform());
        return;
      }
      case GeometryKind::linear_highdim: {
        std::vector<double> x(r);
        for (std::size_t d = 0; d < r; ++d) x[d] = rng.uniform();
        for (std::size_t d = 0; d < r; ++d) xs.push_back(x[d]);
        for (std::size_t d = 0; d < q; ++d) ys.push_back(x[d]);
        return;
      }
    }
    throw UsageError("unknown geometry kind");
  }
};

JointDiscreteMeasure assemble(const Sampler& s, std::vector<double> xs, std::vector<double> ys) {
  return from_samples(std::move(xs), std::move(ys), s.r, s.q);
}

}  // namespace

double zigzag_value(int segments, double x) {
  if (segments < 1) throw UsageError("zigzag needs at least one segment");
  const double n = static_cast<double>(segments);
  // Segment k covers [k/n, (k+1)/n]; odd segments run downhill.
  int k = static_cast<int>(std::floor(x * n));
  if (k >= segments) k = segments - 1;
  if (k < 0) k = 0;
  const double v = (k % 2 == 0) ? n * x - k : (k + 1) - n * x;
  return std::min(1.0, std::max(0.0, v));
}

JointDiscreteMeasure sample_geometry(const GeometrySpec& spec, std::size_t n, std::uint64_t seed,
                                     std::uint64_t index) {
  if (n == 0) throw UsageError("sample size must be at least 1");
  const Sampler s(spec);
  Rng rng = Rng::substream(seed, rngstream::dataset, index);
  std::vector<double> xs, ys;
  xs.reserve(n * s.r);
  ys.reserve(n * s.q);
  for (std::size_t i = 0; i < n; ++i) s.draw(rng, xs, ys);
  return assemble(s, std::move(xs), std::move(ys));
}

JointDiscreteMeasure convex_contaminate(const GeometrySpec& spec, double epsilon, std::size_t n,
                                        std::uint64_t seed, std::uint64_t index) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  if (epsilon == 0.0) return sample_geometry(spec, n, seed, index);
  if (n == 0) throw UsageError("sample size must be at least 1");
  const Sampler s(spec);
  Rng base = Rng::substream(seed, rngstream::dataset, index);
  Rng noise = Rng::substream(seed, rngstream::contamination, index);
  std::vector<double> xs, ys;
  xs.reserve(n * s.r);
  ys.reserve(n * s.q);
  std::vector<double> tx, ty;
  for (std::size_t i = 0; i < n; ++i) {
    if (noise.uniform() < epsilon) {
      // Independent draws from the two marginals: take x from one fresh
      // geometry draw and y from another.
      tx.clear();
      ty.clear();
      s.draw(noise, tx, ty);
      s.draw(noise, tx, ty);
      xs.insert(xs.end(), tx.begin(), tx.begin() + static_cast<std::ptrdiff_t>(s.r));
      ys.insert(ys.end(), ty.begin() + static_cast<std::ptrdiff_t>(s.q), ty.end());
    } else {
      s.draw(base, xs, ys);
    }
  }
  return assemble(s, std::move(xs), std::move(ys));
}

JointDiscreteMeasure gaussian_noise(const GeometrySpec& spec, double sigma, std::size_t n,
                                    std::uint64_t seed, std::uint64_t index) {
  if (!(sigma >= 0.0)) throw UsageError("sigma must be nonnegative");
  JointDiscreteMeasure base = sample_geometry(spec, n, seed, index);
  if (sigma == 0.0) return base;
  Rng rng = Rng::substream(seed, rngstream::noise, index);
  std::vector<double> xs = base.x_points();
  std::vector<double> ys = base.y_points();
  for (double& v : xs) v += sigma * rng.normal();
  for (double& v : ys) v += sigma * rng.normal();
  return JointDiscreteMeasure(std::move(xs), std::move(ys), base.weights(), base.x_dim(),
                              base.y_dim());
}

GeometryKind geometry_kind_from_string(const std::string& s) {
  if (s == "identity") return GeometryKind::identity;
  if (s == "zigzag") return GeometryKind::zigzag;
  if (s == "polynomial") return GeometryKind::polynomial;
  if (s == "sine") return GeometryKind::sine;
  if (s == "circle") return GeometryKind::circle;
  if (s == "cross") return GeometryKind::cross;
  if (s == "spiral") return GeometryKind::spiral;
  if (s == "pretzel") return GeometryKind::pretzel;
  if (s == "sphere") return GeometryKind::sphere;
  if (s == "uniform_noise") return GeometryKind::uniform_noise;
  if (s == "linear_highdim") return GeometryKind::linear_highdim;
  throw UsageError("unknown geometry: " + s);
}

const char* to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::identity: return "identity";
    case GeometryKind::zigzag: return "zigzag";
    case GeometryKind::polynomial: return "polynomial";
    case GeometryKind::sine: return "sine";
    case GeometryKind::circle: return "circle";
    case GeometryKind::cross: return "cross";
    case GeometryKind::spiral: return "spiral";
    case GeometryKind::pretzel: return "pretzel";
    case GeometryKind::sphere: return "sphere";
    case GeometryKind::uniform_noise: return "uniform_noise";
    case GeometryKind::linear_highdim: return "linear_highdim";
  }
  throw UsageError("unknown geometry kind");
}

}  // namespace tdep
