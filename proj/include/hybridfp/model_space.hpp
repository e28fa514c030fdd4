#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "hybridfp/errors.hpp"
#include "hybridfp/rng.hpp"

namespace hybridfp {

/// A point of a model space in its ambient embedding.
///
/// Euclidean points live in R^n. Sphere points are unit vectors of R^(n+1).
/// Hyperboloid points satisfy <x,x>_M = -1 with x(0) > 0, where
/// <x,y>_M = -x(0)y(0) + x(1)y(1) + ... is the Minkowski form.
using Point = Eigen::VectorXd;

enum class Model { euclidean, sphere, hyperboloid };

inline const char* to_string(Model m) {
  switch (m) {
    case Model::euclidean: return "euclidean";
    case Model::sphere: return "sphere";
    case Model::hyperboloid: return "hyperboloid";
  }
  return "?";
}

inline constexpr double kEmbeddingTol = 1e-12;

/// The model space M_kappa^n: E^n, the scaled sphere, or the scaled
/// hyperbolic space, chosen by the sign of kappa.
class ModelSpace {
 public:
  ModelSpace(double kappa, int dim) : kappa_(kappa), dim_(dim) {
    if (dim < 1) throw GeometryError("model space dimension must be >= 1");
    if (!std::isfinite(kappa)) throw GeometryError("curvature must be finite");
    if (kappa > 0.0) {
      model_ = Model::sphere;
    } else if (kappa < 0.0) {
      model_ = Model::hyperboloid;
    } else {
      model_ = Model::euclidean;
    }
  }

  double kappa() const { return kappa_; }
  int dim() const { return dim_; }
  Model model() const { return model_; }
  int ambient_dim() const { return model_ == Model::euclidean ? dim_ : dim_ + 1; }

  /// Distance units per unit of model angle: 1/sqrt(|kappa|), or 1 when flat.
  double scale() const { return model_ == Model::euclidean ? 1.0 : 1.0 / std::sqrt(std::abs(kappa_)); }

  /// D_kappa = pi/sqrt(kappa) for kappa > 0, +inf otherwise.
  double diameter_bound() const {
    return model_ == Model::sphere ? std::numbers::pi / std::sqrt(kappa_)
                                   : std::numeric_limits<double>::infinity();
  }

  /// pi/(2 sqrt(kappa)): balls below this radius are convex.
  double convexity_radius() const { return 0.5 * diameter_bound(); }

  /// Bilinear form of the embedding (dot product, or Minkowski for kappa < 0).
  double inner(const Point& x, const Point& y) const {
    if (model_ == Model::hyperboloid) return x.dot(y) - 2.0 * x(0) * y(0);
    return x.dot(y);
  }

  /// Size of the embedding defect |<x,x> - target|, relative where needed.
  double embedding_defect(const Point& x) const {
    if (x.size() != ambient_dim()) return std::numeric_limits<double>::infinity();
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    switch (model_) {
      case Model::euclidean: return 0.0;
      case Model::sphere: return std::abs(x.norm() - 1.0);
      case Model::hyperboloid: {
        if (x(0) <= 0.0) return std::numeric_limits<double>::infinity();
        return std::abs(inner(x, x) + 1.0) / std::max(1.0, x(0) * x(0));
      }
    }
    return 0.0;
  }

  bool contains(const Point& x, double tol = kEmbeddingTol) const { return embedding_defect(x) <= tol; }

  void require(const Point& x) const {
    if (x.size() != ambient_dim()) {
      throw EmbeddingViolation("point has " + std::to_string(x.size()) + " coordinates, expected " +
                               std::to_string(ambient_dim()));
    }
    const double defect = embedding_defect(x);
    if (!(defect <= kEmbeddingTol)) {
      throw EmbeddingViolation(std::string("point violates the ") + to_string(model_) +
                               " embedding (defect " + std::to_string(defect) + ")");
    }
  }

  /// Nearest point of the embedding (radial rescale).
  Point normalize(const Point& x) const {
    switch (model_) {
      case Model::euclidean: return x;
      case Model::sphere: return x / x.norm();
      case Model::hyperboloid: {
        const double q = -inner(x, x);
        if (!(q > 0.0) || x(0) <= 0.0) throw EmbeddingViolation("cannot renormalize a non-timelike vector");
        return x / std::sqrt(q);
      }
    }
    return x;
  }

  /// Base point: 0 in E^n, e_0 on the sphere and the hyperboloid.
  Point origin() const {
    Point o = Point::Zero(ambient_dim());
    if (model_ != Model::euclidean) o(0) = 1.0;
    return o;
  }

  /// Build a point from intrinsic coordinates: the point reached from
  /// origin() along the tangent vector v (v in R^n, |v| = distance).
  Point from_tangent_coords(const Point& v) const {
    if (v.size() != dim_) throw GeometryError("tangent coordinates have the wrong length");
    if (model_ == Model::euclidean) return v;
    const double len = v.norm();
    Point out = origin();
    if (len == 0.0) return out;
    const double theta = len / scale();
    Point dir = Point::Zero(ambient_dim());
    dir.tail(dim_) = v / len;
    if (model_ == Model::sphere) return normalize(std::cos(theta) * out + std::sin(theta) * dir);
    return normalize(std::cosh(theta) * out + std::sinh(theta) * dir);
  }

  bool operator==(const ModelSpace& other) const { return kappa_ == other.kappa_ && dim_ == other.dim_; }

 private:
  double kappa_;
  int dim_;
  Model model_;
};

namespace detail {

/// Model angle between x and y (distance before the 1/sqrt|kappa| scaling).
inline double model_angle(const ModelSpace& space, const Point& x, const Point& y) {
  switch (space.model()) {
    case Model::euclidean: return (x - y).norm();
    case Model::sphere: {
      if (x.dot(y) <= -1.0 + 1e-12) throw AntipodalPoints("antipodal points have no unique geodesic");
      // 2 atan2(|x-y|, |x+y|) equals arccos(<x,y>) without the loss of
      // precision arccos suffers near 0 and pi.
      return 2.0 * std::atan2((x - y).norm(), (x + y).norm());
    }
    case Model::hyperboloid: {
      const double c = -space.inner(x, y);
      if (c > 1.5) return std::acosh(c);
      // Near the diagonal arccosh(c) is ill-conditioned; use the spacelike
      // length s of x - y instead: c = 1 + s^2/2, arccosh(c) = 2 asinh(s/2).
      const Point diff = x - y;
      double s2 = space.inner(diff, diff);
      if (s2 < 0.0) {
        if (s2 < -1e-9 * std::max(1.0, x(0) * x(0))) throw EmbeddingViolation("Minkowski difference is timelike");
        s2 = 0.0;
      }
      return 2.0 * std::asinh(0.5 * std::sqrt(s2));
    }
  }
  return 0.0;
}

}  // namespace detail

/// Geodesic distance in the model space.
inline double distance(const ModelSpace& space, const Point& x, const Point& y) {
  space.require(x);
  space.require(y);
  return space.scale() * detail::model_angle(space, x, y);
}

/// The point (1-t)x (+) ty on the geodesic from x to y, with
/// d(x, z) = t d(x, y) and d(z, y) = (1 - t) d(x, y).
inline Point geodesic_point(const ModelSpace& space, const Point& x, const Point& y, double t) {
  space.require(x);
  space.require(y);
  if (!(t >= 0.0 && t <= 1.0)) throw GeometryError("geodesic parameter must lie in [0, 1]");
  const double theta = detail::model_angle(space, x, y);
  if (t == 0.0) return x;
  if (t == 1.0) return y;
  switch (space.model()) {
    case Model::euclidean: return (1.0 - t) * x + t * y;
    case Model::sphere: {
      if (theta < 1e-8) return space.normalize((1.0 - t) * x + t * y);
      const double s = std::sin(theta);
      return space.normalize((std::sin((1.0 - t) * theta) / s) * x + (std::sin(t * theta) / s) * y);
    }
    case Model::hyperboloid: {
      if (theta < 1e-8) return space.normalize((1.0 - t) * x + t * y);
      const double s = std::sinh(theta);
      return space.normalize((std::sinh((1.0 - t) * theta) / s) * x + (std::sinh(t * theta) / s) * y);
    }
  }
  return x;
}

/// Projects an ambient vector onto the tangent space at base and normalizes
/// it. Returns a zero vector when the projection vanishes.
inline Point unit_tangent(const ModelSpace& space, const Point& base, const Point& raw) {
  Point v = raw;
  if (space.model() == Model::sphere) v -= base.dot(raw) * base;
  if (space.model() == Model::hyperboloid) v += space.inner(raw, base) * base;
  const double n2 = space.inner(v, v);
  if (!(n2 > 1e-300)) return Point::Zero(raw.size());
  return v / std::sqrt(n2);
}

/// The point at the given distance from base along the unit tangent u.
inline Point exp_point(const ModelSpace& space, const Point& base, const Point& u, double dist) {
  if (dist == 0.0) return base;
  const double theta = dist / space.scale();
  switch (space.model()) {
    case Model::euclidean: return base + dist * u;
    case Model::sphere: return space.normalize(std::cos(theta) * base + std::sin(theta) * u);
    case Model::hyperboloid: return space.normalize(std::cosh(theta) * base + std::sinh(theta) * u);
  }
  return base;
}

inline Point random_unit_tangent(const ModelSpace& space, const Point& base, Rng& rng) {
  for (;;) {
    Point raw(space.ambient_dim());
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = rng.normal();
    Point u = unit_tangent(space, base, raw);
    if (space.inner(u, u) > 0.5) return u;
  }
}

/// Random point of the closed ball B(center, radius); the radial law
/// r * U^(1/n) is uniform in flat space and close to it in small curved balls.
inline Point random_point_in_ball(const ModelSpace& space, const Point& center, double radius, Rng& rng) {
  const Point u = random_unit_tangent(space, center, rng);
  const double r = radius * std::pow(rng.uniform(), 1.0 / space.dim());
  return exp_point(space, center, u, r);
}

/// Slack RHS - LHS of the R-convexity inequality
///   d^2(x, (1-t)y (+) tz) <= (1-t) d^2(x,y) + t d^2(x,z) - (R/2) t(1-t) d^2(y,z).
/// R = 2 is the CN* inequality; nonnegative slack means the inequality holds.
inline double check_convexity_inequality(const ModelSpace& space, const Point& x, const Point& y, const Point& z,
                                         double t, double R) {
  if (!(R > 0.0 && R <= 2.0)) throw GeometryError("convexity constant R must lie in (0, 2]");
  const Point m = geodesic_point(space, y, z, t);
  const double dxy = distance(space, x, y);
  const double dxz = distance(space, x, z);
  const double dyz = distance(space, y, z);
  const double dxm = distance(space, x, m);
  const double rhs = (1.0 - t) * dxy * dxy + t * dxz * dxz - 0.5 * R * t * (1.0 - t) * dyz * dyz;
  return rhs - dxm * dxm;
}

/// Constants tied to an angle epsilon in (0, pi/2).
struct ConvexityConstants {
  double epsilon;
  double R;  ///< (pi - 2 epsilon) tan(epsilon)

  /// (pi - epsilon) / (2 sqrt(kappa)) for kappa > 0; unbounded otherwise.
  double diam_bound(double kappa) const {
    if (kappa <= 0.0) return std::numeric_limits<double>::infinity();
    return (std::numbers::pi - epsilon) / (2.0 * std::sqrt(kappa));
  }
};

inline ConvexityConstants r_constant(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5 * std::numbers::pi)) {
    throw EpsilonOutOfRange("epsilon must lie strictly inside (0, pi/2)");
  }
  return {epsilon, (std::numbers::pi - 2.0 * epsilon) * std::tan(epsilon)};
}

/// Sampling estimate (an upper bound) of the modulus of convexity
///   delta(r, eps) = inf { 1 - d(a, m)/r : d(a,x) <= r, d(a,y) <= r, d(x,y) >= eps },
/// m the midpoint of [x, y]. For kappa > 0 chords are also kept below
/// pi/(2 sqrt(kappa)). The model spaces are homogeneous, so a is fixed at
/// the origin. Sample 0 is the extremal chord (both ends on the sphere of
/// radius r, length exactly eps); later samples extend a fixed sequence, so
/// the estimate is nonincreasing in the sample count.
inline double estimate_modulus(const ModelSpace& space, double r, double eps, std::size_t samples,
                               std::uint64_t seed) {
  if (space.dim() < 2) throw InfeasibleConstraints("modulus of convexity needs dimension >= 2");
  if (!(r > 0.0)) throw InfeasibleConstraints("radius must be positive");
  if (space.model() == Model::sphere && !(r < space.convexity_radius())) {
    throw InfeasibleConstraints("radius must stay below pi/(2 sqrt(kappa))");
  }
  if (!(eps >= 0.0)) throw InfeasibleConstraints("separation must be nonnegative");
  if (samples == 0) throw InfeasibleConstraints("sample budget is zero");
  const double chord_cap = space.model() == Model::sphere ? space.convexity_radius()
                                                          : std::numeric_limits<double>::infinity();
  if (eps >= chord_cap) throw InfeasibleConstraints("separation exceeds the admissible chord length");

  Rng rng(seed);
  const Point a = space.origin();
  auto midpoint_value = [&](const Point& x, const Point& y) {
    return 1.0 - distance(space, a, geodesic_point(space, x, y, 0.5)) / r;
  };
  // Symmetric chord on the sphere S(a, r) in the plane of (e1, e2) with
  // opening angle phi at a.
  auto chord = [&](const Point& u1, const Point& u2, double phi) {
    const Point dx = std::cos(0.5 * phi) * u1 + std::sin(0.5 * phi) * u2;
    const Point dy = std::cos(0.5 * phi) * u1 - std::sin(0.5 * phi) * u2;
    return std::pair{exp_point(space, a, dx, r), exp_point(space, a, dy, r)};
  };
  Point e1 = Point::Zero(space.ambient_dim());
  Point e2 = Point::Zero(space.ambient_dim());
  e1(space.ambient_dim() - space.dim()) = 1.0;
  e2(space.ambient_dim() - space.dim() + 1) = 1.0;
  auto chord_length = [&](double phi) {
    auto [x, y] = chord(e1, e2, phi);
    return distance(space, x, y);
  };
  // chord_length is increasing in phi on [0, pi]; invert by bisection.
  auto solve_phi = [&](double target) {
    double lo = 0.0, hi = std::numbers::pi;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (chord_length(mid) < target ? lo : hi) = mid;
    }
    return hi;
  };
  if (chord_length(std::numbers::pi) < eps * (1.0 - 1e-12)) {
    throw InfeasibleConstraints("no chord of length eps fits in a ball of radius r");
  }
  const double phi_min = eps == 0.0 ? 0.0 : std::min(solve_phi(eps), std::numbers::pi);
  double phi_max = std::numbers::pi;
  if (std::isfinite(chord_cap) && chord_length(std::numbers::pi) >= chord_cap) {
    phi_max = solve_phi(chord_cap) * (1.0 - 1e-12);
  }

  auto [x0, y0] = chord(e1, e2, phi_min);
  double best = midpoint_value(x0, y0);
  std::size_t attempts = 0;
  for (std::size_t i = 1; i < samples && attempts < 50 * samples; ++attempts) {
    const Point u1 = random_unit_tangent(space, a, rng);
    Point u2 = random_unit_tangent(space, a, rng);
    u2 = unit_tangent(space, a, u2 - space.inner(u2, u1) * u1);
    if (space.inner(u2, u2) < 0.5) continue;
    if (attempts % 2 == 0) {
      auto [x, y] = chord(u1, u2, rng.uniform(phi_min, phi_max));
      if (distance(space, x, y) < eps) continue;
      best = std::min(best, midpoint_value(x, y));
    } else {
      const Point x = random_point_in_ball(space, a, r, rng);
      const Point y = random_point_in_ball(space, a, r, rng);
      const double dxy = distance(space, x, y);
      if (dxy < eps || dxy >= chord_cap) continue;
      best = std::min(best, midpoint_value(x, y));
    }
    ++i;
  }
  return std::clamp(best, 0.0, 1.0);
}

}  // namespace hybridfp
