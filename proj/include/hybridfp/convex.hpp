#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hybridfp/errors.hpp"
#include "hybridfp/model_space.hpp"

namespace hybridfp {

struct Ball {
  Point center;
  double radius;
};

struct WholeSpace {};

/// A geodesically convex subset K of a model space: a closed ball, a
/// nonempty intersection of closed balls, or the whole space.
class ConvexSet {
 public:
  using Shape = std::variant<WholeSpace, Ball, std::vector<Ball>>;

  static ConvexSet whole(const ModelSpace& space) { return ConvexSet(space, WholeSpace{}); }

  static ConvexSet ball(const ModelSpace& space, Point center, double radius) {
    space.require(center);
    check_radius(space, radius);
    return ConvexSet(space, Ball{std::move(center), radius});
  }

  /// The witness must lie in every ball; it certifies nonemptiness.
  static ConvexSet intersection(const ModelSpace& space, std::vector<Ball> balls, const Point& witness) {
    if (balls.empty()) throw GeometryError("intersection needs at least one ball");
    space.require(witness);
    for (const Ball& b : balls) {
      space.require(b.center);
      check_radius(space, b.radius);
      if (distance(space, b.center, witness) > b.radius + 1e-12) {
        throw GeometryError("intersection witness lies outside a ball");
      }
    }
    return ConvexSet(space, std::move(balls));
  }

  const ModelSpace& space() const { return space_; }
  const Shape& shape() const { return shape_; }

  bool is_whole() const { return std::holds_alternative<WholeSpace>(shape_); }

  /// All defining balls (empty for the whole space).
  std::vector<Ball> balls() const {
    if (auto* b = std::get_if<Ball>(&shape_)) return {*b};
    if (auto* bs = std::get_if<std::vector<Ball>>(&shape_)) return *bs;
    return {};
  }

  /// Upper bound on rad(K): the smallest defining radius.
  double radius_bound() const {
    const auto bs = balls();
    if (bs.empty()) {
      return space_.model() == Model::sphere ? space_.diameter_bound()
                                             : std::numeric_limits<double>::infinity();
    }
    double r = std::numeric_limits<double>::infinity();
    for (const Ball& b : bs) r = std::min(r, b.radius);
    return r;
  }

  /// Upper bound on diam(K): twice the smallest radius, capped by D_kappa.
  double diameter_bound() const {
    const auto bs = balls();
    if (bs.empty()) return space_.diameter_bound();
    return std::min(2.0 * radius_bound(), space_.diameter_bound());
  }

 private:
  ConvexSet(const ModelSpace& space, Shape shape) : space_(space), shape_(std::move(shape)) {}

  static void check_radius(const ModelSpace& space, double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw GeometryError("ball radius must be finite and >= 0");
    if (space.model() == Model::sphere && !(radius < space.convexity_radius())) {
      throw GeometryError("ball radius must stay below pi/(2 sqrt(kappa)) to be convex");
    }
  }

  ModelSpace space_;
  Shape shape_;
};

inline bool contains(const ConvexSet& K, const Point& x, double tol) {
  for (const Ball& b : K.balls()) {
    if (distance(K.space(), b.center, x) > b.radius + tol) return false;
  }
  K.space().require(x);
  return true;
}

namespace detail {

/// Closed form: clip the geodesic from the center to x at the radius.
inline Point project_ball(const ModelSpace& space, const Ball& b, const Point& x) {
  const double d = distance(space, b.center, x);
  if (d <= b.radius) return x;
  return geodesic_point(space, b.center, x, b.radius / d);
}

/// Bilinear form of the ambient space restricted to the embedding's needs.
inline double form(const ModelSpace& space, const Point& u, const Point& v) { return space.inner(u, v); }

/// Nearest point to x on the common boundary of the selected balls, or
/// nothing when that boundary piece is empty.
///
/// In every model a ball boundary is a quadric level set that becomes affine
/// after a fixed choice of origin: on the sphere <p, c> = cos(sqrt(k) r), on
/// the hyperboloid <p, c>_M = -cosh(sqrt(-k) r), and in E^n the differences
/// |p - c_j|^2 - |p - c_1|^2 are affine. Each candidate is therefore
///   p = o + q0 + w,  q0 in span(normals),  w orthogonal to it,
/// with the length of w fixed by the quadric and its direction aligned with
/// the orthogonal part of x - o (which minimizes the distance to x).
inline std::optional<Point> nearest_on_boundary(const ModelSpace& space, const std::vector<const Ball*>& active,
                                                const Point& x) {
  const int m = space.ambient_dim();
  const double k = std::abs(space.kappa());
  Point o = Point::Zero(m);
  double level = 0.0;  // target value of <q, q>
  std::vector<Point> normals;
  std::vector<double> rhs;
  switch (space.model()) {
    case Model::euclidean: {
      const Ball& first = *active.front();
      o = first.center;
      level = first.radius * first.radius;
      for (std::size_t j = 1; j < active.size(); ++j) {
        const Point n = first.center - active[j]->center;
        normals.push_back(n);
        rhs.push_back(0.5 * (active[j]->radius * active[j]->radius - level - n.squaredNorm()));
      }
      break;
    }
    case Model::sphere:
      level = 1.0;
      for (const Ball* b : active) {
        normals.push_back(b->center);
        rhs.push_back(std::cos(std::sqrt(k) * b->radius));
      }
      break;
    case Model::hyperboloid:
      level = -1.0;
      for (const Ball* b : active) {
        normals.push_back(b->center);
        rhs.push_back(-std::cosh(std::sqrt(k) * b->radius));
      }
      break;
  }
  const int nn = static_cast<int>(normals.size());
  if (nn >= m) return std::nullopt;

  const Point t = x - o;
  Point q0 = Point::Zero(m);
  std::optional<Eigen::FullPivLU<Eigen::MatrixXd>> lu;
  if (nn > 0) {
    Eigen::MatrixXd gram(nn, nn);
    Eigen::VectorXd h(nn);
    for (int i = 0; i < nn; ++i) {
      for (int j = 0; j < nn; ++j) gram(i, j) = form(space, normals[i], normals[j]);
      h(i) = rhs[i];
    }
    lu.emplace(gram);
    if (lu->rank() < nn) return std::nullopt;
    const Eigen::VectorXd a = lu->solve(h);
    for (int i = 0; i < nn; ++i) q0 += a(i) * normals[i];
  }
  // Component of v orthogonal (under the form) to every normal.
  auto perp = [&](const Point& v) {
    if (nn == 0) return Point(v);
    Eigen::VectorXd vb(nn);
    for (int i = 0; i < nn; ++i) vb(i) = form(space, v, normals[i]);
    const Eigen::VectorXd b = lu->solve(vb);
    Point out = v;
    for (int i = 0; i < nn; ++i) out -= b(i) * normals[i];
    return out;
  };
  const double rho2 = level - form(space, q0, q0);
  if (rho2 < -1e-12) return std::nullopt;
  const double rho = std::sqrt(std::max(rho2, 0.0));

  // Direction of w: the orthogonal part of t, or any unit vector of the
  // orthogonal complement when t has none (then every candidate is equally far).
  Point dir = perp(t);
  double dn2 = form(space, dir, dir);
  for (int e = 0; e < m && !(dn2 > 1e-24); ++e) {
    dir = perp(Point::Unit(m, e));
    dn2 = form(space, dir, dir);
  }
  if (!(dn2 > 1e-24)) {
    if (rho > 1e-12) return std::nullopt;
    dir = Point::Zero(m);
    dn2 = 1.0;
  }
  Point p = o + q0 + (rho / std::sqrt(dn2)) * dir;
  if (space.model() == Model::hyperboloid && p(0) <= 0.0) return std::nullopt;
  if (space.model() != Model::euclidean) {
    if (!(form(space, p, p) * level > 0.0)) return std::nullopt;
    p = space.normalize(p);
  }
  return p;
}

/// Cyclic single-ball projections; used when active-set enumeration would
/// be too large.
inline Point project_cyclic(const ModelSpace& space, const std::vector<Ball>& balls, const Point& x) {
  Point cur = x;
  for (int sweep = 0; sweep < 500; ++sweep) {
    const Point prev = cur;
    for (const Ball& b : balls) cur = project_ball(space, b, cur);
    if (distance(space, prev, cur) < 1e-10) return cur;
  }
  throw ProjectionDidNotConverge("cyclic projections exhausted 500 sweeps");
}

}  // namespace detail

/// Metric projection P_K(x): the unique nearest point of K.
///
/// A single ball is handled in closed form. For an intersection every
/// subset of balls that could be active is tried: the nearest point on their
/// common boundary is computed in closed form, and the closest candidate that
/// lies in K wins. Up to 8 balls are enumerated; larger families fall back to
/// cyclic projections.
inline Point project(const ConvexSet& K, const Point& x) {
  const ModelSpace& space = K.space();
  space.require(x);
  if (K.is_whole()) return x;
  if (auto* b = std::get_if<Ball>(&K.shape())) return detail::project_ball(space, *b, x);

  const auto& balls = std::get<std::vector<Ball>>(K.shape());
  if (contains(K, x, 1e-12)) return x;
  if (balls.size() == 1) return detail::project_ball(space, balls.front(), x);
  if (balls.size() > 8) return detail::project_cyclic(space, balls, x);

  const std::size_t n = balls.size();
  const std::size_t max_active = static_cast<std::size_t>(space.dim());
  std::optional<Point> best;
  double best_d = std::numeric_limits<double>::infinity();
  std::vector<const Ball*> active;
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    active.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) active.push_back(&balls[i]);
    }
    if (active.size() > max_active) continue;
    std::optional<Point> cand;
    if (active.size() == 1) {
      cand = detail::project_ball(space, *active.front(), x);
    } else {
      cand = detail::nearest_on_boundary(space, active, x);
    }
    if (!cand || !space.contains(*cand, 1e-9)) continue;
    if (!space.contains(*cand)) cand = space.normalize(*cand);
    if (!contains(K, *cand, 1e-9)) continue;
    const double d = distance(space, x, *cand);
    if (d < best_d) {
      best_d = d;
      best = *cand;
    }
  }
  if (!best) throw ProjectionDidNotConverge("no feasible active set found for the intersection");
  return *best;
}

/// Random member of K (rejection from the first ball; whole spaces sample a
/// ball of the given fallback radius around the origin).
inline Point random_member(const ConvexSet& K, Rng& rng, double fallback_radius = 1.0) {
  const ModelSpace& space = K.space();
  const auto bs = K.balls();
  if (bs.empty()) return random_point_in_ball(space, space.origin(), fallback_radius, rng);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Point p = random_point_in_ball(space, bs.front().center, bs.front().radius, rng);
    if (contains(K, p, 0.0)) return p;
  }
  throw InfeasibleConstraints("rejection sampling found no member of the set");
}

}  // namespace hybridfp
