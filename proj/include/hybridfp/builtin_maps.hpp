#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hybridfp/classes.hpp"
#include "hybridfp/convex.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp::maps {

/// x -> the point a fraction f of the way from x to the target.
inline SingleValuedMap geodesic_contraction(const ModelSpace& space, Point target, double fraction) {
  space.require(target);
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw GeometryError("contraction fraction must lie in [0,1]");
  return [space, target = std::move(target), fraction](const Point& x) {
    return geodesic_point(space, x, target, fraction);
  };
}

inline SingleValuedMap constant(const ModelSpace& space, Point c) {
  space.require(c);
  return [c = std::move(c)](const Point&) { return c; };
}

inline SingleValuedMap identity() {
  return [](const Point& x) { return x; };
}

/// x -> s x + b; flat space only.
inline SingleValuedMap affine(const ModelSpace& space, double s, Point b) {
  if (space.model() != Model::euclidean) throw GeometryError("affine maps need a flat space");
  if (b.size() != space.dim()) throw GeometryError("affine offset has the wrong length");
  return [s, b = std::move(b)](const Point& x) -> Point { return s * x + b; };
}

inline SingleValuedMap linear_scale(const ModelSpace& space, double s) {
  return affine(space, s, Point::Zero(space.dim()));
}

/// x -> { points a fraction f_i of the way from x to the target }.
inline MultivaluedMap multi_contraction(const ConvexSet& domain, Point target, std::vector<double> fractions,
                                        std::string name = "multi_contraction") {
  const ModelSpace space = domain.space();
  space.require(target);
  if (fractions.empty()) throw GeometryError("need at least one fraction");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw GeometryError("contraction fraction must lie in [0,1]");
  }
  return MultivaluedMap(
      domain,
      [space, target = std::move(target), fractions = std::move(fractions)](const Point& x) {
        std::vector<Point> pts;
        pts.reserve(fractions.size());
        for (double f : fractions) pts.push_back(geodesic_point(space, x, target, f));
        return CompactSet(space, std::move(pts));
      },
      std::move(name));
}

inline MultivaluedMap two_point(const ConvexSet& domain, Point target, double f1, double f2) {
  return multi_contraction(domain, std::move(target), {f1, f2}, "two_point");
}

/// Lookup map: the image of x is the value set of the nearest key (ties go
/// to the first key).
inline MultivaluedMap point_table(const ConvexSet& domain, std::vector<Point> keys, std::vector<std::vector<Point>> values) {
  const ModelSpace space = domain.space();
  if (keys.empty() || keys.size() != values.size()) throw GeometryError("point table needs matching nonempty keys and values");
  std::vector<CompactSet> images;
  images.reserve(values.size());
  for (auto& v : values) images.emplace_back(space, std::move(v));
  CompactSet key_set(space, keys);
  if (key_set.size() != keys.size()) throw GeometryError("point table keys must be distinct");
  return MultivaluedMap(
      domain,
      [key_set = std::move(key_set), images = std::move(images)](const Point& x) {
        return images[nearest(x, key_set).index];
      },
      "point_table");
}

/// A self-contained instance: space, domain, map, known fixed point and the
/// coefficients it is claimed to satisfy.
struct Instance {
  ModelSpace space;
  ConvexSet domain;
  MultivaluedMap map;
  std::optional<SingleValuedMap> single;
  Point fixed_point;
  ClassId class_id;
  HybridParams params;
};

/// Curated generalized type I example on a spherical cap (kappa = 1, n = 2):
/// K = B(e_0, 0.5), T x = { midpoint of x and p } with p at distance 0.2 from
/// the cap center. Claimed coefficients a1 = 0.3, a2 = a3 = 0.05,
/// k1 = k2 = 0.1; the fixed point p is an endpoint.
inline Instance sphere_cap_example() {
  const ModelSpace space(1.0, 2);
  ConvexSet K = ConvexSet::ball(space, space.origin(), 0.5);
  Point tangent(2);
  tangent << 0.2, 0.0;
  const Point p = space.from_tangent_coords(tangent);
  SingleValuedMap f = geodesic_contraction(space, p, 0.5);
  MultivaluedMap T = MultivaluedMap::from_single(K, f, "sphere_cap_contraction");
  HybridParams hp;
  hp.a1 = 0.3;
  hp.a2 = 0.05;
  hp.a3 = 0.05;
  hp.k1 = 0.1;
  hp.k2 = 0.1;
  T.tags().push_back({"generalized_type1", hp});
  return Instance{space, K, std::move(T), std::move(f), p, ClassId::generalized_type1, std::move(hp)};
}

}  // namespace hybridfp::maps
