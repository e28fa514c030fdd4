#pragma once

// Seeded property suites over the geometry layer. Shared by the
// command-line `check-invariants` tool and the acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hybridfp/convex.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/rng.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp::invariants {

struct SuiteResult {
  explicit SuiteResult(std::string n) : name(std::move(n)) {}

  std::string name;
  bool pass = true;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst = 0.0;  ///< most negative slack seen (0 when nothing was negative)
  std::string detail;

  /// Registers one slack value; negative beyond -tol counts as a failure.
  void check(double slack, double tol, const char* what) {
    ++instances;
    worst = std::min(worst, slack);
    if (!(slack >= -tol)) {
      if (failures == 0) detail = what;
      ++failures;
      pass = false;
    }
  }
};

inline constexpr double kGeometryTol = 1e-9;

/// Radius of the sampling ball used for a given curvature: comfortably
/// inside D_kappa / 4 on spheres so every triple has diameter < D_kappa / 2.
inline double sampling_radius(const ModelSpace& space) {
  return space.model() == Model::sphere ? 0.24 * space.diameter_bound() : 2.0;
}

/// Geodesic isometry, metric axioms and convexity of the distance function
/// on random triples, for kappa in {0, 1, 4, -1}.
inline SuiteResult geometry_suite(std::uint64_t seed, std::size_t per_space = 10000) {
  SuiteResult res{"geometry"};
  for (double kappa : {0.0, 1.0, 4.0, -1.0}) {
    const ModelSpace space(kappa, 3);
    Rng rng(seed ^ static_cast<std::uint64_t>(1000 + 7 * kappa));
    const double rho = sampling_radius(space);
    for (std::size_t i = 0; i < per_space; ++i) {
      const Point c = random_point_in_ball(space, space.origin(), rho, rng);
      const Point x = random_point_in_ball(space, c, rho, rng);
      const Point y = random_point_in_ball(space, c, rho, rng);
      const Point z = random_point_in_ball(space, c, rho, rng);
      const double dxy = distance(space, x, y);
      const double r = rng.uniform(), s = rng.uniform();
      const Point gr = geodesic_point(space, x, y, r);
      const Point gs = geodesic_point(space, x, y, s);
      res.check(kGeometryTol * (1.0 + dxy) - std::abs(distance(space, gr, gs) - std::abs(r - s) * dxy), 0.0,
                "geodesic isometry");
      res.check(kGeometryTol * (1.0 + dxy) - std::abs(distance(space, x, gr) - r * dxy), 0.0, "geodesic start offset");
      res.check(1e-12 - std::abs(dxy - distance(space, y, x)), 0.0, "symmetry");
      res.check(-distance(space, x, x), 1e-12, "d(x,x) = 0");
      res.check(distance(space, x, z) + distance(space, z, y) - dxy, 1e-10, "triangle inequality");
      const double t = rng.uniform();
      const Point m = geodesic_point(space, x, y, t);
      res.check((1.0 - t) * distance(space, x, z) + t * distance(space, y, z) - distance(space, m, z), kGeometryTol,
                "convexity of the distance function");
    }
  }
  return res;
}

/// CN* (R = 2) on flat and hyperbolic triples; R-convexity with
/// R = (pi - 2 eps) tan(eps) on spherical triples inside a ball of
/// diameter (pi - eps)/(2 sqrt(kappa)).
inline SuiteResult comparison_suite(std::uint64_t seed, std::size_t per_case = 100000) {
  SuiteResult res{"comparison"};
  auto run = [&](const ModelSpace& space, double rho, double R, std::uint64_t salt, const char* what) {
    Rng rng(seed * 31 + salt);
    for (std::size_t i = 0; i < per_case; ++i) {
      const Point c = space.model() == Model::sphere ? random_point_in_ball(space, space.origin(), 1.0, rng)
                                                     : random_point_in_ball(space, space.origin(), rho, rng);
      const Point x = random_point_in_ball(space, c, rho, rng);
      const Point y = random_point_in_ball(space, c, rho, rng);
      const Point z = random_point_in_ball(space, c, rho, rng);
      res.check(check_convexity_inequality(space, x, y, z, rng.uniform(), R), kGeometryTol, what);
    }
  };
  run(ModelSpace(0.0, 3), 2.0, 2.0, 1, "CN* in flat space");
  run(ModelSpace(-1.0, 3), 2.0, 2.0, 2, "CN* in hyperbolic space");
  std::uint64_t salt = 3;
  for (double eps : {std::numbers::pi / 6, std::numbers::pi / 4, std::numbers::pi / 3}) {
    const ConvexityConstants cc = r_constant(eps);
    for (double kappa : {1.0, 4.0}) {
      const ModelSpace space(kappa, 3);
      run(space, 0.5 * cc.diam_bound(kappa), cc.R, salt++, "R-convexity on the sphere");
    }
  }
  return res;
}

struct ProjectionShape {
  std::string label;
  ConvexSet set;
  Point query_center;
  double query_radius;
};

/// The set shapes exercised by the projection suite. On spheres every set
/// and every query lives inside a ball of diameter (pi - pi/4)/2.
inline std::vector<ProjectionShape> projection_shapes() {
  std::vector<ProjectionShape> out;
  auto tc = [](const ModelSpace& s, double a, double b) {
    Point v(2);
    v << a, b;
    return s.from_tangent_coords(v);
  };
  {
    const ModelSpace e(0.0, 2);
    out.push_back({"flat_ball", ConvexSet::ball(e, tc(e, 0.3, -0.2), 1.0), e.origin(), 3.0});
    out.push_back({"flat_lens",
                   ConvexSet::intersection(e, {{tc(e, -0.6, 0.0), 1.0}, {tc(e, 0.6, 0.0), 1.0}}, e.origin()),
                   e.origin(), 3.0});
    out.push_back({"flat_triple",
                   ConvexSet::intersection(
                       e, {{tc(e, -0.5, 0.0), 1.0}, {tc(e, 0.5, 0.0), 1.0}, {tc(e, 0.0, 0.6), 0.9}}, e.origin()),
                   e.origin(), 3.0});
  }
  {
    const ModelSpace s(1.0, 2);
    const double half = 0.5 * r_constant(std::numbers::pi / 4).diam_bound(1.0);  // 3 pi / 16
    out.push_back({"sphere_cap", ConvexSet::ball(s, tc(s, 0.1, 0.0), 0.3), s.origin(), half});
    out.push_back({"sphere_lens",
                   ConvexSet::intersection(s, {{tc(s, -0.15, 0.0), 0.3}, {tc(s, 0.15, 0.0), 0.3}}, s.origin()),
                   s.origin(), half});
    out.push_back({"sphere_triple",
                   ConvexSet::intersection(
                       s, {{tc(s, -0.12, 0.0), 0.3}, {tc(s, 0.12, 0.0), 0.3}, {tc(s, 0.0, 0.1), 0.25}}, s.origin()),
                   s.origin(), half});
  }
  {
    const ModelSpace h(-1.0, 2);
    out.push_back({"hyperbolic_ball", ConvexSet::ball(h, tc(h, 0.2, 0.1), 0.8), h.origin(), 2.5});
    out.push_back({"hyperbolic_lens",
                   ConvexSet::intersection(h, {{tc(h, -0.5, 0.0), 0.9}, {tc(h, 0.5, 0.0), 0.9}}, h.origin()),
                   h.origin(), 2.5});
  }
  return out;
}

/// Membership, identity on K, idempotence, nonexpansiveness and optimality
/// against a dense sample of K, per shape.
inline SuiteResult projection_suite(std::uint64_t seed, std::size_t per_shape = 10000, std::size_t dense = 1000) {
  SuiteResult res{"projection"};
  std::uint64_t salt = 0;
  for (const ProjectionShape& sh : projection_shapes()) {
    const ModelSpace& space = sh.set.space();
    Rng rng(seed * 131 + ++salt);
    std::vector<Point> members;
    members.reserve(dense);
    for (std::size_t i = 0; i < dense; ++i) members.push_back(random_member(sh.set, rng));
    for (std::size_t i = 0; i < per_shape; ++i) {
      const Point x = random_point_in_ball(space, sh.query_center, sh.query_radius, rng);
      const Point y = random_point_in_ball(space, sh.query_center, sh.query_radius, rng);
      const Point px = project(sh.set, x);
      const Point py = project(sh.set, y);
      double excess = 0.0;
      for (const Ball& b : sh.set.balls()) excess = std::max(excess, distance(space, b.center, px) - b.radius);
      res.check(-excess, kGeometryTol, "projection lies in K");
      res.check(-distance(space, project(sh.set, px), px), kGeometryTol, "idempotence");
      res.check(distance(space, x, y) - distance(space, px, py), kGeometryTol, "nonexpansiveness");
      const Point& m = members[i % members.size()];
      res.check(project(sh.set, m) == m ? 0.0 : -1.0, 0.0, "identity on K");
      if (i < 1000) {
        const double dp = distance(space, x, px);
        double best = std::numeric_limits<double>::infinity();
        for (const Point& q : members) best = std::min(best, distance(space, x, q));
        res.check(best - dp, kGeometryTol, "optimality against dense sampling");
      }
    }
  }
  return res;
}

/// Random finite set of 1..max_size points around the origin.
inline CompactSet random_set(const ModelSpace& space, Rng& rng, std::size_t max_size, double radius) {
  const std::size_t n = 1 + rng.index(max_size);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point_in_ball(space, space.origin(), radius, rng));
  return CompactSet(space, std::move(pts));
}

/// Hausdorff distance against a plain double loop, plus metric axioms.
inline SuiteResult hausdorff_suite(std::uint64_t seed, std::size_t pairs = 1000) {
  SuiteResult res{"hausdorff"};
  for (double kappa : {0.0, 1.0, -1.0}) {
    const ModelSpace space(kappa, 2);
    Rng rng(seed * 17 + static_cast<std::uint64_t>(kappa + 5));
    const double rho = space.model() == Model::sphere ? 1.0 : 2.0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const CompactSet A = random_set(space, rng, 20, rho);
      const CompactSet B = random_set(space, rng, 20, rho);
      const CompactSet C = random_set(space, rng, 20, rho);
      double ab = 0.0, ba = 0.0;
      for (const Point& a : A) {
        double m = std::numeric_limits<double>::infinity();
        for (const Point& b : B) m = std::min(m, distance(space, a, b));
        ab = std::max(ab, m);
      }
      for (const Point& b : B) {
        double m = std::numeric_limits<double>::infinity();
        for (const Point& a : A) m = std::min(m, distance(space, b, a));
        ba = std::max(ba, m);
      }
      const double h = hausdorff(A, B);
      res.check(h == std::max(ab, ba) ? 0.0 : -1.0, 0.0, "hausdorff equals brute force");
      res.check(h == hausdorff(B, A) ? 0.0 : -1.0, 0.0, "hausdorff symmetry");
      res.check(-hausdorff(A, A), 0.0, "hausdorff identity");
      res.check(hausdorff(A, C) + hausdorff(C, B) - h, 1e-12, "hausdorff triangle inequality");
      const Point x = random_point_in_ball(space, space.origin(), rho, rng);
      std::vector<Point> ax(A.points());
      ax.push_back(x);
      res.check(hausdorff(CompactSet(space, ax), A) - dist_point_set(x, A), 1e-12, "d(x,A) <= H(A+x, A)");
    }
  }
  return res;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> n = {"geometry", "comparison", "projection", "hausdorff"};
  return n;
}

inline SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "geometry") return geometry_suite(seed);
  if (name == "comparison") return comparison_suite(seed);
  if (name == "projection") return projection_suite(seed);
  if (name == "hausdorff") return hausdorff_suite(seed);
  SuiteResult r{name};
  r.pass = false;
  r.detail = "unknown suite";
  return r;
}

}  // namespace hybridfp::invariants
