#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hybridfp/convex.hpp"
#include "test_support.hpp"

using namespace hybridfp;
using hybridfp::test::pt;

namespace {

ConvexSet flat_lens() {
  const ModelSpace e(0.0, 2);
  return ConvexSet::intersection(e, {{pt({-1, 0}), 1.5}, {pt({1, 0}), 1.5}}, pt({0, 0}));
}

// Dense-sampling oracle for the distance from x to K.
double dense_distance(const ConvexSet& K, const Point& x, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) best = std::min(best, distance(K.space(), x, random_member(K, rng)));
  return best;
}

}  // namespace

TEST(Contains, Examples) {
  const ModelSpace e(0.0, 2);
  const ConvexSet B = ConvexSet::ball(e, pt({0, 0}), 1.0);
  EXPECT_TRUE(contains(B, pt({0, 0}), 0.0));
  EXPECT_FALSE(contains(B, pt({2, 0}), 1e-9));
  EXPECT_TRUE(contains(flat_lens(), pt({0, 0}), 0.0));
  EXPECT_TRUE(contains(ConvexSet::whole(e), pt({1e6, -1e6}), 0.0));
}

TEST(Contains, BoundaryToleranceIsOneSided) {
  const ModelSpace e(0.0, 1);
  const ConvexSet B = ConvexSet::ball(e, pt({0}), 1.0);
  EXPECT_TRUE(contains(B, pt({1.0 + 1e-10}), 1e-9));
  EXPECT_FALSE(contains(B, pt({1.0 + 1e-8}), 1e-9));
}

TEST(ConvexSet, RejectsBadShapes) {
  const ModelSpace s(1.0, 2);
  EXPECT_THROW(ConvexSet::ball(s, s.origin(), std::numbers::pi / 2), GeometryError);
  EXPECT_THROW(ConvexSet::ball(s, s.origin(), -0.1), GeometryError);
  const ModelSpace e(0.0, 2);
  EXPECT_THROW(ConvexSet::intersection(e, {{pt({-1, 0}), 0.5}, {pt({1, 0}), 0.5}}, pt({0, 0})), GeometryError);
  EXPECT_THROW(ConvexSet::intersection(e, {}, pt({0, 0})), GeometryError);
}

TEST(Project, IdentityOnMembers) {
  const ConvexSet L = flat_lens();
  EXPECT_EQ(project(L, pt({0.1, 0.2})), pt({0.1, 0.2}));
}

TEST(Project, RadialClipInFlatBall) {
  const ModelSpace e(0.0, 2);
  const Point p = project(ConvexSet::ball(e, pt({0, 0}), 1.0), pt({2, 0}));
  EXPECT_NEAR(p(0), 1.0, 1e-15);
  EXPECT_NEAR(p(1), 0.0, 1e-15);
}

TEST(Project, GeodesicClipOnSphere) {
  const ModelSpace s(1.0, 2);
  const double r = std::numbers::pi / 6;
  const Point p = project(ConvexSet::ball(s, pt({1, 0, 0}), r), pt({0, 1, 0}));
  EXPECT_NEAR(p(0), std::cos(r), 1e-14);
  EXPECT_NEAR(p(1), std::sin(r), 1e-14);
  EXPECT_NEAR(p(2), 0.0, 1e-14);
}

TEST(Project, FlatLensCornerAndFace) {
  const ConvexSet L = flat_lens();
  // Above the lens the nearest point is the corner (0, sqrt(1.25)).
  const Point corner = project(L, pt({0, 3}));
  EXPECT_NEAR(corner(0), 0.0, 1e-12);
  EXPECT_NEAR(corner(1), std::sqrt(1.25), 1e-12);
  // To the right the nearest point lies on the left ball's boundary.
  const Point face = project(L, pt({3, 0}));
  EXPECT_NEAR(face(0), 0.5, 1e-12);
  EXPECT_NEAR(face(1), 0.0, 1e-12);
}

TEST(Project, WholeSpaceIsIdentity) {
  const ModelSpace h(-1.0, 2);
  const Point x = h.from_tangent_coords(pt({3.0, 1.0}));
  EXPECT_EQ(project(ConvexSet::whole(h), x), x);
}

TEST(Project, PropertiesOnSphereLens) {
  const ModelSpace s(1.0, 2);
  const Point a = s.from_tangent_coords(pt({-0.15, 0})), b = s.from_tangent_coords(pt({0.15, 0}));
  const ConvexSet L = ConvexSet::intersection(s, {{a, 0.3}, {b, 0.3}}, s.origin());
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const Point x = random_point_in_ball(s, s.origin(), 0.8, rng);
    const Point y = random_point_in_ball(s, s.origin(), 0.8, rng);
    const Point px = project(L, x), py = project(L, y);
    ASSERT_TRUE(contains(L, px, 1e-9));
    ASSERT_LE(distance(s, project(L, px), px), 1e-9);
    ASSERT_LE(distance(s, px, py), distance(s, x, y) + 1e-9);
    if (i < 20) { ASSERT_LE(distance(s, x, px), dense_distance(L, x, 2000, 100 + i) + 1e-9); }
  }
}

TEST(Project, HyperbolicBallMatchesDenseSampling) {
  const ModelSpace h(-1.0, 2);
  const ConvexSet B = ConvexSet::ball(h, h.origin(), 1.0);
  const Point x = h.from_tangent_coords(pt({2.0, 0.5}));
  const double d = distance(h, x, project(B, x));
  EXPECT_NEAR(d, std::hypot(2.0, 0.5) - 1.0, 1e-12);
  EXPECT_LE(d, dense_distance(B, x, 5000, 7) + 1e-12);
}

TEST(Project, ManyBallsFallBackToCyclicProjections) {
  const ModelSpace e(0.0, 2);
  std::vector<Ball> balls;
  for (int k = 0; k < 10; ++k) {
    const double a = 2 * std::numbers::pi * k / 10;
    balls.push_back({pt({0.2 * std::cos(a), 0.2 * std::sin(a)}), 1.0});
  }
  const ConvexSet K = ConvexSet::intersection(e, balls, pt({0, 0}));
  const Point p = project(K, pt({3, 0.4}));
  EXPECT_TRUE(contains(K, p, 1e-6));
}

TEST(RandomMember, StaysInside) {
  const ConvexSet L = flat_lens();
  Rng rng(4);
  for (int i = 0; i < 500; ++i) ASSERT_TRUE(contains(L, random_member(L, rng), 0.0));
}
