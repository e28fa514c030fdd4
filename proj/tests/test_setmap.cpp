#include <gtest/gtest.h>

#include <numbers>

#include "hybridfp/builtin_maps.hpp"
#include "hybridfp/setmap.hpp"
#include "test_support.hpp"

using namespace hybridfp;
using hybridfp::test::pt;

namespace {

const ModelSpace kLine(0.0, 1);

CompactSet line_set(std::initializer_list<double> xs) {
  std::vector<Point> pts;
  for (double x : xs) pts.push_back(pt({x}));
  return CompactSet(kLine, pts);
}

}  // namespace

TEST(CompactSet, DropsNearDuplicatesAndKeepsOrder) {
  const CompactSet A = line_set({2.0, 1.0, 2.0 + 1e-14, 3.0});
  ASSERT_EQ(A.size(), 3u);
  EXPECT_EQ(A[0](0), 2.0);
  EXPECT_EQ(A[1](0), 1.0);
  EXPECT_EQ(A[2](0), 3.0);
  EXPECT_THROW(CompactSet(kLine, {}), GeometryError);
}

TEST(DistPointSet, Examples) {
  EXPECT_EQ(dist_point_set(pt({3.0}), line_set({3.0, 4.0})), 0.0);
  EXPECT_EQ(dist_point_set(pt({0.0}), line_set({3.0, 4.0})), 3.0);
  const ModelSpace s(1.0, 2);
  const CompactSet A(s, {pt({0, 1, 0}), pt({0, 0, 1})});
  EXPECT_NEAR(dist_point_set(pt({1, 0, 0}), A), std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(nearest(pt({1, 0, 0}), A).index, 0u);
}

TEST(Hausdorff, Examples) {
  EXPECT_EQ(hausdorff(line_set({0.0}), line_set({3.0, 4.0})), 4.0);
  EXPECT_EQ(excess(line_set({0.0}), line_set({3.0, 4.0})), 3.0);
  EXPECT_EQ(hausdorff(line_set({1.0, 5.0}), line_set({5.0, 1.0})), 0.0);
}

TEST(Hausdorff, MetricProperty) {
  const ModelSpace s(1.0, 3);
  Rng rng(8);
  auto draw = [&] {
    std::vector<Point> pts;
    const std::size_t n = 1 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point_in_ball(s, s.origin(), 0.7, rng));
    return CompactSet(s, pts);
  };
  for (int i = 0; i < 300; ++i) {
    const CompactSet A = draw(), B = draw(), C = draw();
    ASSERT_EQ(hausdorff(A, A), 0.0);
    ASSERT_EQ(hausdorff(A, B), hausdorff(B, A));
    ASSERT_LE(hausdorff(A, C), hausdorff(A, B) + hausdorff(B, C) + 1e-12);
  }
}

TEST(Hausdorff, RejectsMixedSpaces) {
  EXPECT_THROW(hausdorff(line_set({0.0}), CompactSet(ModelSpace(0.0, 2), {pt({0, 0})})), GeometryError);
}

TEST(NearestSelection, Examples) {
  const ModelSpace e(0.0, 2);
  EXPECT_EQ(nearest_selection(pt({0, 0}), CompactSet(e, {pt({5, 5})})), pt({5, 5}));
  EXPECT_EQ(nearest_selection(pt({0, 0}), CompactSet(e, {pt({1, 0}), pt({0, 2})})), pt({1, 0}));
  EXPECT_EQ(nearest_selection(pt({0, 0}), CompactSet(e, {pt({1, 0}), pt({0, 1})})), pt({1, 0}));
}

TEST(MultivaluedMap, SingletonLiftAndSpotCheck) {
  const ConvexSet R = ConvexSet::whole(kLine);
  const MultivaluedMap T = MultivaluedMap::from_single(R, [](const Point& x) { return Point(0.5 * x); }, "half");
  const CompactSet img = T(pt({0.8}));
  ASSERT_EQ(img.size(), 1u);
  EXPECT_EQ(img[0](0), 0.4);
  EXPECT_NO_THROW(T.spot_check({pt({0.1}), pt({-3.0})}));
}

TEST(MultivaluedMap, SpotCheckCatchesNondeterminism) {
  const ConvexSet R = ConvexSet::whole(kLine);
  auto counter = std::make_shared<int>(0);
  const MultivaluedMap T(R, [counter](const Point&) { return CompactSet(kLine, {pt({double((*counter)++)})}); },
                         "drifting");
  EXPECT_THROW(T.spot_check({pt({0.0})}), GeometryError);
}

TEST(BuiltinMaps, TwoPointImagesOnTheSphere) {
  const ModelSpace s(1.0, 2);
  const ConvexSet K = ConvexSet::ball(s, s.origin(), 0.5);
  const Point p = s.from_tangent_coords(pt({0.2, 0}));
  const MultivaluedMap T = maps::two_point(K, p, 0.25, 0.75);
  const Point x = s.from_tangent_coords(pt({-0.3, 0.1}));
  const CompactSet img = T(x);
  ASSERT_EQ(img.size(), 2u);
  const double d = distance(s, x, p);
  EXPECT_NEAR(distance(s, img[0], p), 0.75 * d, 1e-14);
  EXPECT_NEAR(distance(s, img[1], p), 0.25 * d, 1e-14);
  EXPECT_NEAR(dist_point_set(x, img), 0.25 * d, 1e-14);
  const CompactSet at_p = T(p);
  EXPECT_EQ(at_p.size(), 1u);
}

TEST(BuiltinMaps, PointTableUsesNearestKey) {
  const ConvexSet R = ConvexSet::whole(kLine);
  const MultivaluedMap T = maps::point_table(R, {pt({0.0}), pt({1.0})}, {{pt({5.0})}, {pt({6.0}), pt({7.0})}});
  EXPECT_EQ(T(pt({0.2})).size(), 1u);
  EXPECT_EQ(T(pt({0.9})).size(), 2u);
  EXPECT_EQ(T(pt({0.5}))[0](0), 5.0);  // tie goes to the first key
}

TEST(BuiltinMaps, AffineNeedsFlatSpace) {
  EXPECT_THROW(maps::affine(ModelSpace(1.0, 2), 0.5, pt({0, 0})), GeometryError);
  EXPECT_THROW(maps::geodesic_contraction(kLine, pt({0.0}), 1.5), GeometryError);
}
