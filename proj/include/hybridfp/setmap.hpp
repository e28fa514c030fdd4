#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hybridfp/convex.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/params.hpp"

namespace hybridfp {

using SingleValuedMap = std::function<Point(const Point&)>;

/// A nonempty finite point set; stands in for members of C(K), KC(X),
/// CB(X) and P(X). Points closer than 1e-12 to an earlier point are dropped,
/// so the surviving order is the construction order.
class CompactSet {
 public:
  CompactSet(const ModelSpace& space, std::vector<Point> points) : space_(space) {
    if (points.empty()) throw GeometryError("compact set must be nonempty");
    for (Point& p : points) {
      space_.require(p);
      bool duplicate = false;
      for (const Point& q : points_) {
        if (distance(space_, p, q) < 1e-12) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) points_.push_back(std::move(p));
    }
  }

  static CompactSet singleton(const ModelSpace& space, Point p) { return CompactSet(space, {std::move(p)}); }

  const ModelSpace& space() const { return space_; }
  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

 private:
  ModelSpace space_;
  std::vector<Point> points_;
};

struct NearestResult {
  double distance;
  std::size_t index;  ///< lowest index attaining the minimum
};

/// d(x, A) together with the first member attaining it.
inline NearestResult nearest(const Point& x, const CompactSet& A) {
  NearestResult best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = distance(A.space(), x, A[i]);
    if (d < best.distance) best = {d, i};
  }
  return best;
}

inline double dist_point_set(const Point& x, const CompactSet& A) { return nearest(x, A).distance; }

/// Member of A nearest to x; ties go to the lowest construction index.
inline const Point& nearest_selection(const Point& x, const CompactSet& A) { return A[nearest(x, A).index]; }

/// sup_{a in A} d(a, B).
inline double excess(const CompactSet& A, const CompactSet& B) {
  double worst = 0.0;
  for (const Point& a : A) worst = std::max(worst, dist_point_set(a, B));
  return worst;
}

/// Hausdorff distance max{ sup_A d(., B), sup_B d(., A) }, exact on finite sets.
inline double hausdorff(const CompactSet& A, const CompactSet& B) {
  if (!(A.space() == B.space())) throw GeometryError("sets live in different spaces");
  return std::max(excess(A, B), excess(B, A));
}

/// Declared membership of a map in one of the mapping classes; carried as
/// metadata, never trusted by the verifiers.
struct ClassTag {
  std::string class_id;
  std::optional<HybridParams> params;
};

/// A point-to-set map T: K -> CB(X). eval must be deterministic.
class MultivaluedMap {
 public:
  using Eval = std::function<CompactSet(const Point&)>;

  MultivaluedMap(ConvexSet domain, Eval eval, std::string name = "map")
      : domain_(std::move(domain)), eval_(std::move(eval)), name_(std::move(name)) {}

  CompactSet operator()(const Point& x) const { return eval_(x); }

  const ConvexSet& domain() const { return domain_; }
  const ModelSpace& space() const { return domain_.space(); }
  const std::string& name() const { return name_; }

  std::vector<ClassTag>& tags() { return tags_; }
  const std::vector<ClassTag>& tags() const { return tags_; }

  /// Evaluates on the sample and checks every image is nonempty and
  /// repeatable. Throws GeometryError naming the first offending point.
  void spot_check(const std::vector<Point>& sample) const {
    for (const Point& x : sample) {
      const CompactSet a = eval_(x);
      const CompactSet b = eval_(x);
      if (a.size() != b.size() || hausdorff(a, b) != 0.0) {
        throw GeometryError("map '" + name_ + "' is not deterministic");
      }
    }
  }

  /// Lifts a single-valued map x -> f(x) to x -> {f(x)}.
  static MultivaluedMap from_single(ConvexSet domain, SingleValuedMap f,
                                    std::string name = "map") {
    const ModelSpace space = domain.space();
    return MultivaluedMap(
        std::move(domain), [space, f = std::move(f)](const Point& x) { return CompactSet::singleton(space, f(x)); },
        std::move(name));
  }

 private:
  ConvexSet domain_;
  Eval eval_;
  std::string name_;
  std::vector<ClassTag> tags_;
};

}  // namespace hybridfp
