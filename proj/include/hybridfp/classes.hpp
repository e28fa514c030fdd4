#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridfp/convex.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/params.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp {

enum class ClassId {
  nonexpansive,
  nonspreading,
  hybrid,
  lambda_hybrid,
  alpha_nonexpansive,
  ab_generalized_hybrid,
  lin_generalized_hybrid,
  type1,
  generalized_type1,
  type2,
  generalized_type2,
};

inline constexpr ClassId kAllClasses[] = {
    ClassId::nonexpansive,       ClassId::nonspreading,      ClassId::hybrid,
    ClassId::lambda_hybrid,      ClassId::alpha_nonexpansive, ClassId::ab_generalized_hybrid,
    ClassId::lin_generalized_hybrid, ClassId::type1,          ClassId::generalized_type1,
    ClassId::type2,              ClassId::generalized_type2,
};

inline std::string_view to_string(ClassId id) {
  switch (id) {
    case ClassId::nonexpansive: return "nonexpansive";
    case ClassId::nonspreading: return "nonspreading";
    case ClassId::hybrid: return "hybrid";
    case ClassId::lambda_hybrid: return "lambda_hybrid";
    case ClassId::alpha_nonexpansive: return "alpha_nonexpansive";
    case ClassId::ab_generalized_hybrid: return "ab_generalized_hybrid";
    case ClassId::lin_generalized_hybrid: return "lin_generalized_hybrid";
    case ClassId::type1: return "type1";
    case ClassId::generalized_type1: return "generalized_type1";
    case ClassId::type2: return "type2";
    case ClassId::generalized_type2: return "generalized_type2";
  }
  return "?";
}

inline std::optional<ClassId> parse_class_id(std::string_view s) {
  for (ClassId id : kAllClasses) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

/// Single-valued classes act on maps X -> X; the rest on X -> CB(X).
inline bool is_classical(ClassId id) {
  return id != ClassId::type1 && id != ClassId::generalized_type1 && id != ClassId::type2 &&
         id != ClassId::generalized_type2;
}

enum class Quantifier { forall, exists };

enum class Verdict { satisfied_on_sample, violated };

inline std::string_view to_string(Verdict v) {
  return v == Verdict::violated ? "violated" : "satisfied_on_sample";
}

struct PointPair {
  Point x;
  Point y;
};

struct ClassReport {
  std::string class_id;
  std::size_t sampled_pairs = 0;
  double worst_slack = std::numeric_limits<double>::infinity();  ///< min over pairs of RHS - LHS
  std::optional<PointPair> witness;                               ///< present iff violated
  Verdict verdict = Verdict::satisfied_on_sample;
  std::vector<double> pair_slacks;                                ///< one entry per sampled pair
};

inline constexpr double kDefaultSlackTol = 1e-10;

namespace detail {

inline const Coefficient& need(const std::optional<Coefficient>& c, const char* name) {
  if (!c) throw MissingParam(std::string("missing coefficient ") + name);
  return *c;
}

inline double need(const std::optional<double>& c, const char* name) {
  if (!c) throw MissingParam(std::string("missing parameter ") + name);
  return *c;
}

/// Running reduction over pairs: min slack, first most-violating witness.
class SlackAccumulator {
 public:
  SlackAccumulator(ClassId id, std::size_t expected, double tol) : tol_(tol) {
    report_.class_id = std::string(to_string(id));
    report_.pair_slacks.reserve(expected);
  }

  void add(const PointPair& pair, double slack, double rhs) {
    report_.pair_slacks.push_back(slack);
    ++report_.sampled_pairs;
    report_.worst_slack = std::min(report_.worst_slack, slack);
    if (slack < -tol_ * (1.0 + std::abs(rhs)) && slack < worst_violation_) {
      worst_violation_ = slack;
      report_.witness = pair;
      report_.verdict = Verdict::violated;
    }
  }

  ClassReport finish() && { return std::move(report_); }

 private:
  double tol_;
  double worst_violation_ = std::numeric_limits<double>::infinity();
  ClassReport report_;
};

inline void require_pairs(std::span<const PointPair> pairs) {
  if (pairs.empty()) throw DomainSamplerEmpty("the pair sampler produced no pairs");
}

struct Slack {
  double value;
  double rhs;
};

}  // namespace detail

/// Verifies one of the single-valued classes on the sampled ordered pairs.
/// Norms become metric distances and d(Tx, Ty) stands for the distance
/// between the two images. Nonexpansive slack is d(x,y) - d(Tx,Ty); every
/// other class compares squared distances.
inline ClassReport check_classical(const ModelSpace& space, const SingleValuedMap& T, ClassId id,
                                   const HybridParams& params, std::span<const PointPair> pairs,
                                   double tol = kDefaultSlackTol) {
  if (!is_classical(id)) throw MissingParam("check_classical handles single-valued classes only");
  detail::require_pairs(pairs);
  detail::SlackAccumulator acc(id, pairs.size(), tol);
  for (const PointPair& pr : pairs) {
    const Point& x = pr.x;
    const Point& y = pr.y;
    const Point tx = T(x);
    const Point ty = T(y);
    auto d2 = [&](const Point& a, const Point& b) {
      const double d = distance(space, a, b);
      return d * d;
    };
    detail::Slack s{};
    switch (id) {
      case ClassId::nonexpansive: {
        const double rhs = distance(space, x, y);
        s = {rhs - distance(space, tx, ty), rhs};
        break;
      }
      case ClassId::nonspreading: {
        const double rhs = d2(tx, y) + d2(ty, x);
        s = {rhs - 2.0 * d2(tx, ty), rhs};
        break;
      }
      case ClassId::hybrid: {
        const double rhs = d2(x, y) + d2(tx, y) + d2(ty, x);
        s = {rhs - 3.0 * d2(tx, ty), rhs};
        break;
      }
      case ClassId::lambda_hybrid: {
        const double l = detail::need(params.lambda, "lambda");
        const double rhs = (1.0 - l) * d2(x, y) + l * d2(tx, y);
        s = {rhs - ((1.0 + l) * d2(tx, ty) - l * d2(x, ty)), rhs};
        break;
      }
      case ClassId::alpha_nonexpansive: {
        const double a = detail::need(params.alpha, "alpha");
        const double rhs = (1.0 - 2.0 * a) * d2(x, y) + a * d2(tx, y) + a * d2(x, ty);
        s = {rhs - d2(tx, ty), rhs};
        break;
      }
      case ClassId::ab_generalized_hybrid: {
        const double a = detail::need(params.alpha, "alpha");
        const double b = detail::need(params.beta, "beta");
        const double rhs = b * d2(tx, y) + (1.0 - b) * d2(x, y);
        s = {rhs - (a * d2(tx, ty) + (1.0 - a) * d2(x, ty)), rhs};
        break;
      }
      case ClassId::lin_generalized_hybrid: {
        const double a1 = detail::need(params.a1, "a1")(x);
        const double a2 = detail::need(params.a2, "a2")(x);
        const double a3 = detail::need(params.a3, "a3")(x);
        const double k1 = detail::need(params.k1, "k1")(x);
        const double k2 = detail::need(params.k2, "k2")(x);
        const double rhs = a1 * d2(x, y) + a2 * d2(tx, y) + a3 * d2(x, ty) + k1 * d2(tx, x) + k2 * d2(ty, y);
        s = {rhs - d2(tx, ty), rhs};
        break;
      }
      default: break;
    }
    acc.add(pr, s.value, s.rhs);
  }
  return std::move(acc).finish();
}

namespace detail {

/// Reduces per-(u, v) slacks of one pair: the minimum when every choice
/// must satisfy the inequality, the maximum when one choice suffices.
template <class SlackFn>
Slack reduce_over_images(const CompactSet& tx, const CompactSet& ty, Quantifier q, SlackFn&& fn) {
  Slack best{q == Quantifier::forall ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity(),
             0.0};
  for (const Point& u : tx) {
    for (const Point& v : ty) {
      const Slack s = fn(u, v);
      if (q == Quantifier::forall ? s.value < best.value : s.value > best.value) best = s;
    }
  }
  return best;
}

}  // namespace detail

/// (a1, a2, b1, b2)-multivalued hybrid type I:
///   a1 d^2(u,v) + a2 d^2(u,y) <= b1 d^2(x,v) + b2 d^2(x,y),  u in Tx, v in Ty.
/// Coefficients are evaluated at x. The definition quantifies over every
/// u and v, hence the forall default.
inline ClassReport check_type1(const MultivaluedMap& T, const HybridParams& params, std::span<const PointPair> pairs,
                               Quantifier q = Quantifier::forall, double tol = kDefaultSlackTol) {
  detail::require_pairs(pairs);
  const ModelSpace& space = T.space();
  const Coefficient& A1 = detail::need(params.a1, "a1");
  const Coefficient& A2 = detail::need(params.a2, "a2");
  const Coefficient& B1 = detail::need(params.b1, "b1");
  const Coefficient& B2 = detail::need(params.b2, "b2");
  detail::SlackAccumulator acc(ClassId::type1, pairs.size(), tol);
  for (const PointPair& pr : pairs) {
    const double a1 = A1(pr.x), a2 = A2(pr.x), b1 = B1(pr.x), b2 = B2(pr.x);
    const double dxy = distance(space, pr.x, pr.y);
    const detail::Slack s = detail::reduce_over_images(T(pr.x), T(pr.y), q, [&](const Point& u, const Point& v) {
      const double duv = distance(space, u, v), duy = distance(space, u, pr.y), dxv = distance(space, pr.x, v);
      const double rhs = b1 * dxv * dxv + b2 * dxy * dxy;
      return detail::Slack{rhs - (a1 * duv * duv + a2 * duy * duy), rhs};
    });
    acc.add(pr, s.value, s.rhs);
  }
  return std::move(acc).finish();
}

/// Generalized multivalued hybrid type I:
///   d^2(u,v) <= a1 d^2(x,y) + a2 d^2(u,y) + a3 d^2(x,v) + k1 d^2(u,x) + k2 d^2(v,y).
/// The definition asks for some u in Tx and v in Ty, hence the exists default.
inline ClassReport check_generalized_type1(const MultivaluedMap& T, const HybridParams& params,
                                           std::span<const PointPair> pairs, Quantifier q = Quantifier::exists,
                                           double tol = kDefaultSlackTol) {
  detail::require_pairs(pairs);
  const ModelSpace& space = T.space();
  const Coefficient& A1 = detail::need(params.a1, "a1");
  const Coefficient& A2 = detail::need(params.a2, "a2");
  const Coefficient& A3 = detail::need(params.a3, "a3");
  const Coefficient& K1 = detail::need(params.k1, "k1");
  const Coefficient& K2 = detail::need(params.k2, "k2");
  detail::SlackAccumulator acc(ClassId::generalized_type1, pairs.size(), tol);
  for (const PointPair& pr : pairs) {
    const double a1 = A1(pr.x), a2 = A2(pr.x), a3 = A3(pr.x), k1 = K1(pr.x), k2 = K2(pr.x);
    const double dxy = distance(space, pr.x, pr.y);
    const detail::Slack s = detail::reduce_over_images(T(pr.x), T(pr.y), q, [&](const Point& u, const Point& v) {
      auto d2 = [&](const Point& a, const Point& b) {
        const double d = distance(space, a, b);
        return d * d;
      };
      const double rhs = a1 * dxy * dxy + a2 * d2(u, pr.y) + a3 * d2(pr.x, v) + k1 * d2(u, pr.x) + k2 * d2(v, pr.y);
      return detail::Slack{rhs - d2(u, v), rhs};
    });
    acc.add(pr, s.value, s.rhs);
  }
  return std::move(acc).finish();
}

/// (a1, a2, b1, b2)-multivalued hybrid type II (set level):
///   a1 H^2(Tx,Ty) + a2 d^2(Tx,y) <= b1 d^2(x,Ty) + b2 d^2(x,y).
inline ClassReport check_type2(const MultivaluedMap& T, const HybridParams& params, std::span<const PointPair> pairs,
                               double tol = kDefaultSlackTol) {
  detail::require_pairs(pairs);
  const ModelSpace& space = T.space();
  const Coefficient& A1 = detail::need(params.a1, "a1");
  const Coefficient& A2 = detail::need(params.a2, "a2");
  const Coefficient& B1 = detail::need(params.b1, "b1");
  const Coefficient& B2 = detail::need(params.b2, "b2");
  detail::SlackAccumulator acc(ClassId::type2, pairs.size(), tol);
  for (const PointPair& pr : pairs) {
    const CompactSet tx = T(pr.x);
    const CompactSet ty = T(pr.y);
    const double h = hausdorff(tx, ty);
    const double dtxy = dist_point_set(pr.y, tx);
    const double dxty = dist_point_set(pr.x, ty);
    const double dxy = distance(space, pr.x, pr.y);
    const double rhs = B1(pr.x) * dxty * dxty + B2(pr.x) * dxy * dxy;
    acc.add(pr, rhs - (A1(pr.x) * h * h + A2(pr.x) * dtxy * dtxy), rhs);
  }
  return std::move(acc).finish();
}

/// Generalized multivalued hybrid type II (set level):
///   H^2(Tx,Ty) <= a1 d^2(x,y) + a2 d^2(Tx,y) + a3 d^2(x,Ty) + k1 d^2(Tx,x) + k2 d^2(Ty,y).
inline ClassReport check_generalized_type2(const MultivaluedMap& T, const HybridParams& params,
                                           std::span<const PointPair> pairs, double tol = kDefaultSlackTol) {
  detail::require_pairs(pairs);
  const ModelSpace& space = T.space();
  const Coefficient& A1 = detail::need(params.a1, "a1");
  const Coefficient& A2 = detail::need(params.a2, "a2");
  const Coefficient& A3 = detail::need(params.a3, "a3");
  const Coefficient& K1 = detail::need(params.k1, "k1");
  const Coefficient& K2 = detail::need(params.k2, "k2");
  detail::SlackAccumulator acc(ClassId::generalized_type2, pairs.size(), tol);
  for (const PointPair& pr : pairs) {
    const CompactSet tx = T(pr.x);
    const CompactSet ty = T(pr.y);
    const double h = hausdorff(tx, ty);
    const double dtxy = dist_point_set(pr.y, tx);
    const double dxty = dist_point_set(pr.x, ty);
    const double dtxx = dist_point_set(pr.x, tx);
    const double dtyy = dist_point_set(pr.y, ty);
    const double dxy = distance(space, pr.x, pr.y);
    const double rhs = A1(pr.x) * dxy * dxy + A2(pr.x) * dtxy * dtxy + A3(pr.x) * dxty * dxty +
                       K1(pr.x) * dtxx * dtxx + K2(pr.x) * dtyy * dtyy;
    acc.add(pr, rhs - h * h, rhs);
  }
  return std::move(acc).finish();
}

struct ParamValidation {
  bool ok = true;
  std::optional<Point> at;  ///< first sampled x where a clause failed
  std::string clause;
};

/// Checks the definitional constraints of a class at every sampled x and
/// reports the first failing clause.
inline ParamValidation validate_params(ClassId id, const HybridParams& p, std::span<const Point> sample) {
  auto fail = [](std::optional<Point> at, std::string clause) {
    return ParamValidation{false, std::move(at), std::move(clause)};
  };
  auto missing = [&](const std::optional<Coefficient>& c, const char* name) -> std::optional<ParamValidation> {
    if (!c) return fail(std::nullopt, std::string("missing coefficient ") + name);
    return std::nullopt;
  };

  switch (id) {
    case ClassId::nonexpansive:
    case ClassId::nonspreading:
    case ClassId::hybrid: return {};
    case ClassId::lambda_hybrid:
      if (!p.lambda) return fail(std::nullopt, "missing parameter lambda");
      if (!std::isfinite(*p.lambda)) return fail(std::nullopt, "lambda must be a real number");
      return {};
    case ClassId::alpha_nonexpansive:
      if (!p.alpha) return fail(std::nullopt, "missing parameter alpha");
      if (!(*p.alpha < 1.0)) return fail(std::nullopt, "alpha < 1");
      return {};
    case ClassId::ab_generalized_hybrid:
      if (!p.alpha) return fail(std::nullopt, "missing parameter alpha");
      if (!p.beta) return fail(std::nullopt, "missing parameter beta");
      return {};
    case ClassId::type1:
    case ClassId::type2: {
      for (auto [c, n] : {std::pair{&p.a1, "a1"}, {&p.a2, "a2"}, {&p.b1, "b1"}, {&p.b2, "b2"}}) {
        if (auto m = missing(*c, n)) return *m;
      }
      for (const Point& x : sample) {
        const double a1 = (*p.a1)(x), a2 = (*p.a2)(x), b1 = (*p.b1)(x), b2 = (*p.b2)(x);
        if (id == ClassId::type1) {
          if (a1 > 0.0 && a1 < 1.0) return fail(x, "a1 must lie in R \\ (0,1)");
          if (a2 > 0.0 && a2 < 1.0) return fail(x, "a2 must lie in R \\ (0,1)");
          if (b1 < 0.0 || b1 > 1.0) return fail(x, "b1 must lie in [0,1]");
          if (b2 < 0.0 || b2 > 1.0) return fail(x, "b2 must lie in [0,1]");
        }
        if (!(a1 + a2 >= 1.0)) return fail(x, "a1 + a2 >= 1");
        if (!(b1 + b2 <= 1.0)) return fail(x, "b1 + b2 <= 1");
      }
      return {};
    }
    case ClassId::lin_generalized_hybrid:
    case ClassId::generalized_type1:
    case ClassId::generalized_type2: {
      for (auto [c, n] : {std::pair{&p.a1, "a1"}, {&p.a2, "a2"}, {&p.a3, "a3"}, {&p.k1, "k1"}, {&p.k2, "k2"}}) {
        if (auto m = missing(*c, n)) return *m;
      }
      for (const Point& x : sample) {
        const double a1 = (*p.a1)(x), a2 = (*p.a2)(x), a3 = (*p.a3)(x), k1 = (*p.k1)(x), k2 = (*p.k2)(x);
        for (auto [v, n] : {std::pair{a1, "a1"}, {a2, "a2"}, {a3, "a3"}, {k1, "k1"}, {k2, "k2"}}) {
          if (v < 0.0 || v > 1.0) return fail(x, std::string(n) + " must lie in [0,1]");
        }
        if (!(a1 + a2 + a3 < 1.0)) return fail(x, "a1 + a2 + a3 < 1");
        if (!(2.0 * k1 < 1.0 - a2)) return fail(x, "2 k1 < 1 - a2");
        if (!(2.0 * k2 < 1.0 - a3)) return fail(x, "2 k2 < 1 - a3");
      }
      return {};
    }
  }
  return {};
}

/// Ordered pairs drawn from K with a seeded generator.
inline std::vector<PointPair> sample_pairs(const ConvexSet& K, std::size_t count, std::uint64_t seed,
                                           double fallback_radius = 1.0) {
  Rng rng(seed);
  std::vector<PointPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Point x = random_member(K, rng, fallback_radius);
    Point y = random_member(K, rng, fallback_radius);
    out.push_back({std::move(x), std::move(y)});
  }
  return out;
}

/// All ordered pairs (p_i, p_j), i != j, in lexicographic order.
inline std::vector<PointPair> grid_pairs(std::span<const Point> points) {
  std::vector<PointPair> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i != j) out.push_back({points[i], points[j]});
    }
  }
  return out;
}

}  // namespace hybridfp
