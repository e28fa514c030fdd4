#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridfp/convex.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/rng.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp {

enum class SchemeId {
  picard,
  mann,
  ishikawa,
  agarwal_s,
  thianwan,
  noor,
  sp,
  cr,
  picard_s,
  mv_thianwan,
  mv_picard_s,
};

inline constexpr SchemeId kAllSchemes[] = {
    SchemeId::picard, SchemeId::mann, SchemeId::ishikawa, SchemeId::agarwal_s,   SchemeId::thianwan,   SchemeId::noor,
    SchemeId::sp,     SchemeId::cr,   SchemeId::picard_s, SchemeId::mv_thianwan, SchemeId::mv_picard_s,
};

inline std::string_view to_string(SchemeId id) {
  switch (id) {
    case SchemeId::picard: return "picard";
    case SchemeId::mann: return "mann";
    case SchemeId::ishikawa: return "ishikawa";
    case SchemeId::agarwal_s: return "agarwal_s";
    case SchemeId::thianwan: return "thianwan";
    case SchemeId::noor: return "noor";
    case SchemeId::sp: return "sp";
    case SchemeId::cr: return "cr";
    case SchemeId::picard_s: return "picard_s";
    case SchemeId::mv_thianwan: return "mv_thianwan";
    case SchemeId::mv_picard_s: return "mv_picard_s";
  }
  return "?";
}

inline SchemeId parse_scheme(std::string_view s) {
  for (SchemeId id : kAllSchemes) {
    if (to_string(id) == s) return id;
  }
  throw SchemeUnknown("unknown scheme '" + std::string(s) + "'");
}

inline bool is_multivalued(SchemeId id) { return id == SchemeId::mv_thianwan || id == SchemeId::mv_picard_s; }

/// A deterministic sequence n -> [0, 1].
class Sequence {
 public:
  enum class Kind { constant, harmonic, affine_clamped, table };

  static Sequence constant(double c) {
    check_unit(c, "constant sequence value");
    return Sequence(Kind::constant, {c});
  }
  /// 1 / (n + 2).
  static Sequence harmonic() { return Sequence(Kind::harmonic, {}); }
  /// clamp(offset + slope * n, 0, 1).
  static Sequence affine_clamped(double offset, double slope) {
    if (!std::isfinite(offset) || !std::isfinite(slope)) throw InfeasibleConstraints("affine sequence needs finite coefficients");
    return Sequence(Kind::affine_clamped, {offset, slope});
  }
  /// values[n]; the last entry repeats once the table runs out.
  static Sequence table(std::vector<double> values) {
    if (values.empty()) throw InfeasibleConstraints("sequence table must be nonempty");
    for (double v : values) check_unit(v, "sequence table entry");
    return Sequence(Kind::table, std::move(values));
  }

  double operator()(std::size_t n) const {
    switch (kind_) {
      case Kind::constant: return data_[0];
      case Kind::harmonic: return 1.0 / (static_cast<double>(n) + 2.0);
      case Kind::affine_clamped: return std::clamp(data_[0] + data_[1] * static_cast<double>(n), 0.0, 1.0);
      case Kind::table: return data_[std::min(n, data_.size() - 1)];
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }

  std::string describe() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    switch (kind_) {
      case Kind::constant: return "constant(" + num(data_[0]) + ")";
      case Kind::harmonic: return "harmonic";
      case Kind::affine_clamped: return "affine_clamped(" + num(data_[0]) + "," + num(data_[1]) + ")";
      case Kind::table: return "table[" + std::to_string(data_.size()) + "]";
    }
    return "?";
  }

 private:
  Sequence(Kind kind, std::vector<double> data) : kind_(kind), data_(std::move(data)) {}

  static void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw InfeasibleConstraints(std::string(what) + " must lie in [0,1]");
  }

  Kind kind_;
  std::vector<double> data_;
};

struct StepSequences {
  Sequence alpha = Sequence::constant(0.5);
  Sequence beta = Sequence::constant(0.5);
  Sequence gamma = Sequence::constant(0.5);
};

struct StopRule {
  std::size_t max_iters = 100000;
  double residual_tol = 1e-8;  ///< on d(x_n, T x_n)
  double stall_tol = 1e-12;    ///< on d(x_{n+1}, x_n)

  void validate() const {
    if (max_iters < 1) throw InfeasibleConstraints("max_iters must be at least 1");
    if (!(residual_tol > 0.0) || !(stall_tol > 0.0)) throw InfeasibleConstraints("stop tolerances must be positive");
  }
};

enum class StopReason { residual, stall, max_iters };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::residual: return "residual";
    case StopReason::stall: return "stall";
    case StopReason::max_iters: return "max_iters";
  }
  return "?";
}

enum class SelectionRule { nearest, random };

struct Selection {
  SelectionRule rule = SelectionRule::nearest;
  std::uint64_t seed = 0;  ///< used by the random rule only
};

/// Everything a run produced. iterates[n] is x_n and residuals[n] is
/// d(x_n, T x_n); aux series are indexed by step, so aux["y"][n] is y_n
/// and has one entry fewer than iterates.
struct IterationTrace {
  std::string scheme_id;
  std::vector<Point> iterates;
  std::vector<double> residuals;
  std::map<std::string, std::vector<Point>> aux;
  StopReason stop_reason = StopReason::max_iters;
  bool projected = false;  ///< single-valued run wrapped as P_K o T
  std::optional<std::vector<double>> dist_to_p;
  std::optional<std::vector<double>> center_agreement;

  std::size_t size() const { return iterates.size(); }
  const Point& last() const { return iterates.back(); }
  double final_residual() const { return residuals.back(); }
};

/// Fills trace.dist_to_p with d(x_n, p).
inline void attach_distance_to(IterationTrace& trace, const ModelSpace& space, const Point& p) {
  std::vector<double> d;
  d.reserve(trace.size());
  for (const Point& x : trace.iterates) d.push_back(distance(space, x, p));
  trace.dist_to_p = std::move(d);
}

namespace detail {

/// Records x_{n+1} and decides whether to stop. Returns true to stop.
inline bool advance(const ModelSpace& space, IterationTrace& tr, Point next, double next_residual,
                    const StopRule& stop, std::size_t steps_done) {
  const double moved = distance(space, tr.iterates.back(), next);
  tr.iterates.push_back(std::move(next));
  tr.residuals.push_back(next_residual);
  if (next_residual <= stop.residual_tol) {
    tr.stop_reason = StopReason::residual;
    return true;
  }
  if (moved <= stop.stall_tol) {
    tr.stop_reason = StopReason::stall;
    return true;
  }
  if (steps_done >= stop.max_iters) {
    tr.stop_reason = StopReason::max_iters;
    return true;
  }
  return false;
}

/// Runs body(n) and rethrows library errors with the step index attached.
template <class Body>
auto at_step(std::size_t n, Body&& body) {
  const std::string where = "step " + std::to_string(n) + ": ";
  try {
    return body();
  } catch (const ProjectionDidNotConverge& e) {
    throw ProjectionDidNotConverge(where + e.what());
  } catch (const AntipodalPoints& e) {
    throw AntipodalPoints(where + e.what());
  } catch (const EmbeddingViolation& e) {
    throw EmbeddingViolation(where + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(where + e.what());
  }
}

class Selector {
 public:
  explicit Selector(Selection s) : sel_(s), rng_(s.seed) {}

  const Point& pick(const Point& base, const CompactSet& A) {
    if (sel_.rule == SelectionRule::nearest || A.size() == 1) return nearest_selection(base, A);
    return A[rng_.index(A.size())];
  }

 private:
  Selection sel_;
  Rng rng_;
};

}  // namespace detail

/// One of the nine single-valued schemes with (1-t)p + tq read as the point
/// at fraction t along the geodesic from p to q. When `wrap` is given the
/// map is replaced by P_K o T.
inline IterationTrace run_single_valued(const ModelSpace& space, SchemeId scheme, const SingleValuedMap& map,
                                        const Point& x0, const StepSequences& seqs, const StopRule& stop,
                                        const ConvexSet* wrap = nullptr) {
  if (is_multivalued(scheme)) {
    throw SchemeUnknown("scheme '" + std::string(to_string(scheme)) + "' needs a multivalued map");
  }
  stop.validate();
  space.require(x0);
  SingleValuedMap T = [&space, &map](const Point& x) {
    Point y = map(x);
    space.require(y);
    return y;
  };
  if (wrap) T = [&map, wrap](const Point& x) { return project(*wrap, map(x)); };

  IterationTrace tr;
  tr.scheme_id = std::string(to_string(scheme));
  tr.projected = wrap != nullptr;
  auto G = [&](const Point& p, const Point& q, double t) { return geodesic_point(space, p, q, t); };
  auto record = [&](const char* key, const Point& p) { tr.aux[key].push_back(p); };

  Point tx = detail::at_step(0, [&] { return T(x0); });
  tr.iterates.push_back(x0);
  tr.residuals.push_back(distance(space, x0, tx));
  if (tr.residuals.back() <= stop.residual_tol) {
    tr.stop_reason = StopReason::residual;
    return tr;
  }

  for (std::size_t n = 0;; ++n) {
    const Point x = tr.iterates.back();
    const double a = seqs.alpha(n), b = seqs.beta(n), g = seqs.gamma(n);
    Point next = detail::at_step(n, [&]() -> Point {
      switch (scheme) {
        case SchemeId::picard: return tx;
        case SchemeId::mann: return G(x, tx, a);
        case SchemeId::ishikawa: {
          const Point y = G(x, tx, b);
          record("y", y);
          return G(x, T(y), a);
        }
        case SchemeId::agarwal_s: {
          const Point y = G(x, tx, b);
          record("y", y);
          return G(tx, T(y), a);
        }
        case SchemeId::thianwan: {
          const Point y = G(x, tx, b);
          record("y", y);
          return G(y, T(y), a);
        }
        case SchemeId::noor: {
          const Point z = G(x, tx, g);
          const Point y = G(x, T(z), b);
          record("z", z);
          record("y", y);
          return G(x, T(y), a);
        }
        case SchemeId::sp: {
          const Point z = G(x, tx, g);
          const Point y = G(z, T(z), b);
          record("z", z);
          record("y", y);
          return G(y, T(y), a);
        }
        case SchemeId::cr: {
          const Point z = G(x, tx, g);
          const Point y = G(tx, T(z), b);
          record("z", z);
          record("y", y);
          return G(y, T(y), a);
        }
        case SchemeId::picard_s: {
          const Point z = G(x, tx, b);
          const Point y = G(tx, T(z), a);
          record("z", z);
          record("y", y);
          return T(y);
        }
        default: throw SchemeUnknown("unreachable scheme");
      }
    });
    tx = detail::at_step(n + 1, [&] { return T(next); });
    const double r = distance(space, next, tx);
    if (detail::advance(space, tr, std::move(next), r, stop, n + 1)) return tr;
  }
}

/// Projected multivalued Thianwan scheme:
///   v_n in T x_n, y_n = P_K((1-b) x_n + b v_n),
///   u_n in T y_n, x_{n+1} = P_K((1-a) y_n + a u_n).
inline IterationTrace run_multivalued_thianwan(const MultivaluedMap& T, const ConvexSet& K, const Point& x0,
                                               const StepSequences& seqs, const StopRule& stop,
                                               Selection selection = {}) {
  stop.validate();
  const ModelSpace& space = K.space();
  if (!contains(K, x0, 1e-9)) throw GeometryError("starting point lies outside the domain");
  detail::Selector pick(selection);
  IterationTrace tr;
  tr.scheme_id = "mv_thianwan";

  CompactSet tx = detail::at_step(0, [&] { return T(x0); });
  tr.iterates.push_back(x0);
  tr.residuals.push_back(dist_point_set(x0, tx));
  if (tr.residuals.back() <= stop.residual_tol) {
    tr.stop_reason = StopReason::residual;
    return tr;
  }
  for (std::size_t n = 0;; ++n) {
    const Point x = tr.iterates.back();
    const double a = seqs.alpha(n), b = seqs.beta(n);
    Point next = detail::at_step(n, [&]() -> Point {
      const Point v = pick.pick(x, tx);
      const Point y = project(K, geodesic_point(space, x, v, b));
      const Point u = pick.pick(y, T(y));
      tr.aux["v"].push_back(v);
      tr.aux["y"].push_back(y);
      tr.aux["u"].push_back(u);
      return project(K, geodesic_point(space, y, u, a));
    });
    tx = detail::at_step(n + 1, [&] { return T(next); });
    const double r = dist_point_set(next, tx);
    if (detail::advance(space, tr, std::move(next), r, stop, n + 1)) return tr;
  }
}

/// Projected multivalued Picard-S scheme:
///   w_n in T x_n, z_n = P_K((1-b) x_n + b w_n),
///   v_n in T z_n, y_n = P_K((1-a) w_n + a v_n),
///   u_n in T y_n, x_{n+1} = P_K(u_n).
inline IterationTrace run_multivalued_picard_s(const MultivaluedMap& T, const ConvexSet& K, const Point& x0,
                                               const StepSequences& seqs, const StopRule& stop,
                                               Selection selection = {}) {
  stop.validate();
  const ModelSpace& space = K.space();
  if (!contains(K, x0, 1e-9)) throw GeometryError("starting point lies outside the domain");
  detail::Selector pick(selection);
  IterationTrace tr;
  tr.scheme_id = "mv_picard_s";

  CompactSet tx = detail::at_step(0, [&] { return T(x0); });
  tr.iterates.push_back(x0);
  tr.residuals.push_back(dist_point_set(x0, tx));
  if (tr.residuals.back() <= stop.residual_tol) {
    tr.stop_reason = StopReason::residual;
    return tr;
  }
  for (std::size_t n = 0;; ++n) {
    const Point x = tr.iterates.back();
    const double a = seqs.alpha(n), b = seqs.beta(n);
    Point next = detail::at_step(n, [&]() -> Point {
      const Point w = pick.pick(x, tx);
      const Point z = project(K, geodesic_point(space, x, w, b));
      const Point v = pick.pick(z, T(z));
      const Point y = project(K, geodesic_point(space, w, v, a));
      const Point u = pick.pick(y, T(y));
      tr.aux["w"].push_back(w);
      tr.aux["z"].push_back(z);
      tr.aux["v"].push_back(v);
      tr.aux["y"].push_back(y);
      tr.aux["u"].push_back(u);
      return project(K, u);
    });
    tx = detail::at_step(n + 1, [&] { return T(next); });
    const double r = dist_point_set(next, tx);
    if (detail::advance(space, tr, std::move(next), r, stop, n + 1)) return tr;
  }
}

/// Raised when the nearest-point Picard search runs out of budget; carries
/// what was computed so far.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& msg, IterationTrace trace, double k_hat)
      : Error(msg), trace_(std::move(trace)), k_hat_(k_hat) {}
  const IterationTrace& trace() const { return trace_; }
  double k_hat() const { return k_hat_; }

 private:
  IterationTrace trace_;
  double k_hat_;
};

struct SearchResult {
  Point point;
  IterationTrace trace;
  double k_hat;  ///< max_n d(x_{n+1},x_n) / d(x_n,x_{n-1}); 0 when no ratio exists
};

/// Largest successive step ratio along the iterates, skipping zero denominators.
inline double empirical_contraction(const ModelSpace& space, const std::vector<Point>& xs) {
  double k = 0.0;
  for (std::size_t n = 1; n + 1 < xs.size(); ++n) {
    const double prev = distance(space, xs[n], xs[n - 1]);
    if (prev == 0.0) continue;
    k = std::max(k, distance(space, xs[n + 1], xs[n]) / prev);
  }
  return k;
}

/// x_{n+1} = member of T x_n nearest to x_n, so d(x_{n+1}, x_n) = d(x_n, T x_n).
inline SearchResult picard_nearest_search(const MultivaluedMap& T, const Point& x0, const StopRule& stop) {
  stop.validate();
  const ModelSpace& space = T.space();
  space.require(x0);
  IterationTrace tr;
  tr.scheme_id = "picard_nearest";
  CompactSet tx = detail::at_step(0, [&] { return T(x0); });
  tr.iterates.push_back(x0);
  tr.residuals.push_back(dist_point_set(x0, tx));
  bool done = tr.residuals.back() <= stop.residual_tol;
  if (done) tr.stop_reason = StopReason::residual;
  for (std::size_t n = 0; !done; ++n) {
    Point next = nearest_selection(tr.iterates.back(), tx);
    tx = detail::at_step(n + 1, [&] { return T(next); });
    const double r = dist_point_set(next, tx);
    done = detail::advance(space, tr, std::move(next), r, stop, n + 1);
  }
  const double k_hat = empirical_contraction(space, tr.iterates);
  if (tr.stop_reason != StopReason::residual) {
    throw NotConverged("nearest-point Picard search stopped by " + std::string(to_string(tr.stop_reason)) +
                           " with residual above tolerance",
                       std::move(tr), k_hat);
  }
  Point p = tr.iterates.back();
  return {std::move(p), std::move(tr), k_hat};
}

struct StepCondition {
  bool ok;
  double min_value;
};

/// Finite-horizon surrogate for liminf a_n [(1 - a_n) R/2 - ratio] > 0.
/// m1 is the minimum over [horizon/2, horizon), m2 the minimum over
/// [5 horizon, 10 horizon). Passes iff m2 > 1e-9 and m2 >= m1 / 2, so a
/// bracket that keeps shrinking (e.g. a_n -> 0) fails. Horizons below 100
/// are raised to 100.
inline StepCondition check_step_condition(const Sequence& alpha, double R, double ratio,
                                          std::size_t horizon = 10000) {
  horizon = std::max<std::size_t>(horizon, 100);
  auto min_over = [&](std::size_t lo, std::size_t hi) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t n = lo; n < hi; ++n) {
      const double a = alpha(n);
      m = std::min(m, a * ((1.0 - a) * R / 2.0 - ratio));
    }
    return m;
  };
  const double m1 = min_over(horizon / 2, horizon);
  const double m2 = min_over(5 * horizon, 10 * horizon);
  return {m2 > 1e-9 && m2 >= 0.5 * m1, std::min(m1, m2)};
}

}  // namespace hybridfp
