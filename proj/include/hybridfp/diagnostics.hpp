#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridfp/convex.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/iterate.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/rng.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp {

/// A finite tail x_start, x_{start+stride}, ... standing in for limsup
/// quantities. Owns a copy of the selected points.
class TailWindow {
 public:
  static constexpr std::size_t kMinLength = 10;

  TailWindow(std::vector<Point> points, std::string label = "custom") : points_(std::move(points)), label_(std::move(label)) {
    if (points_.size() < kMinLength) {
      throw InfeasibleConstraints("tail window needs at least " + std::to_string(kMinLength) + " points");
    }
  }

  static TailWindow from_trace(const IterationTrace& trace, std::size_t start, std::size_t stride = 1,
                               std::string label = "custom") {
    if (start >= trace.size()) throw InfeasibleConstraints("tail window starts past the end of the trace");
    if (stride == 0) throw InfeasibleConstraints("tail window stride must be positive");
    std::vector<Point> pts;
    for (std::size_t i = start; i < trace.size(); i += stride) pts.push_back(trace.iterates[i]);
    return TailWindow(std::move(pts), std::move(label));
  }

  /// Default tail start: the final 25% of the trace, at least 50 points
  /// (or the whole trace when it is shorter).
  static std::size_t default_start(std::size_t length) {
    const std::size_t len = std::max<std::size_t>(length / 4, 50);
    return length > len ? length - len : 0;
  }

  static TailWindow default_for(const IterationTrace& trace) {
    return from_trace(trace, default_start(trace.size()), 1, "full");
  }

  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const std::string& label() const { return label_; }

 private:
  std::vector<Point> points_;
  std::string label_;
};

/// The full default tail plus its even- and odd-index subsequences.
inline std::vector<TailWindow> default_windows(const IterationTrace& trace) {
  const std::size_t s = TailWindow::default_start(trace.size());
  return {TailWindow::from_trace(trace, s, 1, "full"), TailWindow::from_trace(trace, s + (s % 2), 2, "even"),
          TailWindow::from_trace(trace, s + 1 - (s % 2), 2, "odd")};
}

/// max over the window of d(x, x_n).
inline double asymptotic_radius(const ModelSpace& space, const TailWindow& w, const Point& x) {
  double r = 0.0;
  for (const Point& p : w.points()) r = std::max(r, distance(space, x, p));
  return r;
}

enum class CenterMethod { grid, geodesic_refine };

inline std::string_view to_string(CenterMethod m) { return m == CenterMethod::grid ? "grid" : "geodesic_refine"; }

struct CenterEstimate {
  Point point;
  double radius = 0.0;
  CenterMethod method = CenterMethod::grid;
  double certified_gap = 0.0;     ///< best unrefined candidate radius minus the returned radius
  bool budget_exhausted = false;  ///< refinement hit its iteration cap while still improving
};

struct CenterBudget {
  std::size_t random_starts = 32;
  std::size_t tail_starts = 64;
  std::size_t refine_iters = 200;
  std::uint64_t seed = 7;
};

namespace detail {

/// Golden-section minimization of f on [0, 1].
template <class F>
std::pair<double, double> golden_min(F&& f, int iters = 60) {
  constexpr double g = 0.6180339887498949;
  double a = 0.0, b = 1.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace detail

/// Approximate minimizer over K of the tail radius: seeded multi-start over
/// tail points and random members of K, then line searches along geodesics
/// toward the farthest tail points and midpoints of farthest pairs.
inline CenterEstimate asymptotic_center(const ModelSpace& space, const TailWindow& w, const ConvexSet& K,
                                        const CenterBudget& budget = {}) {
  auto radius = [&](const Point& x) { return asymptotic_radius(space, w, x); };
  const auto& pts = w.points();

  std::vector<Point> starts;
  const std::size_t step = std::max<std::size_t>(1, pts.size() / std::max<std::size_t>(1, budget.tail_starts));
  for (std::size_t i = pts.size(); i-- > 0;) {
    if ((pts.size() - 1 - i) % step == 0) starts.push_back(project(K, pts[i]));
  }
  Rng rng(budget.seed);
  const double spread = radius(pts.back());
  for (std::size_t i = 0; i < budget.random_starts; ++i) {
    if (K.is_whole()) {
      starts.push_back(random_point_in_ball(space, pts.back(), std::max(spread, 1e-12), rng));
    } else {
      starts.push_back(random_member(K, rng));
    }
  }

  CenterEstimate best;
  best.radius = std::numeric_limits<double>::infinity();
  for (const Point& s : starts) {
    const double r = radius(s);
    if (r < best.radius) {
      best.radius = r;
      best.point = s;
    }
  }
  const double unrefined = best.radius;

  Point c = best.point;
  double rc = best.radius;
  bool improving = true;
  std::size_t it = 0;
  for (; it < budget.refine_iters && improving && rc > 0.0; ++it) {
    // Farthest tail points from the current center.
    std::vector<std::pair<double, std::size_t>> far;
    far.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) far.emplace_back(distance(space, c, pts[i]), i);
    const std::size_t top = std::min<std::size_t>(3, far.size());
    std::partial_sort(far.begin(), far.begin() + top, far.end(), [](auto& a, auto& b) { return a.first > b.first; });

    std::vector<Point> targets;
    for (std::size_t i = 0; i < top; ++i) targets.push_back(pts[far[i].second]);
    for (std::size_t i = 0; i < top; ++i) {
      for (std::size_t j = i + 1; j < top; ++j) {
        if (distance(space, pts[far[i].second], pts[far[j].second]) > 0.0) {
          targets.push_back(geodesic_point(space, pts[far[i].second], pts[far[j].second], 0.5));
        }
      }
    }

    improving = false;
    for (const Point& q : targets) {
      if (distance(space, c, q) == 0.0) continue;
      auto f = [&](double t) { return radius(project(K, geodesic_point(space, c, q, t))); };
      const auto [t, ft] = detail::golden_min(f);
      if (ft < rc * (1.0 - 1e-15) && ft < rc - 1e-300) {
        c = project(K, geodesic_point(space, c, q, t));
        rc = ft;
        improving = true;
      }
    }
  }

  best.point = c;
  best.radius = rc;
  best.method = rc < unrefined ? CenterMethod::geodesic_refine : CenterMethod::grid;
  best.certified_gap = unrefined - rc;
  best.budget_exhausted = improving && it >= budget.refine_iters;
  return best;
}

struct DeltaLimitEstimate {
  CenterEstimate center;               ///< the full-tail (first window) center
  std::vector<CenterEstimate> window_centers;
  std::vector<std::string> window_labels;
  double agreement = 0.0;              ///< max pairwise distance between window centers
};

/// Centers of several tails of the same trace. A small agreement score is
/// numerical evidence of Delta-convergence, never a proof.
inline DeltaLimitEstimate delta_limit_estimate(const ModelSpace& space, const std::vector<TailWindow>& windows,
                                               const ConvexSet& K, const CenterBudget& budget = {}) {
  if (windows.size() < 2) throw InfeasibleConstraints("delta-limit estimate needs at least two windows");
  DeltaLimitEstimate out;
  for (const TailWindow& w : windows) {
    out.window_centers.push_back(asymptotic_center(space, w, K, budget));
    out.window_labels.push_back(w.label());
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t j = i + 1; j < windows.size(); ++j) {
      out.agreement = std::max(out.agreement,
                               distance(space, out.window_centers[i].point, out.window_centers[j].point));
    }
  }
  out.center = out.window_centers.front();
  return out;
}

/// d(center_i, full-tail center) for each window, stored as the trace's
/// center_agreement series.
inline void attach_center_agreement(IterationTrace& trace, const ModelSpace& space, const DeltaLimitEstimate& est) {
  std::vector<double> v;
  for (const CenterEstimate& c : est.window_centers) v.push_back(distance(space, c.point, est.center.point));
  trace.center_agreement = std::move(v);
}

/// x in Tx up to tol.
inline bool fixed_point_check(const MultivaluedMap& T, const Point& x, double tol) {
  return dist_point_set(x, T(x)) <= tol;
}

/// Tx = {x} up to tol in the Hausdorff metric.
inline bool endpoint_check(const MultivaluedMap& T, const Point& x, double tol) {
  return hausdorff(T(x), CompactSet::singleton(T.space(), x)) <= tol;
}

/// max_n d(x_{n+1}, p) - d(x_n, p); 0 for a single-point trace.
inline double fejer_check(const ModelSpace& space, const std::vector<Point>& xs, const Point& p) {
  if (xs.size() < 2) return 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  double prev = distance(space, xs.front(), p);
  for (std::size_t n = 1; n < xs.size(); ++n) {
    const double cur = distance(space, xs[n], p);
    worst = std::max(worst, cur - prev);
    prev = cur;
  }
  return worst;
}

inline double fejer_check(const ModelSpace& space, const IterationTrace& trace, const Point& p) {
  return fejer_check(space, trace.iterates, p);
}

/// max_{n >= from} d(x_n, x_from).
inline double tail_oscillation(const ModelSpace& space, const std::vector<Point>& xs, std::size_t from) {
  double r = 0.0;
  for (std::size_t n = from; n < xs.size(); ++n) r = std::max(r, distance(space, xs[n], xs[from]));
  return r;
}

struct ConditionIBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double min_residual = std::numeric_limits<double>::infinity();
  double envelope = 0.0;  ///< running minimum from this bin upward; the gauge f on [lo, hi)
};

struct ConditionIReport {
  bool pass = true;
  std::vector<ConditionIBin> bins;
  std::size_t excluded = 0;  ///< samples with d(x, F) below 1e-12
  std::optional<std::size_t> failing_bin;
};

/// Samples are binned by d(x, F) over [0, max]; the check passes iff every
/// nonempty bin has a strictly positive minimum of d(x, Tx). The gauge
/// f(r) = min over bins at or above r is nondecreasing by construction.
inline ConditionIReport condition_I_check(const MultivaluedMap& T, std::span<const Point> sample, const CompactSet& F,
                                          std::size_t bins) {
  if (bins == 0) throw InfeasibleConstraints("condition (I) needs at least one bin");
  ConditionIReport rep;
  std::vector<std::pair<double, double>> data;  // (d(x,F), d(x,Tx))
  double dmax = 0.0;
  for (const Point& x : sample) {
    const double dF = dist_point_set(x, F);
    if (dF < 1e-12) {
      ++rep.excluded;
      continue;
    }
    data.emplace_back(dF, dist_point_set(x, T(x)));
    dmax = std::max(dmax, dF);
  }
  rep.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    rep.bins[b].lo = dmax * static_cast<double>(b) / static_cast<double>(bins);
    rep.bins[b].hi = dmax * static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (const auto& [dF, res] : data) {
    std::size_t b = static_cast<std::size_t>(dF / dmax * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    ++rep.bins[b].count;
    rep.bins[b].min_residual = std::min(rep.bins[b].min_residual, res);
  }
  double env = std::numeric_limits<double>::infinity();
  for (std::size_t b = bins; b-- > 0;) {
    ConditionIBin& bin = rep.bins[b];
    if (bin.count > 0) {
      env = std::min(env, bin.min_residual);
      if (!(bin.min_residual > 0.0)) {
        rep.pass = false;
        rep.failing_bin = b;
      }
    }
    bin.envelope = std::isfinite(env) ? env : 0.0;
  }
  return rep;
}

}  // namespace hybridfp
