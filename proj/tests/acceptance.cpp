// Acceptance gate: one pass/fail line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hybridfp/builtin_maps.hpp"
#include "hybridfp/experiment.hpp"
#include "hybridfp/hybridfp.hpp"
#include "hybridfp/invariants.hpp"

using namespace hybridfp;
namespace ex = hybridfp::experiment;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Result {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) { return ex::num(v); }

std::string config_path(const char* name) { return std::string(HYBRIDFP_SOURCE_DIR) + "/configs/" + name; }

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double v : xs) p(i++) = v;
  return p;
}

Result from_suite(const invariants::SuiteResult& r) {
  Result out;
  out.pass = r.pass;
  out.detail = "instances=" + std::to_string(r.instances) + " failures=" + std::to_string(r.failures) +
               " worst_slack=" + fmt(r.worst);
  if (!r.pass) out.detail += " first_failure=\"" + r.detail + "\"";
  return out;
}

// 1
Result geometry() { return from_suite(invariants::geometry_suite(kSeed, 10000)); }

// 2. The suite uses the stated diameter bound. The worst slack under the
// tighter bound pi/2 - eps is printed alongside for reference only.
Result comparison() {
  Result r = from_suite(invariants::comparison_suite(kSeed, 100000));
  double worst_tight = std::numeric_limits<double>::infinity();
  Rng rng(kSeed + 77);
  for (double eps : {std::numbers::pi / 6, std::numbers::pi / 4, std::numbers::pi / 3}) {
    const double R = r_constant(eps).R;
    for (double kappa : {1.0, 4.0}) {
      const ModelSpace space(kappa, 3);
      const double rho = 0.5 * (std::numbers::pi / 2 - eps) / std::sqrt(kappa);
      for (int i = 0; i < 20000; ++i) {
        const Point c = random_point_in_ball(space, space.origin(), 1.0, rng);
        const Point x = random_point_in_ball(space, c, rho, rng);
        const Point y = random_point_in_ball(space, c, rho, rng);
        const Point z = random_point_in_ball(space, c, rho, rng);
        worst_tight = std::min(worst_tight, check_convexity_inequality(space, x, y, z, rng.uniform(), R));
      }
    }
  }
  r.detail += " | reference: worst slack with diameter (pi/2-eps)/sqrt(kappa) = " + fmt(worst_tight);
  return r;
}

// 3
Result projection() { return from_suite(invariants::projection_suite(kSeed, 10000, 1000)); }

// 4
double brute_hausdorff(const ModelSpace& space, const std::vector<Point>& A, const std::vector<Point>& B) {
  double ab = 0.0, ba = 0.0;
  for (const Point& a : A) {
    double m = std::numeric_limits<double>::infinity();
    for (const Point& b : B) m = std::min(m, distance(space, a, b));
    ab = std::max(ab, m);
  }
  for (const Point& b : B) {
    double m = std::numeric_limits<double>::infinity();
    for (const Point& a : A) m = std::min(m, distance(space, a, b));
    ba = std::max(ba, m);
  }
  return std::max(ab, ba);
}

Result hausdorff_oracle() {
  Result r;
  std::size_t mismatches = 0, axiom_failures = 0, pairs = 0;
  double worst_axiom = 0.0;
  for (double kappa : {0.0, 1.0, -1.0}) {
    const ModelSpace space(kappa, 3);
    Rng rng(kSeed + 400 + static_cast<std::uint64_t>(kappa + 2));
    auto draw = [&] {
      const std::size_t n = 1 + rng.index(20);
      std::vector<Point> pts;
      for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point_in_ball(space, space.origin(), 1.0, rng));
      return pts;
    };
    for (int i = 0; i < 1000; ++i, ++pairs) {
      const std::vector<Point> a = draw(), b = draw(), c = draw();
      const CompactSet A(space, a), B(space, b), C(space, c);
      const double h = hausdorff(A, B);
      if (h != brute_hausdorff(space, a, b)) ++mismatches;
      const double self = hausdorff(A, A);
      const double sym = std::abs(h - hausdorff(B, A));
      const double tri = h - (hausdorff(A, C) + hausdorff(C, B));
      const double bad = std::max({self, sym, tri, -h});
      worst_axiom = std::max(worst_axiom, bad);
      if (bad > 1e-12) ++axiom_failures;
    }
  }
  r.pass = mismatches == 0 && axiom_failures == 0;
  r.detail = "pairs=" + std::to_string(pairs) + " oracle_mismatches=" + std::to_string(mismatches) +
             " axiom_failures=" + std::to_string(axiom_failures) + " worst_axiom_defect=" + fmt(worst_axiom);
  return r;
}

// 5. Scalar oracle over the grid {-1,-.5,0,.5,1}, ordered pairs i != j.
struct Calib {
  std::string label;
  ClassId id;
  std::function<double(double)> f;
  HybridParams params;
  bool expect_violated;
};

struct OracleVerdict {
  bool violated = false;
  double wx = 0, wy = 0;
};

OracleVerdict scalar_oracle(const Calib& c, const std::vector<double>& grid) {
  OracleVerdict v;
  double worst = std::numeric_limits<double>::infinity();
  auto coef = [&](const std::optional<Coefficient>& k) { return k ? (*k)(pt({0.0})) : 0.0; };
  const double a1 = coef(c.params.a1), a2 = coef(c.params.a2), a3 = coef(c.params.a3);
  const double b1 = coef(c.params.b1), b2 = coef(c.params.b2), k1 = coef(c.params.k1), k2 = coef(c.params.k2);
  for (double x : grid) {
    for (double y : grid) {
      if (x == y) continue;
      const double u = c.f(x), w = c.f(y);
      const double dxy = std::abs(x - y), duw = std::abs(u - w), duy = std::abs(u - y), dxw = std::abs(x - w);
      const double dux = std::abs(u - x), dwy = std::abs(w - y);
      double rhs = 0, lhs = 0;
      switch (c.id) {
        case ClassId::nonexpansive: rhs = dxy; lhs = duw; break;
        case ClassId::type1:
        case ClassId::type2:
          rhs = b1 * dxw * dxw + b2 * dxy * dxy;
          lhs = a1 * duw * duw + a2 * duy * duy;
          break;
        case ClassId::generalized_type1:
        case ClassId::generalized_type2:
          rhs = a1 * dxy * dxy + a2 * duy * duy + a3 * dxw * dxw + k1 * dux * dux + k2 * dwy * dwy;
          lhs = duw * duw;
          break;
        default: break;
      }
      const double s = rhs - lhs;
      if (s < -kDefaultSlackTol * (1 + std::abs(rhs)) && s < worst) {
        worst = s;
        v = {true, x, y};
      }
    }
  }
  return v;
}

Result calibration() {
  const ModelSpace line(0.0, 1);
  const ConvexSet R = ConvexSet::whole(line);
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<Point> gp;
  for (double g : grid) gp.push_back(pt({g}));
  const std::vector<PointPair> pairs = grid_pairs(gp);

  auto half = [](double x) { return 0.5 * x; };
  auto cst = [](double) { return 0.3; };
  auto id = [](double x) { return x; };
  auto twice = [](double x) { return 2.0 * x; };
  HybridParams none;
  HybridParams t;
  t.a1 = 1.0; t.a2 = 0.0; t.b1 = 0.0; t.b2 = 1.0;
  HybridParams g;
  g.a1 = 0.5; g.a2 = 0.0; g.a3 = 0.0; g.k1 = 0.0; g.k2 = 0.0;
  HybridParams g9 = g;
  g9.a1 = 0.9;

  const std::vector<Calib> table{
      {"nonexpansive/contraction", ClassId::nonexpansive, half, none, false},
      {"nonexpansive/constant", ClassId::nonexpansive, cst, none, false},
      {"nonexpansive/identity", ClassId::nonexpansive, id, none, false},
      {"nonexpansive/expansion", ClassId::nonexpansive, twice, none, true},
      {"type1/contraction", ClassId::type1, half, t, false},
      {"type1/constant", ClassId::type1, cst, t, false},
      {"type1/expansion", ClassId::type1, twice, t, true},
      {"generalized_type1/contraction", ClassId::generalized_type1, half, g, false},
      {"generalized_type1/identity", ClassId::generalized_type1, id, g9, true},
      {"type2/expansion", ClassId::type2, twice, t, true},
      {"generalized_type2/contraction", ClassId::generalized_type2, half, g, false},
      {"generalized_type2/expansion", ClassId::generalized_type2, twice, g, true},
  };

  Result r;
  std::size_t agree = 0;
  for (const Calib& c : table) {
    const SingleValuedMap f = [fn = c.f](const Point& x) { return pt({fn(x(0))}); };
    const MultivaluedMap T = MultivaluedMap::from_single(R, f, c.label);
    ClassReport rep;
    switch (c.id) {
      case ClassId::nonexpansive: rep = check_classical(line, f, c.id, c.params, pairs); break;
      case ClassId::type1: rep = check_type1(T, c.params, pairs); break;
      case ClassId::generalized_type1: rep = check_generalized_type1(T, c.params, pairs); break;
      case ClassId::type2: rep = check_type2(T, c.params, pairs); break;
      case ClassId::generalized_type2: rep = check_generalized_type2(T, c.params, pairs); break;
      default: break;
    }
    const OracleVerdict o = scalar_oracle(c, grid);
    const bool violated = rep.verdict == Verdict::violated;
    bool ok = violated == c.expect_violated && o.violated == c.expect_violated;
    if (ok && violated) {
      ok = rep.witness && rep.witness->x(0) == o.wx && rep.witness->y(0) == o.wy;
    }
    if (ok) {
      ++agree;
    } else {
      r.pass = false;
      r.detail += " mismatch:" + c.label;
    }
  }
  r.detail = "triples=" + std::to_string(table.size()) + " matching=" + std::to_string(agree) + r.detail;
  return r;
}

// 6
Result delta_convergence() {
  Result r;
  const ex::Config cfg = ex::load_config(config_path("sphere_cap_delta.json"));
  const ex::Outcome o = ex::run_experiment(cfg, false);
  const maps::Instance inst = maps::sphere_cap_example();
  const IterationTrace& tr = *o.trace;

  const bool step_ok = o.summary.get("step_condition.status") == "pass";
  const bool hyp_ok = o.summary.get("hypotheses") == "pass";
  const double fejer = fejer_check(inst.space, tr, inst.fixed_point);
  const double residual = tr.final_residual();
  const DeltaLimitEstimate est = delta_limit_estimate(inst.space, default_windows(tr), inst.domain, CenterBudget{});
  const bool center_fixed = fixed_point_check(inst.map, est.center.point, 1e-6);

  r.pass = hyp_ok && step_ok && fejer <= 1e-9 && residual < 1e-6 && tr.size() <= 10001 && center_fixed &&
           est.agreement < 1e-5;
  r.detail = "iterations=" + std::to_string(tr.size() - 1) + " step_condition=" + (step_ok ? "pass" : "fail") +
             " fejer_max_violation=" + fmt(fejer) + " final_residual=" + fmt(residual) +
             " center_fixed=" + (center_fixed ? "true" : "false") + " agreement=" + fmt(est.agreement);
  return r;
}

// 7
Result strong_convergence() {
  Result r;
  const ex::Config cfg = ex::load_config(config_path("strong_convergence.json"));
  const ex::Outcome o = ex::run_experiment(cfg, false);
  const ex::BuiltMap bm = ex::build_map(cfg);
  const ModelSpace& space = cfg.sp();
  const Point p = *cfg.fixed_point;
  const IterationTrace& tr = *o.trace;

  const double osc = tail_oscillation(space, tr.iterates, tr.size() / 2);
  const bool fixed = fixed_point_check(bm.multi, tr.last(), 1e-6);
  double chain = -std::numeric_limits<double>::infinity();
  const auto& ys = tr.aux.at("y");
  const auto& zs = tr.aux.at("z");
  for (std::size_t n = 0; n + 1 < tr.size(); ++n) {
    const double dx1 = distance(space, tr.iterates[n + 1], p), dy = distance(space, ys[n], p);
    const double dz = distance(space, zs[n], p), dx = distance(space, tr.iterates[n], p);
    chain = std::max({chain, dx1 - dy, dy - dz, dz - dx});
  }
  const bool type2_ok = o.summary.get("class.type2.status") == "pass";
  r.pass = type2_ok && osc < 1e-6 && fixed && chain <= 1e-9;
  r.detail = "iterations=" + std::to_string(tr.size() - 1) + " type2_on_sample=" + (type2_ok ? "pass" : "fail") +
             " tail_oscillation=" + fmt(osc) + " terminal_fixed=" + (fixed ? "true" : "false") +
             " chain_max_violation=" + fmt(chain);
  return r;
}

// 8
Result existence() {
  Result r;
  const ModelSpace space(1.0, 2);
  const ConvexSet K = ConvexSet::ball(space, space.origin(), 0.5);
  const Point p = space.from_tangent_coords(pt({0.2, 0.0}));
  const MultivaluedMap T = maps::two_point(K, p, 0.6, 0.8);
  HybridParams hp;
  hp.a1 = 0.25; hp.a2 = 0.0; hp.a3 = 0.0; hp.k1 = 0.0; hp.k2 = 0.0;
  const double k = (0.25 + 0.0) / (1.0 - 0.0);
  const ClassReport cls = check_generalized_type2(T, hp, sample_pairs(K, 2000, kSeed));

  StopRule stop;
  stop.max_iters = 1000;
  stop.residual_tol = 1e-10;
  stop.stall_tol = 1e-15;
  const SearchResult s = picard_nearest_search(T, space.from_tangent_coords(pt({-0.4, 0.2})), stop);
  const bool endpoint = endpoint_check(T, s.point, 1e-8);
  r.pass = cls.verdict == Verdict::satisfied_on_sample && k == 0.25 && s.k_hat >= 0.2 && s.k_hat <= 0.55 && endpoint;
  r.detail = "k=" + fmt(k) + " sqrt_k=" + fmt(std::sqrt(k)) + " k_hat=" + fmt(s.k_hat) +
             " iterations=" + std::to_string(s.trace.size() - 1) + " endpoint=" + (endpoint ? "true" : "false");
  return r;
}

// 9. Scalar recursions on R with T x = 0.9 x + 0.05.
struct ScalarFamily {
  std::string label;
  std::function<double(std::size_t)> a, b, g;
  StepSequences seqs;
};

std::vector<double> scalar_scheme(const std::string& id, const ScalarFamily& f, double x0, std::size_t steps) {
  auto T = [](double x) { return 0.9 * x + 0.05; };
  auto L = [](double p, double q, double t) { return (1 - t) * p + t * q; };
  std::vector<double> xs{x0};
  for (std::size_t n = 0; n < steps; ++n) {
    const double x = xs.back(), a = f.a(n), b = f.b(n), g = f.g(n);
    double next = 0;
    if (id == "picard") {
      next = T(x);
    } else if (id == "mann") {
      next = L(x, T(x), a);
    } else if (id == "ishikawa") {
      next = L(x, T(L(x, T(x), b)), a);
    } else if (id == "agarwal_s") {
      next = L(T(x), T(L(x, T(x), b)), a);
    } else if (id == "thianwan" || id == "mv_thianwan") {
      const double y = L(x, T(x), b);
      next = L(y, T(y), a);
    } else if (id == "noor") {
      const double z = L(x, T(x), g);
      const double y = L(x, T(z), b);
      next = L(x, T(y), a);
    } else if (id == "sp") {
      const double z = L(x, T(x), g);
      const double y = L(z, T(z), b);
      next = L(y, T(y), a);
    } else if (id == "cr") {
      const double z = L(x, T(x), g);
      const double y = L(T(x), T(z), b);
      next = L(y, T(y), a);
    } else if (id == "picard_s" || id == "mv_picard_s") {
      const double z = L(x, T(x), b);
      next = T(L(T(x), T(z), a));
    }
    xs.push_back(next);
  }
  return xs;
}

Result scheme_fidelity() {
  const ModelSpace line(0.0, 1);
  const ConvexSet R = ConvexSet::whole(line);
  const SingleValuedMap T = [](const Point& x) { return pt({0.9 * x(0) + 0.05}); };
  const MultivaluedMap MT = MultivaluedMap::from_single(R, T, "affine");

  const std::vector<double> beta_table{0.9, 0.6, 0.4, 0.2};
  std::vector<ScalarFamily> fams;
  fams.push_back({"constant", [](std::size_t) { return 0.5; }, [](std::size_t) { return 0.5; },
                  [](std::size_t) { return 0.5; },
                  {Sequence::constant(0.5), Sequence::constant(0.5), Sequence::constant(0.5)}});
  fams.push_back({"harmonic", [](std::size_t n) { return 1.0 / (n + 2.0); }, [](std::size_t) { return 0.3; },
                  [](std::size_t) { return 0.7; },
                  {Sequence::harmonic(), Sequence::constant(0.3), Sequence::constant(0.7)}});
  fams.push_back({"mixed", [](std::size_t n) { return std::min(1.0, 0.2 + 0.005 * n); },
                  [beta_table](std::size_t n) { return beta_table[std::min<std::size_t>(n, 3)]; },
                  [](std::size_t n) { return 1.0 / (n + 2.0); },
                  {Sequence::affine_clamped(0.2, 0.005), Sequence::table(beta_table), Sequence::harmonic()}});

  StopRule stop;
  stop.max_iters = 100;
  stop.residual_tol = 1e-300;
  stop.stall_tol = 1e-300;

  Result r;
  double worst = 0.0;
  std::size_t runs = 0;
  for (SchemeId id : kAllSchemes) {
    const std::string name(to_string(id));
    for (const ScalarFamily& f : fams) {
      ++runs;
      IterationTrace tr;
      if (id == SchemeId::mv_thianwan) {
        tr = run_multivalued_thianwan(MT, R, pt({1.0}), f.seqs, stop);
      } else if (id == SchemeId::mv_picard_s) {
        tr = run_multivalued_picard_s(MT, R, pt({1.0}), f.seqs, stop);
      } else {
        tr = run_single_valued(line, id, T, pt({1.0}), f.seqs, stop);
      }
      const std::vector<double> oracle = scalar_scheme(name, f, 1.0, 100);
      if (tr.size() != oracle.size()) {
        r.pass = false;
        r.detail += " length:" + name + "/" + f.label;
        continue;
      }
      for (std::size_t n = 0; n < oracle.size(); ++n) {
        const double err = std::abs(tr.iterates[n](0) - oracle[n]);
        worst = std::max(worst, err);
        if (!(err <= 1e-12)) {
          r.pass = false;
          r.detail += " mismatch:" + name + "/" + f.label + "@" + std::to_string(n);
          break;
        }
      }
    }
  }
  r.detail = "runs=" + std::to_string(runs) + " steps=100 max_abs_error=" + fmt(worst) + r.detail;
  return r;
}

// 10
Result determinism() {
  Result r;
  const ex::Config cfg = ex::load_config(config_path("sphere_cap_delta.json"));
  const fs::path base = fs::temp_directory_path() / "hybridfp_acceptance";
  std::vector<std::string> bytes;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = base / ("run" + std::to_string(run));
    fs::create_directories(dir);
    ex::Outcome o = ex::run_experiment(cfg, false);
    ex::write_outputs(cfg, o, dir);
    std::ifstream in(dir / (cfg.name + "_trace.csv"), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes.push_back(ss.str());
  }
  fs::remove_all(base);
  r.pass = !bytes[0].empty() && bytes[0] == bytes[1];
  r.detail = "trace_bytes=" + std::to_string(bytes[0].size()) + " identical=" + (bytes[0] == bytes[1] ? "true" : "false");
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"geometry suite", geometry},
      {"comparison inequalities", comparison},
      {"projection suite", projection},
      {"hausdorff oracle", hausdorff_oracle},
      {"class-verifier calibration", calibration},
      {"delta convergence on a sphere cap", delta_convergence},
      {"strong convergence", strong_convergence},
      {"existence search", existence},
      {"scheme fidelity", scheme_fidelity},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result res;
    try {
      res = criteria[i].second();
    } catch (const std::exception& e) {
      res = {false, std::string("exception: ") + e.what()};
    }
    if (!res.pass) ++failed;
    std::cout << "criterion " << i + 1 << ": " << (res.pass ? "pass" : "FAIL") << " (" << criteria[i].first
              << ") " << res.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria pass")) << '\n';
  return failed ? 1 : 0;
}
