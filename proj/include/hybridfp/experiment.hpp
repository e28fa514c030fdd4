#pragma once

// Config-driven experiment harness. Requires nlohmann/json on the include
// path (the library headers themselves do not).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridfp/builtin_maps.hpp"
#include "hybridfp/classes.hpp"
#include "hybridfp/convex.hpp"
#include "hybridfp/diagnostics.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/iterate.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/setmap.hpp"

namespace hybridfp::experiment {

using json = nlohmann::json;

inline constexpr const char* kOutDirEnv = "HYBRIDFP_OUT_DIR";

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kConfigError = 2 };

/// A declared hypothesis of a theorem-tagged run failed; treated like a
/// configuration error (the run never starts).
class HypothesisError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string point_str(const Point& p) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) s += ' ';
    s += num(p(i));
  }
  return s + ")";
}

/// Ordered key=value report.
class Summary {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, num(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, std::string_view value) { set(key, std::string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Config parsing helpers; every error names the offending key.

namespace detail {

inline const json& at(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + path + key + "'");
  return j.at(key);
}

inline double get_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = at(j, key, path);
  if (!v.is_number()) throw ConfigError("key '" + path + key + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_number(j, key, path);
}

inline std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = at(j, key, path);
  if (!v.is_string()) throw ConfigError("key '" + path + key + "' must be a string");
  return v.get<std::string>();
}

inline std::size_t count_or(const json& j, const std::string& key, std::size_t fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("key '" + path + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

/// Point literal: intrinsic coordinates (length n, mapped through the
/// exponential map at the origin) or ambient coordinates (length n + 1,
/// curved models only, must lie on the model).
inline Point parse_point(const ModelSpace& space, const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("key '" + key + "' must be an array of numbers");
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError("key '" + key + "' must be an array of numbers");
    p(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  if (p.size() == space.dim()) return space.from_tangent_coords(p);
  if (p.size() == space.ambient_dim()) {
    if (!space.contains(p, 1e-9)) throw ConfigError("key '" + key + "' is not a point of the model space");
    return space.normalize(p);
  }
  throw ConfigError("key '" + key + "' has length " + std::to_string(p.size()) + ", expected " +
                    std::to_string(space.dim()) + " or " + std::to_string(space.ambient_dim()));
}

inline Sequence parse_sequence(const json& v, const std::string& key) {
  try {
    if (v.is_number()) return Sequence::constant(v.get<double>());
    const std::string kind = get_string(v, "kind", key + ".");
    if (kind == "constant") return Sequence::constant(get_number(v, "value", key + "."));
    if (kind == "harmonic") return Sequence::harmonic();
    if (kind == "affine_clamped") {
      return Sequence::affine_clamped(get_number(v, "offset", key + "."), get_number(v, "slope", key + "."));
    }
    if (kind == "table") {
      const json& vals = at(v, "values", key + ".");
      if (!vals.is_array()) throw ConfigError("key '" + key + ".values' must be an array");
      std::vector<double> out;
      for (const json& x : vals) {
        if (!x.is_number()) throw ConfigError("key '" + key + ".values' must hold numbers");
        out.push_back(x.get<double>());
      }
      return Sequence::table(std::move(out));
    }
    throw ConfigError("key '" + key + ".kind' has unknown value '" + kind + "'");
  } catch (const InfeasibleConstraints& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

}  // namespace detail

struct ClassCheckSpec {
  ClassId id;
  std::size_t pairs = 2000;
  std::vector<Quantifier> quantifiers;  ///< multivalued type I classes only
};

struct SchemeSpec {
  SchemeId id;
  StepSequences seqs;
  Selection selection;
  bool project_wrapper = false;
  Point x0;
};

struct Tolerances {
  double slack = kDefaultSlackTol;
  double fejer = 1e-9;
  double fixed_point = 1e-6;
  double agreement = 1e-5;
  double endpoint = 1e-8;
  double residual = 1e-6;  ///< final residual accepted as converged
  double cauchy = 1e-6;
};

/// Parsed, validated experiment description.
struct Config {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::optional<ModelSpace> space;
  std::optional<ConvexSet> domain;
  std::optional<double> epsilon;  ///< domain hypothesis angle
  bool diam_hypothesis = false;   ///< declared diam(K) <= (pi - eps)/(2 sqrt(kappa))
  json map_spec;
  HybridParams params;
  bool has_params = false;
  std::vector<ClassCheckSpec> class_checks;
  std::optional<SchemeSpec> scheme;
  StopRule stop;
  std::optional<Point> fixed_point;
  bool search_fixed_point = false;
  std::set<std::string> diagnostics;
  std::optional<std::string> theorem;
  std::string ratio_reading = "displayed";  ///< "displayed": 2 k2/(1-a3), "proof": k2/(1-a3)
  std::size_t step_horizon = 10000;
  std::size_t condition_bins = 10;
  std::size_t condition_samples = 2000;
  Tolerances tol;
  std::string out_dir = "out";
  json project_spec;

  const ModelSpace& sp() const { return *space; }
  const ConvexSet& K() const { return *domain; }
};

inline const std::set<std::string>& known_diagnostics() {
  static const std::set<std::string> k = {"fejer", "delta_limit", "fixed_point", "endpoint", "condition_I",
                                          "step_condition", "cauchy", "chain", "picard_search"};
  return k;
}

inline bool is_known_theorem(const std::string& t) {
  return t == "delta_convergence" || t == "strong_convergence" || t == "existence";
}

inline Config parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  Config c;
  if (j.contains("name")) c.name = get_string(j, "name", "");
  for (char ch : c.name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) {
      throw ConfigError("key 'name' may only contain letters, digits, '_', '-' and '.'");
    }
  }
  c.seed = count_or(j, "seed", 0, "");

  const json& sj = at(j, "space", "");
  const double kappa = get_number(sj, "kappa", "space.");
  const std::size_t dim = count_or(sj, "dim", 0, "space.");
  if (dim < 1) throw ConfigError("key 'space.dim' must be at least 1");
  c.space.emplace(kappa, static_cast<int>(dim));
  const ModelSpace& space = *c.space;

  // Domain.
  const json& dj = at(j, "domain", "");
  const std::string dtype = get_string(dj, "type", "domain.");
  try {
    if (dtype == "whole") {
      c.domain = ConvexSet::whole(space);
    } else if (dtype == "ball") {
      c.domain = ConvexSet::ball(space, parse_point(space, at(dj, "center", "domain."), "domain.center"),
                                 get_number(dj, "radius", "domain."));
    } else if (dtype == "intersection") {
      const json& bj = at(dj, "balls", "domain.");
      if (!bj.is_array() || bj.empty()) throw ConfigError("key 'domain.balls' must be a nonempty array");
      std::vector<Ball> balls;
      for (std::size_t i = 0; i < bj.size(); ++i) {
        const std::string p = "domain.balls[" + std::to_string(i) + "].";
        balls.push_back({parse_point(space, at(bj[i], "center", p), p + "center"), get_number(bj[i], "radius", p)});
      }
      c.domain = ConvexSet::intersection(space, std::move(balls),
                                         parse_point(space, at(dj, "witness", "domain."), "domain.witness"));
    } else {
      throw ConfigError("key 'domain.type' has unknown value '" + dtype + "'");
    }
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("key 'domain': ") + e.what());
  }
  if (dj.contains("hypotheses")) {
    const json& hj = dj.at("hypotheses");
    if (hj.contains("epsilon")) c.epsilon = get_number(hj, "epsilon", "domain.hypotheses.");
    if (hj.contains("diam_bound")) {
      if (!hj.at("diam_bound").is_boolean()) throw ConfigError("key 'domain.hypotheses.diam_bound' must be a boolean");
      c.diam_hypothesis = hj.at("diam_bound").get<bool>();
      if (c.diam_hypothesis && !c.epsilon) {
        throw ConfigError("key 'domain.hypotheses.diam_bound' needs 'domain.hypotheses.epsilon'");
      }
    }
  }

  c.map_spec = at(j, "map", "");
  if (!c.map_spec.is_object()) throw ConfigError("key 'map' must be an object");

  if (j.contains("params")) {
    const json& pj = j.at("params");
    if (!pj.is_object()) throw ConfigError("key 'params' must be an object");
    c.has_params = true;
    for (auto it = pj.begin(); it != pj.end(); ++it) {
      const std::string& k = it.key();
      if (!it->is_number()) throw ConfigError("key 'params." + k + "' must be a number");
      const double v = it->get<double>();
      if (k == "a1") c.params.a1 = v;
      else if (k == "a2") c.params.a2 = v;
      else if (k == "a3") c.params.a3 = v;
      else if (k == "b1") c.params.b1 = v;
      else if (k == "b2") c.params.b2 = v;
      else if (k == "k1") c.params.k1 = v;
      else if (k == "k2") c.params.k2 = v;
      else if (k == "lambda") c.params.lambda = v;
      else if (k == "alpha") c.params.alpha = v;
      else if (k == "beta") c.params.beta = v;
      else throw ConfigError("key 'params." + k + "' is not a known coefficient");
    }
  }

  if (j.contains("class_checks")) {
    const json& cj = j.at("class_checks");
    if (!cj.is_array()) throw ConfigError("key 'class_checks' must be an array");
    for (std::size_t i = 0; i < cj.size(); ++i) {
      const std::string p = "class_checks[" + std::to_string(i) + "].";
      const std::string cls = get_string(cj[i], "class", p);
      const auto id = parse_class_id(cls);
      if (!id) throw ConfigError("key '" + p + "class' has unknown value '" + cls + "'");
      ClassCheckSpec spec{*id, count_or(cj[i], "pairs", 2000, p), {}};
      if (spec.pairs == 0) throw ConfigError("key '" + p + "pairs' must be positive");
      const bool quantified = *id == ClassId::type1 || *id == ClassId::generalized_type1;
      const std::string q = cj[i].contains("quantifier") ? get_string(cj[i], "quantifier", p)
                                                          : (*id == ClassId::type1 ? "forall" : "exists");
      if (q == "forall") spec.quantifiers = {Quantifier::forall};
      else if (q == "exists") spec.quantifiers = {Quantifier::exists};
      else if (q == "both") spec.quantifiers = {Quantifier::forall, Quantifier::exists};
      else throw ConfigError("key '" + p + "quantifier' has unknown value '" + q + "'");
      if (!quantified) spec.quantifiers.clear();
      c.class_checks.push_back(std::move(spec));
    }
  }

  if (j.contains("scheme")) {
    const json& sc = j.at("scheme");
    SchemeSpec s{SchemeId::picard, {}, {}, false, space.origin()};
    try {
      s.id = parse_scheme(get_string(sc, "id", "scheme."));
    } catch (const SchemeUnknown& e) {
      throw ConfigError(std::string("key 'scheme.id': ") + e.what());
    }
    if (sc.contains("alpha")) s.seqs.alpha = parse_sequence(sc.at("alpha"), "scheme.alpha");
    if (sc.contains("beta")) s.seqs.beta = parse_sequence(sc.at("beta"), "scheme.beta");
    if (sc.contains("gamma")) s.seqs.gamma = parse_sequence(sc.at("gamma"), "scheme.gamma");
    if (sc.contains("selection")) {
      const std::string sel = get_string(sc, "selection", "scheme.");
      if (sel == "nearest") s.selection.rule = SelectionRule::nearest;
      else if (sel == "random") s.selection.rule = SelectionRule::random;
      else throw ConfigError("key 'scheme.selection' has unknown value '" + sel + "'");
    }
    s.selection.seed = c.seed;
    if (sc.contains("project_wrapper")) {
      if (!sc.at("project_wrapper").is_boolean()) throw ConfigError("key 'scheme.project_wrapper' must be a boolean");
      s.project_wrapper = sc.at("project_wrapper").get<bool>();
    }
    s.x0 = parse_point(space, at(sc, "x0", "scheme."), "scheme.x0");
    c.scheme = std::move(s);
  }

  if (j.contains("stop")) {
    const json& st = j.at("stop");
    c.stop.max_iters = count_or(st, "max_iters", c.stop.max_iters, "stop.");
    c.stop.residual_tol = number_or(st, "residual_tol", c.stop.residual_tol, "stop.");
    c.stop.stall_tol = number_or(st, "stall_tol", c.stop.stall_tol, "stop.");
    try {
      c.stop.validate();
    } catch (const InfeasibleConstraints& e) {
      throw ConfigError(std::string("key 'stop': ") + e.what());
    }
  }

  if (j.contains("fixed_point")) {
    const json& fp = j.at("fixed_point");
    if (fp.is_string()) {
      if (fp.get<std::string>() != "search") throw ConfigError("key 'fixed_point' must be a point or \"search\"");
      c.search_fixed_point = true;
    } else {
      c.fixed_point = parse_point(space, fp, "fixed_point");
    }
  }

  if (j.contains("diagnostics")) {
    const json& dg = j.at("diagnostics");
    if (!dg.is_array()) throw ConfigError("key 'diagnostics' must be an array");
    for (const json& d : dg) {
      if (!d.is_string() || !known_diagnostics().count(d.get<std::string>())) {
        throw ConfigError("key 'diagnostics' has unknown entry " + d.dump());
      }
      c.diagnostics.insert(d.get<std::string>());
    }
  }
  if (j.contains("condition_I")) {
    c.condition_bins = count_or(j.at("condition_I"), "bins", c.condition_bins, "condition_I.");
    c.condition_samples = count_or(j.at("condition_I"), "samples", c.condition_samples, "condition_I.");
    if (c.condition_bins == 0) throw ConfigError("key 'condition_I.bins' must be positive");
  }
  if (j.contains("step_condition")) {
    const json& sc = j.at("step_condition");
    c.step_horizon = count_or(sc, "horizon", c.step_horizon, "step_condition.");
    if (sc.contains("ratio_reading")) {
      c.ratio_reading = get_string(sc, "ratio_reading", "step_condition.");
      if (c.ratio_reading != "displayed" && c.ratio_reading != "proof") {
        throw ConfigError("key 'step_condition.ratio_reading' must be \"displayed\" or \"proof\"");
      }
    }
  }
  if (j.contains("tolerances")) {
    const json& tj = j.at("tolerances");
    c.tol.slack = number_or(tj, "slack", c.tol.slack, "tolerances.");
    c.tol.fejer = number_or(tj, "fejer", c.tol.fejer, "tolerances.");
    c.tol.fixed_point = number_or(tj, "fixed_point", c.tol.fixed_point, "tolerances.");
    c.tol.agreement = number_or(tj, "agreement", c.tol.agreement, "tolerances.");
    c.tol.endpoint = number_or(tj, "endpoint", c.tol.endpoint, "tolerances.");
    c.tol.residual = number_or(tj, "residual", c.tol.residual, "tolerances.");
    c.tol.cauchy = number_or(tj, "cauchy", c.tol.cauchy, "tolerances.");
  }
  if (j.contains("theorem")) {
    c.theorem = get_string(j, "theorem", "");
    if (!is_known_theorem(*c.theorem)) throw ConfigError("key 'theorem' has unknown value '" + *c.theorem + "'");
  }
  if (j.contains("output")) c.out_dir = get_string(j.at("output"), "dir", "output.");
  if (j.contains("project")) c.project_spec = j.at("project");

  // Dependency rules.
  const bool needs_p = c.diagnostics.count("fejer") || c.diagnostics.count("chain") || c.diagnostics.count("endpoint") ||
                       c.diagnostics.count("condition_I");
  if (needs_p && !c.fixed_point && !c.search_fixed_point) {
    throw ConfigError("key 'fixed_point' is required by the requested diagnostics (give a point or \"search\")");
  }
  const bool needs_trace = c.diagnostics.count("fejer") || c.diagnostics.count("delta_limit") ||
                           c.diagnostics.count("cauchy") || c.diagnostics.count("chain") ||
                           c.diagnostics.count("fixed_point");
  if (needs_trace && !c.scheme) throw ConfigError("key 'scheme' is required by the requested diagnostics");
  if (c.diagnostics.count("step_condition") && !c.scheme) {
    throw ConfigError("key 'scheme' is required by diagnostic 'step_condition'");
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Map registry.

struct BuiltMap {
  MultivaluedMap multi;
  std::optional<SingleValuedMap> single;
  std::optional<HybridParams> default_params;
};

inline BuiltMap build_map(const Config& c) {
  using namespace detail;
  const json& m = c.map_spec;
  const ModelSpace& space = c.sp();
  const std::string id = get_string(m, "builtin", "map.");
  auto single = [&](SingleValuedMap f) {
    return BuiltMap{MultivaluedMap::from_single(c.K(), f, id), f, std::nullopt};
  };
  try {
    if (id == "geodesic_contraction") {
      return single(maps::geodesic_contraction(space, parse_point(space, at(m, "target", "map."), "map.target"),
                                               get_number(m, "fraction", "map.")));
    }
    if (id == "constant") return single(maps::constant(space, parse_point(space, at(m, "value", "map."), "map.value")));
    if (id == "identity") return single(maps::identity());
    if (id == "linear_scale") return single(maps::linear_scale(space, get_number(m, "factor", "map.")));
    if (id == "affine") {
      return single(maps::affine(space, get_number(m, "scale", "map."),
                                 parse_point(space, at(m, "offset", "map."), "map.offset")));
    }
    if (id == "two_point" || id == "multi_contraction") {
      const json& fj = at(m, "fractions", "map.");
      if (!fj.is_array()) throw ConfigError("key 'map.fractions' must be an array");
      std::vector<double> fr;
      for (const json& f : fj) {
        if (!f.is_number()) throw ConfigError("key 'map.fractions' must hold numbers");
        fr.push_back(f.get<double>());
      }
      if (id == "two_point" && fr.size() != 2) throw ConfigError("key 'map.fractions' must have two entries");
      return {maps::multi_contraction(c.K(), parse_point(space, at(m, "target", "map."), "map.target"), fr, id),
              std::nullopt, std::nullopt};
    }
    if (id == "point_table") {
      const json& kj = at(m, "keys", "map.");
      const json& vj = at(m, "values", "map.");
      if (!kj.is_array() || !vj.is_array() || kj.size() != vj.size()) {
        throw ConfigError("keys 'map.keys' and 'map.values' must be arrays of equal length");
      }
      std::vector<Point> keys;
      std::vector<std::vector<Point>> values;
      for (std::size_t i = 0; i < kj.size(); ++i) {
        keys.push_back(parse_point(space, kj[i], "map.keys[" + std::to_string(i) + "]"));
        if (!vj[i].is_array()) throw ConfigError("key 'map.values[" + std::to_string(i) + "]' must be an array");
        std::vector<Point> img;
        for (std::size_t k = 0; k < vj[i].size(); ++k) {
          img.push_back(parse_point(space, vj[i][k], "map.values[" + std::to_string(i) + "][" + std::to_string(k) + "]"));
        }
        values.push_back(std::move(img));
      }
      return {maps::point_table(c.K(), std::move(keys), std::move(values)), std::nullopt, std::nullopt};
    }
    if (id == "sphere_cap_example") {
      maps::Instance inst = maps::sphere_cap_example();
      if (!(inst.space == space)) throw ConfigError("key 'map.builtin': sphere_cap_example needs space kappa=1, dim=2");
      BuiltMap b = single(*inst.single);
      b.default_params = inst.params;
      return b;
    }
  } catch (const GeometryError& e) {
    throw ConfigError("key 'map': " + std::string(e.what()));
  }
  throw ConfigError("key 'map.builtin' has unknown value '" + id + "'");
}

// ---------------------------------------------------------------------------
// Output files.

inline void write_trace_csv(const IterationTrace& tr, std::ostream& os) {
  const Eigen::Index m = tr.iterates.empty() ? 0 : tr.iterates.front().size();
  os << "n";
  for (Eigen::Index i = 0; i < m; ++i) os << ",x" << i;
  os << ",residual,d_to_p\n";
  for (std::size_t n = 0; n < tr.size(); ++n) {
    os << n;
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << num(tr.iterates[n](i));
    os << ',' << num(tr.residuals[n]) << ',';
    if (tr.dist_to_p) os << num((*tr.dist_to_p)[n]);
    os << '\n';
  }
}

enum class PlotKind { residual, dist_to_p, center_agreement };

inline std::string_view to_string(PlotKind k) {
  switch (k) {
    case PlotKind::residual: return "residual";
    case PlotKind::dist_to_p: return "dist_to_p";
    case PlotKind::center_agreement: return "center_agreement";
  }
  return "?";
}

/// Two-column CSV `n,value`.
inline void emit_plot_data(const IterationTrace& tr, PlotKind kind, std::ostream& os) {
  const std::vector<double>* series = nullptr;
  switch (kind) {
    case PlotKind::residual: series = &tr.residuals; break;
    case PlotKind::dist_to_p: series = tr.dist_to_p ? &*tr.dist_to_p : nullptr; break;
    case PlotKind::center_agreement: series = tr.center_agreement ? &*tr.center_agreement : nullptr; break;
  }
  if (!series) throw MissingSeries("trace has no '" + std::string(to_string(kind)) + "' series");
  os << "n,value\n";
  for (std::size_t n = 0; n < series->size(); ++n) os << n << ',' << num((*series)[n]) << '\n';
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file '" + path.string() + "'");
  out << content;
}

inline void emit_plot_data(const IterationTrace& tr, PlotKind kind, const std::filesystem::path& path) {
  std::ostringstream os;
  emit_plot_data(tr, kind, os);
  write_file(path, os.str());
}

/// --out flag, then the environment override, then the config value.
inline std::string resolve_out_dir(const Config& c, const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return c.out_dir;
}

// ---------------------------------------------------------------------------
// Running.

struct Outcome {
  int exit_code = kPass;
  Summary summary;
  std::optional<IterationTrace> trace;
  std::vector<std::string> failed;
  std::vector<std::string> files;
};

namespace detail {

inline std::vector<Point> sample_points(const Config& c, std::size_t count, std::uint64_t salt) {
  Rng rng(c.seed * 1000003ULL + salt);
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_member(c.K(), rng));
  return out;
}

inline ClassReport run_class_check(const ClassCheckSpec& spec, Quantifier q, const BuiltMap& map,
                                   const HybridParams& params, std::span<const PointPair> pairs, const Config& c) {
  switch (spec.id) {
    case ClassId::type1: return check_type1(map.multi, params, pairs, q, c.tol.slack);
    case ClassId::generalized_type1: return check_generalized_type1(map.multi, params, pairs, q, c.tol.slack);
    case ClassId::type2: return check_type2(map.multi, params, pairs, c.tol.slack);
    case ClassId::generalized_type2: return check_generalized_type2(map.multi, params, pairs, c.tol.slack);
    default:
      if (!map.single) {
        throw ConfigError("key 'class_checks': class '" + std::string(to_string(spec.id)) +
                          "' needs a single-valued map");
      }
      return check_classical(c.sp(), *map.single, spec.id, params, pairs, c.tol.slack);
  }
}

/// sup over the sample of the step-condition ratio.
inline double step_ratio(const Config& c, const HybridParams& p, std::span<const Point> sample) {
  if (!p.k2 || !p.a3) throw ConfigError("key 'params': the step condition needs k2 and a3");
  double r = 0.0;
  const double factor = c.ratio_reading == "displayed" ? 2.0 : 1.0;
  for (const Point& x : sample) r = std::max(r, factor * (*p.k2)(x) / (1.0 - (*p.a3)(x)));
  return r;
}

inline double convexity_R(const Config& c) {
  if (c.sp().kappa() <= 0.0) return 2.0;
  if (!c.epsilon) throw ConfigError("key 'domain.hypotheses.epsilon' is required for kappa > 0");
  try {
    return r_constant(*c.epsilon).R;
  } catch (const EpsilonOutOfRange& e) {
    throw ConfigError(std::string("key 'domain.hypotheses.epsilon': ") + e.what());
  }
}

}  // namespace detail

/// Validates hypotheses, then runs class checks, the iteration and the
/// diagnostics. Throws ConfigError (exit 2) before any work when the config
/// is inconsistent or a theorem tag's hypotheses fail.
inline Outcome run_experiment(const Config& c, bool classes_only = false) {
  Outcome out;
  Summary& S = out.summary;
  const ModelSpace& space = c.sp();
  S.set("name", c.name);
  S.set("seed", static_cast<std::size_t>(c.seed));
  S.set("space.kappa", space.kappa());
  S.set("space.dim", static_cast<std::size_t>(space.dim()));
  S.set("space.model", to_string(space.model()));
  S.set("domain.radius_bound", c.K().radius_bound());
  S.set("domain.diameter_bound", c.K().diameter_bound());

  BuiltMap map = build_map(c);
  HybridParams params = c.params;
  if (!c.has_params && map.default_params) params = *map.default_params;

  const std::vector<Point> param_sample = detail::sample_points(c, 256, 1);

  // Domain hypotheses.
  if (space.kappa() > 0.0) {
    const bool ok = c.K().radius_bound() < space.convexity_radius();
    S.set("hypothesis.rad_below_convexity_radius", ok);
    if (!ok) throw HypothesisError("hypothesis rad(K) < pi/(2 sqrt(kappa)) failed");
  }
  if (c.diam_hypothesis) {
    const double bound = r_constant(*c.epsilon).diam_bound(space.kappa());
    const bool ok = c.K().diameter_bound() <= bound;
    S.set("hypothesis.diam_bound", bound);
    S.set("hypothesis.diam_ok", ok);
    if (!ok) throw HypothesisError("hypothesis diam(K) <= (pi - eps)/(2 sqrt(kappa)) failed");
  }

  // Coefficient validation for every requested class.
  for (const ClassCheckSpec& spec : c.class_checks) {
    const ParamValidation v = validate_params(spec.id, params, param_sample);
    if (!v.ok) {
      throw ConfigError("key 'params' violates " + std::string(to_string(spec.id)) + " constraint: " + v.clause);
    }
  }

  // Theorem gating.
  std::optional<StepCondition> step;
  if (c.theorem) {
    const std::string& t = *c.theorem;
    S.set("theorem", t);
    auto need_scheme = [&](SchemeId id) {
      if (classes_only) return;
      if (!c.scheme || c.scheme->id != id) {
        throw HypothesisError("theorem '" + t + "' requires scheme '" + std::string(to_string(id)) + "'");
      }
    };
    auto need_valid = [&](ClassId id) {
      const ParamValidation v = validate_params(id, params, param_sample);
      if (!v.ok) throw HypothesisError("theorem '" + t + "' hypothesis failed: " + v.clause);
    };
    if (t == "delta_convergence") {
      need_valid(ClassId::generalized_type1);
      need_scheme(SchemeId::mv_thianwan);
      if (space.kappa() > 0.0 && !c.diam_hypothesis) {
        throw HypothesisError("theorem '" + t + "' requires the declared diam_bound hypothesis");
      }
      if (!classes_only) {
        const double ratio = detail::step_ratio(c, params, param_sample);
        step = check_step_condition(c.scheme->seqs.alpha, detail::convexity_R(c), ratio, c.step_horizon);
        if (!step->ok) {
          throw HypothesisError("theorem '" + t + "' hypothesis failed: step condition (min " + num(step->min_value) +
                                ")");
        }
      }
    } else if (t == "strong_convergence") {
      need_valid(ClassId::type2);
      need_scheme(SchemeId::mv_picard_s);
      for (const Point& x : param_sample) {
        if (!((*params.a1)(x) >= 1.0)) throw HypothesisError("theorem '" + t + "' hypothesis failed: a1 >= 1");
      }
    } else if (t == "existence") {
      need_valid(ClassId::generalized_type2);
      double k = 0.0;
      for (const Point& x : param_sample) {
        k = std::max(k, ((*params.a1)(x) + (*params.k1)(x)) / (1.0 - (*params.k2)(x)));
      }
      S.set("hypothesis.k", k);
      if (!(k < 1.0)) throw HypothesisError("theorem '" + t + "' hypothesis failed: k < 1");
    }
    S.set("hypotheses", "pass");
  }

  auto record = [&](const std::string& key, bool ok) {
    S.set(key, ok ? "pass" : "fail");
    if (!ok) out.failed.push_back(key);
  };

  // Class checks.
  std::optional<std::vector<PointPair>> pairs;
  std::size_t pair_count = 0;
  for (const ClassCheckSpec& spec : c.class_checks) {
    if (!pairs || pair_count != spec.pairs) {
      pairs = sample_pairs(c.K(), spec.pairs, c.seed * 1000003ULL + 2);
      pair_count = spec.pairs;
    }
    std::vector<Quantifier> qs = spec.quantifiers;
    if (qs.empty()) qs = {Quantifier::forall};
    const bool quantified = !spec.quantifiers.empty();
    for (Quantifier q : qs) {
      std::string key = "class." + std::string(to_string(spec.id));
      if (quantified) key += q == Quantifier::forall ? ".forall" : ".exists";
      const ClassReport rep = detail::run_class_check(spec, q, map, params, *pairs, c);
      S.set(key + ".sampled_pairs", rep.sampled_pairs);
      S.set(key + ".worst_slack", rep.worst_slack);
      S.set(key + ".verdict", to_string(rep.verdict));
      if (rep.witness) S.set(key + ".witness", point_str(rep.witness->x) + " " + point_str(rep.witness->y));
      record(key + ".status", rep.verdict == Verdict::satisfied_on_sample);
    }
  }
  if (classes_only) {
    S.set("status", out.failed.empty() ? "pass" : "fail");
    out.exit_code = out.failed.empty() ? kPass : kCheckFailed;
    return out;
  }

  // Fixed point.
  std::optional<Point> p = c.fixed_point;
  if (c.search_fixed_point || c.diagnostics.count("picard_search")) {
    const Point start = c.scheme ? c.scheme->x0 : c.K().is_whole() ? space.origin() : c.K().balls().front().center;
    try {
      SearchResult sr = picard_nearest_search(map.multi, start, c.stop);
      S.set("search.iterations", sr.trace.size() - 1);
      S.set("search.k_hat", sr.k_hat);
      S.set("search.point", point_str(sr.point));
      if (params.a1 && params.k1 && params.k2) {
        double k = 0.0;
        for (const Point& x : param_sample) {
          k = std::max(k, ((*params.a1)(x) + (*params.k1)(x)) / (1.0 - (*params.k2)(x)));
        }
        S.set("search.k", k);
        S.set("search.sqrt_k", std::sqrt(k));
      }
      record("search.status", true);
      if (c.search_fixed_point && !p) p = sr.point;
    } catch (const NotConverged& e) {
      S.set("search.k_hat", e.k_hat());
      S.set("search.error", e.what());
      record("search.status", false);
    }
  }
  if (p) S.set("fixed_point", point_str(*p));

  // Iteration.
  if (c.scheme) {
    const SchemeSpec& s = *c.scheme;
    IterationTrace tr;
    if (is_multivalued(s.id)) {
      if (!contains(c.K(), s.x0, 1e-9)) throw ConfigError("key 'scheme.x0' lies outside the domain");
      tr = s.id == SchemeId::mv_thianwan ? run_multivalued_thianwan(map.multi, c.K(), s.x0, s.seqs, c.stop, s.selection)
                                         : run_multivalued_picard_s(map.multi, c.K(), s.x0, s.seqs, c.stop, s.selection);
    } else {
      if (!map.single) throw ConfigError("key 'scheme.id': scheme needs a single-valued map");
      tr = run_single_valued(space, s.id, *map.single, s.x0, s.seqs, c.stop, s.project_wrapper ? &c.K() : nullptr);
    }
    if (p) attach_distance_to(tr, space, *p);
    S.set("scheme", tr.scheme_id);
    S.set("scheme.alpha", s.seqs.alpha.describe());
    S.set("scheme.beta", s.seqs.beta.describe());
    S.set("scheme.gamma", s.seqs.gamma.describe());
    S.set("scheme.projected", tr.projected);
    S.set("iterations", tr.size() - 1);
    S.set("stop_reason", to_string(tr.stop_reason));
    S.set("final_residual", tr.final_residual());
    S.set("final_point", point_str(tr.last()));
    record("convergence.status", tr.final_residual() <= c.tol.residual);

    if (c.diagnostics.count("step_condition") && !step) {
      if (!params.k2 || !params.a3) throw ConfigError("key 'params': step_condition needs k2 and a3");
      step = check_step_condition(s.seqs.alpha, detail::convexity_R(c), detail::step_ratio(c, params, param_sample),
                                  c.step_horizon);
    }
    if (step) {
      S.set("step_condition.min", step->min_value);
      record("step_condition.status", step->ok);
    }
    if (c.diagnostics.count("fejer")) {
      const double v = fejer_check(space, tr, *p);
      S.set("fejer.max_violation", v);
      record("fejer.status", v <= c.tol.fejer);
    }
    if (c.diagnostics.count("chain")) {
      // d(x_{n+1},p) <= d(y_n,p) <= [d(z_n,p) <=] d(x_n,p) + tol
      double worst = -std::numeric_limits<double>::infinity();
      const auto ys = tr.aux.find("y");
      const auto zs = tr.aux.find("z");
      if (ys == tr.aux.end()) throw ConfigError("key 'diagnostics': 'chain' needs a scheme with y_n");
      for (std::size_t n = 0; n + 1 < tr.size(); ++n) {
        std::vector<double> chain{distance(space, tr.iterates[n + 1], *p), distance(space, ys->second[n], *p)};
        if (zs != tr.aux.end()) chain.push_back(distance(space, zs->second[n], *p));
        chain.push_back(distance(space, tr.iterates[n], *p));
        for (std::size_t k = 0; k + 1 < chain.size(); ++k) worst = std::max(worst, chain[k] - chain[k + 1]);
      }
      S.set("chain.max_violation", tr.size() > 1 ? worst : 0.0);
      record("chain.status", !(worst > c.tol.fejer));
    }
    if (c.diagnostics.count("cauchy")) {
      const std::size_t from = tr.size() / 2;
      const double osc = tail_oscillation(space, tr.iterates, from);
      S.set("cauchy.tail_start", from);
      S.set("cauchy.oscillation", osc);
      record("cauchy.status", osc < c.tol.cauchy);
    }
    if (c.diagnostics.count("fixed_point")) {
      record("terminal_fixed.status", fixed_point_check(map.multi, tr.last(), c.tol.fixed_point));
    }
    if (c.diagnostics.count("delta_limit")) {
      if (tr.size() < 2 * TailWindow::kMinLength + 1) {
        S.set("delta.error", "trace too short for even/odd windows");
        record("delta.status", false);
      } else {
        CenterBudget budget;
        budget.seed = c.seed;
        const DeltaLimitEstimate est = delta_limit_estimate(space, default_windows(tr), c.K(), budget);
        attach_center_agreement(tr, space, est);
        S.set("delta.windows", "full,even,odd");
        S.set("delta.center", point_str(est.center.point));
        S.set("delta.radius", est.center.radius);
        S.set("delta.method", to_string(est.center.method));
        S.set("delta.certified_gap", est.center.certified_gap);
        S.set("delta.agreement", est.agreement);
        const bool fixed = fixed_point_check(map.multi, est.center.point, c.tol.fixed_point);
        bool all_fixed = true;
        for (const CenterEstimate& ce : est.window_centers) {
          all_fixed = all_fixed && fixed_point_check(map.multi, ce.point, c.tol.fixed_point);
        }
        S.set("delta.center_fixed", fixed);
        S.set("delta.all_window_centers_fixed", all_fixed);
        record("delta.status", fixed && all_fixed && est.agreement < c.tol.agreement);
      }
    }
    out.trace = std::move(tr);
  }

  if (c.diagnostics.count("endpoint")) record("endpoint.status", endpoint_check(map.multi, *p, c.tol.endpoint));
  if (c.diagnostics.count("condition_I")) {
    const std::vector<Point> xs = detail::sample_points(c, c.condition_samples, 3);
    const ConditionIReport rep =
        condition_I_check(map.multi, xs, CompactSet::singleton(space, *p), c.condition_bins);
    std::string env;
    for (const ConditionIBin& b : rep.bins) env += (env.empty() ? "" : " ") + num(b.envelope);
    S.set("condition_I.envelope", env);
    S.set("condition_I.excluded", rep.excluded);
    record("condition_I.status", rep.pass);
  }

  std::string failed;
  for (const std::string& f : out.failed) failed += (failed.empty() ? "" : ",") + f;
  S.set("failed_checks", failed.empty() ? "none" : failed);
  S.set("status", out.failed.empty() ? "pass" : "fail");
  out.exit_code = out.failed.empty() ? kPass : kCheckFailed;
  return out;
}

/// Writes trace CSV, summary and plot CSVs under dir; returns the paths.
inline std::vector<std::string> write_outputs(const Config& c, Outcome& o, const std::filesystem::path& dir) {
  std::vector<std::string> files;
  auto put = [&](const std::string& suffix, const std::string& content) {
    const auto path = dir / (c.name + suffix);
    write_file(path, content);
    files.push_back(path.string());
  };
  if (o.trace) {
    std::ostringstream tr;
    write_trace_csv(*o.trace, tr);
    put("_trace.csv", tr.str());
    for (PlotKind k : {PlotKind::residual, PlotKind::dist_to_p, PlotKind::center_agreement}) {
      std::ostringstream os;
      try {
        emit_plot_data(*o.trace, k, os);
      } catch (const MissingSeries&) {
        continue;
      }
      put("_" + std::string(to_string(k)) + ".csv", os.str());
    }
  }
  put("_summary.txt", o.summary.str());
  o.files = files;
  return files;
}

// ---------------------------------------------------------------------------
// Projection sanity tool.

/// Projects configured or random points onto the domain and checks
/// membership, idempotence and optimality against dense sampling of K.
inline Outcome run_projection_check(const Config& c) {
  using namespace detail;
  Outcome out;
  Summary& S = out.summary;
  const ModelSpace& space = c.sp();
  const json& pj = c.project_spec;
  std::vector<Point> queries;
  if (pj.is_object() && pj.contains("points")) {
    const json& pts = pj.at("points");
    if (!pts.is_array()) throw ConfigError("key 'project.points' must be an array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      queries.push_back(parse_point(space, pts[i], "project.points[" + std::to_string(i) + "]"));
    }
  }
  const std::size_t nrand = count_or(pj, "random", queries.empty() ? 100 : 0, "project.");
  const std::size_t dense = count_or(pj, "dense", 2000, "project.");
  Rng rng(c.seed);
  const Point center = c.K().is_whole() ? space.origin() : c.K().balls().front().center;
  const double spread = c.K().is_whole() ? 1.0 : 2.0 * c.K().radius_bound();
  for (std::size_t i = 0; i < nrand; ++i) {
    double r = spread;
    if (space.model() == Model::sphere) r = std::min(r, 0.9 * space.diameter_bound());
    queries.push_back(random_point_in_ball(space, center, r, rng));
  }
  std::vector<Point> members;
  for (std::size_t i = 0; i < dense; ++i) members.push_back(random_member(c.K(), rng));

  double worst_member = 0.0, worst_idem = 0.0, worst_opt = -std::numeric_limits<double>::infinity();
  for (const Point& x : queries) {
    const Point px = project(c.K(), x);
    for (const Ball& b : c.K().balls()) worst_member = std::max(worst_member, distance(space, b.center, px) - b.radius);
    worst_idem = std::max(worst_idem, distance(space, project(c.K(), px), px));
    const double dp = distance(space, x, px);
    for (const Point& q : members) worst_opt = std::max(worst_opt, dp - distance(space, x, q));
  }
  S.set("name", c.name);
  S.set("project.queries", queries.size());
  S.set("project.dense_members", members.size());
  S.set("project.max_membership_excess", worst_member);
  S.set("project.max_idempotence_defect", worst_idem);
  S.set("project.max_optimality_gap", members.empty() ? 0.0 : worst_opt);
  const bool ok = worst_member <= 1e-9 && worst_idem <= 1e-9 && (members.empty() || worst_opt <= 1e-9);
  S.set("status", ok ? "pass" : "fail");
  out.exit_code = ok ? kPass : kCheckFailed;
  if (!ok) out.failed.push_back("project");
  return out;
}

}  // namespace hybridfp::experiment
