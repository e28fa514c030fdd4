#pragma once

#include <functional>
#include <optional>

#include "hybridfp/model_space.hpp"

namespace hybridfp {

/// A coefficient function X -> R; most experiments use constants.
class Coefficient {
 public:
  Coefficient(double value) : value_(value) {}  // NOLINT: constants convert implicitly
  explicit Coefficient(std::function<double(const Point&)> f) : fn_(std::move(f)) {}

  double operator()(const Point& x) const { return fn_ ? fn_(x) : value_; }
  bool is_constant() const { return !fn_; }

 private:
  double value_ = 0.0;
  std::function<double(const Point&)> fn_;
};

/// Coefficients of the mapping classes. Each class reads only the fields
/// it needs; missing ones raise MissingParam.
struct HybridParams {
  std::optional<Coefficient> a1, a2, a3, b1, b2, k1, k2;
  std::optional<double> lambda, alpha, beta;
};

}  // namespace hybridfp
