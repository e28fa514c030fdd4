#pragma once

#include <initializer_list>

#include "hybridfp/model_space.hpp"

namespace hybridfp::test {

inline Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double v : xs) p(i++) = v;
  return p;
}

}  // namespace hybridfp::test
