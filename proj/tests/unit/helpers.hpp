#pragma once

#include <initializer_list>
#include <vector>

#include "prodigy/geometry.hpp"

namespace testing {

/// One-dimensional clients, as in most worked examples.
inline prodigy::GradientSet scalars(std::initializer_list<double> values) {
  std::vector<prodigy::Vector> v;
  for (double x : values) v.push_back({x});
  return prodigy::GradientSet(std::move(v));
}

inline prodigy::GradientSet vectors(std::vector<prodigy::Vector> v) {
  return prodigy::GradientSet(std::move(v));
}

}  // namespace testing
