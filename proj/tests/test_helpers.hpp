#pragma once

#include <initializer_list>

#include "graybox/linalg.hpp"

inline graybox::Vec vec(std::initializer_list<double> v) {
  graybox::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
