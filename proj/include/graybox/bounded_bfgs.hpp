#pragma once

#include <functional>
#include <string>

#include "graybox/linalg.hpp"

namespace graybox {

struct BoxBfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // on the projected gradient, infinity norm
  double function_tolerance = 1e-10;  // relative decrease
  int max_line_search = 40;
};

struct BoxBfgsResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// Returns f(x) and writes the gradient into `grad`. A non-finite value is
/// treated as outside the domain and rejected by the line search.
using Objective = std::function<double(const Vec& x, Vec& grad)>;

/// Projected BFGS for min f(x) subject to lower <= x <= upper. Variables
/// pinned at a bound with the gradient pushing outward are frozen for the
/// iteration; the inverse-Hessian approximation acts on the rest.
BoxBfgsResult minimize_box_bfgs(const Objective& f, Vec x0, const Vec& lower, const Vec& upper,
                                const BoxBfgsOptions& options = {});

}  // namespace graybox
