#pragma once

#include <Eigen/Dense>

namespace graybox {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Lower-triangular square root of a covariance matrix.
///
/// Symmetrizes, then tries Cholesky. On failure the eigenvalues are clipped
/// at a floor proportional to the largest one and Cholesky is retried. Throws
/// std::runtime_error if the repaired matrix still does not factor.
Mat psd_sqrt(const Mat& cov);

/// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const Mat& m);

bool all_finite(const Mat& m);

}  // namespace graybox
