#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace evcoord {

/// Constraint matrices are stored row-wise: one row per constraint.
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace evcoord
