#pragma once

// Row-parallel numeric kernels over (contract x grid point) tables.
//
// Every kernel exists twice with the same signature: `serial::` is the plain
// reference loop and `parallel::` distributes rows over OpenMP threads. Rows
// are independent and reductions over rows happen after the parallel region
// in index order, so both variants return bit-identical results for any
// thread count.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maintcause/domain.hpp"

namespace maintcause {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace kernels {

// Ties within this many currency units of the row minimum go to the smallest t.
inline constexpr double kArgminTolerance = 1e-9;

namespace serial {
// out(i, k) = scale * logistic(base[i] - slope[i] * t[k])
RowMatrix logistic_curves(double scale, std::span<const double> base, std::span<const double> slope,
                          std::span<const double> t);
// out(i, k) = c_pm * t[k] + c_overhaul * o(i, k) + c_failure * f(i, k)
RowMatrix cost_table(const RowMatrix& o, const RowMatrix& f, std::span<const double> t, const CostParams& cp);
// Per-row index of the minimum; ties within tol resolve to the lowest index.
std::vector<std::size_t> row_argmin(const RowMatrix& c, double tol = kArgminTolerance);
// Per-row trapezoid integral of (y - y_hat)^2 on a uniform grid with spacing step.
Eigen::VectorXd integrated_squared_error(const RowMatrix& y, const RowMatrix& y_hat, double step);
Eigen::VectorXd column_mean(const RowMatrix& m);
}  // namespace serial

namespace parallel {
// out(i, k) = scale * logistic(base[i] - slope[i] * t[k])
RowMatrix logistic_curves(double scale, std::span<const double> base, std::span<const double> slope,
                          std::span<const double> t);
// out(i, k) = c_pm * t[k] + c_overhaul * o(i, k) + c_failure * f(i, k)
RowMatrix cost_table(const RowMatrix& o, const RowMatrix& f, std::span<const double> t, const CostParams& cp);
// Per-row index of the minimum; ties within tol resolve to the lowest index.
std::vector<std::size_t> row_argmin(const RowMatrix& c, double tol = kArgminTolerance);
// Per-row trapezoid integral of (y - y_hat)^2 on a uniform grid with spacing step.
Eigen::VectorXd integrated_squared_error(const RowMatrix& y, const RowMatrix& y_hat, double step);
Eigen::VectorXd column_mean(const RowMatrix& m);
}  // namespace parallel

// Upper bound on OpenMP threads from MAINTCAUSE_THREADS (0 when unset).
int thread_cap_from_env();
// Applies MAINTCAUSE_THREADS, if set, to the OpenMP runtime.
void apply_thread_cap();

}  // namespace kernels
}  // namespace maintcause
