#include "maintcause/kernels.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace maintcause::kernels {

namespace {

inline void curve_row(double scale, double base, double slope, std::span<const double> t, double* out) {
    for (std::size_t k = 0; k < t.size(); ++k) out[k] = scale * logistic(base - slope * t[k]);
}

inline void cost_row(const double* o, const double* f, std::span<const double> t, const CostParams& cp,
                     double* out) {
    for (std::size_t k = 0; k < t.size(); ++k) out[k] = cp.c_pm * t[k] + cp.c_overhaul * o[k] + cp.c_failure * f[k];
}

inline std::size_t argmin_row(const double* c, Eigen::Index cols, double tol) {
    double best = c[0];
    for (Eigen::Index k = 1; k < cols; ++k) best = std::min(best, c[k]);
    for (Eigen::Index k = 0; k < cols; ++k) {
        if (c[k] <= best + tol) return static_cast<std::size_t>(k);
    }
    return 0;
}

inline double ise_row(const double* y, const double* y_hat, Eigen::Index cols, double step) {
    if (cols < 2) return 0.0;
    double interior = 0.0;
    for (Eigen::Index k = 1; k + 1 < cols; ++k) {
        const double d = y[k] - y_hat[k];
        interior += d * d;
    }
    const double d0 = y[0] - y_hat[0];
    const double d1 = y[cols - 1] - y_hat[cols - 1];
    return step * (0.5 * d0 * d0 + interior + 0.5 * d1 * d1);
}

}  // namespace

namespace serial {

RowMatrix logistic_curves(double scale, std::span<const double> base, std::span<const double> slope,
                          std::span<const double> t) {
    const auto n = static_cast<Eigen::Index>(base.size());
    RowMatrix out(n, static_cast<Eigen::Index>(t.size()));
    for (Eigen::Index i = 0; i < n; ++i) curve_row(scale, base[i], slope[i], t, out.row(i).data());
    return out;
}

RowMatrix cost_table(const RowMatrix& o, const RowMatrix& f, std::span<const double> t, const CostParams& cp) {
    RowMatrix out(o.rows(), o.cols());
    for (Eigen::Index i = 0; i < o.rows(); ++i) cost_row(o.row(i).data(), f.row(i).data(), t, cp, out.row(i).data());
    return out;
}

std::vector<std::size_t> row_argmin(const RowMatrix& c, double tol) {
    std::vector<std::size_t> out(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index i = 0; i < c.rows(); ++i) out[static_cast<std::size_t>(i)] = argmin_row(c.row(i).data(), c.cols(), tol);
    return out;
}

Eigen::VectorXd integrated_squared_error(const RowMatrix& y, const RowMatrix& y_hat, double step) {
    Eigen::VectorXd out(y.rows());
    for (Eigen::Index i = 0; i < y.rows(); ++i) out[i] = ise_row(y.row(i).data(), y_hat.row(i).data(), y.cols(), step);
    return out;
}

Eigen::VectorXd column_mean(const RowMatrix& m) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) out[k] += m(i, k);
    }
    return out / static_cast<double>(m.rows());
}

}  // namespace serial

namespace parallel {

RowMatrix logistic_curves(double scale, std::span<const double> base, std::span<const double> slope,
                          std::span<const double> t) {
    const auto n = static_cast<Eigen::Index>(base.size());
    RowMatrix out(n, static_cast<Eigen::Index>(t.size()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) curve_row(scale, base[i], slope[i], t, out.row(i).data());
    return out;
}

RowMatrix cost_table(const RowMatrix& o, const RowMatrix& f, std::span<const double> t, const CostParams& cp) {
    RowMatrix out(o.rows(), o.cols());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < o.rows(); ++i) cost_row(o.row(i).data(), f.row(i).data(), t, cp, out.row(i).data());
    return out;
}

std::vector<std::size_t> row_argmin(const RowMatrix& c, double tol) {
    std::vector<std::size_t> out(static_cast<std::size_t>(c.rows()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < c.rows(); ++i) out[static_cast<std::size_t>(i)] = argmin_row(c.row(i).data(), c.cols(), tol);
    return out;
}

Eigen::VectorXd integrated_squared_error(const RowMatrix& y, const RowMatrix& y_hat, double step) {
    Eigen::VectorXd out(y.rows());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < y.rows(); ++i) out[i] = ise_row(y.row(i).data(), y_hat.row(i).data(), y.cols(), step);
    return out;
}

Eigen::VectorXd column_mean(const RowMatrix& m) {
    // Columns are split across threads; each column still sums rows in order.
    Eigen::VectorXd out(m.cols());
#pragma omp parallel for schedule(static)
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) s += m(i, k);
        out[k] = s / static_cast<double>(m.rows());
    }
    return out;
}

}  // namespace parallel

int thread_cap_from_env() {
    const char* raw = std::getenv("MAINTCAUSE_THREADS");
    if (raw == nullptr || *raw == '\0') return 0;
    try {
        const int v = std::stoi(raw);
        return v > 0 ? v : 0;
    } catch (const std::exception&) {
        return 0;
    }
}

void apply_thread_cap() {
    if (const int cap = thread_cap_from_env(); cap > 0) omp_set_num_threads(cap);
}

}  // namespace maintcause::kernels
