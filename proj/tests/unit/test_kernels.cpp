#include <doctest.h>

#include <cmath>
#include <random>

#include <omp.h>

#include "maintcause/kernels.hpp"

using namespace maintcause;

namespace {

RowMatrix random_table(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(e);
    }
    return m;
}

std::vector<double> random_vector(std::size_t n, unsigned seed, double lo, double hi) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(e);
    return v;
}

}  // namespace

TEST_CASE("trapezoid oracles") {
    const TreatmentGrid grid;
    RowMatrix y(2, grid.size()), zero = RowMatrix::Zero(2, grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        y(0, k) = grid[k];
        y(1, k) = std::sin(grid[k]);
    }
    const auto ise = kernels::serial::integrated_squared_error(y, zero, grid.step());
    // numpy.trapezoid on the same grid
    CHECK(ise[0] == doctest::Approx(2666.7).epsilon(1e-12));
    CHECK(ise[1] == doctest::Approx(9.814343051860286).epsilon(1e-12));

    const RowMatrix one = RowMatrix::Constant(2, grid.size(), 1.0);
    const auto c = kernels::serial::integrated_squared_error(one, zero, grid.step());
    CHECK(c[0] == doctest::Approx(20.0).epsilon(1e-14));
}

TEST_CASE("argmin ties resolve to the smallest index") {
    RowMatrix c(3, 4);
    c << 5, 1, 1, 2,                //
        3, 3 + 1e-10, 3, 7,         //
        0, 0, 0, 0;
    const auto best = kernels::serial::row_argmin(c);
    CHECK(best == std::vector<std::size_t>{1, 0, 0});
    RowMatrix d(1, 3);
    d << 2, 2 - 1e-6, 3;
    CHECK(kernels::serial::row_argmin(d).front() == 1);
}

TEST_CASE("cost table") {
    RowMatrix o(1, 3), f(1, 3);
    o << 1, 1, 1;
    f << 2, 1, 0;
    const std::vector<double> t{0, 1, 2};
    const auto c = kernels::serial::cost_table(o, f, t, CostParams{});
    CHECK(c(0, 0) == 207 + 208);
    CHECK(c(0, 1) == 73 + 207 + 104);
    CHECK(c(0, 2) == 146 + 207);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    const TreatmentGrid grid;
    const auto base = random_vector(513, 1, -2.0, 2.0);
    const auto slope = random_vector(513, 2, 0.0, 0.1);
    const auto a = random_table(513, grid.size(), 3);
    const auto b = random_table(513, grid.size(), 4);
    const CostParams cp{30, 207, 104};

    const auto ref_curves = kernels::serial::logistic_curves(7.0, base, slope, grid.points());
    const auto ref_cost = kernels::serial::cost_table(a, b, grid.points(), cp);
    const auto ref_argmin = kernels::serial::row_argmin(ref_cost);
    const auto ref_ise = kernels::serial::integrated_squared_error(a, b, grid.step());
    const auto ref_mean = kernels::serial::column_mean(a);

    const int saved = omp_get_max_threads();
    for (int threads : {1, 2, 3, 8}) {
        omp_set_num_threads(threads);
        CAPTURE(threads);
        CHECK(kernels::parallel::logistic_curves(7.0, base, slope, grid.points()) == ref_curves);
        CHECK(kernels::parallel::cost_table(a, b, grid.points(), cp) == ref_cost);
        CHECK(kernels::parallel::row_argmin(ref_cost) == ref_argmin);
        CHECK(kernels::parallel::integrated_squared_error(a, b, grid.step()) == ref_ise);
        CHECK(kernels::parallel::column_mean(a) == ref_mean);
    }
    omp_set_num_threads(saved);
}

TEST_CASE("thread cap from the environment") {
    setenv("MAINTCAUSE_THREADS", "3", 1);
    CHECK(kernels::thread_cap_from_env() == 3);
    unsetenv("MAINTCAUSE_THREADS");
    CHECK(kernels::thread_cap_from_env() == 0);
}
