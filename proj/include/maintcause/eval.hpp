#pragma once

#include <span>
#include <vector>

#include "maintcause/datagen.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/kernels.hpp"
#include "maintcause/policy.hpp"

namespace maintcause {

// (1/n) sum_i integral_0^m (y_i(t) - y_hat_i(t))^2 dt by the trapezoid rule on the
// grid, with m = grid.t_max(). Tables are population x grid.
double mise(const RowMatrix& truth, const RowMatrix& estimate, const TreatmentGrid& grid,
            Execution exec = Execution::kParallel);
double mise(const OutcomeEstimator& est, const RowMatrix& truth, const nn::Matrix& x, const TreatmentGrid& grid,
            Execution exec = Execution::kParallel);

// (1/n) sum_i (t*_i - t_hat*_i)^2.
double policy_error(std::span<const double> ideal_t, std::span<const double> prescribed_t);
// Prescriptions aligned by contract id; mismatched ids are rejected.
double policy_error(std::span<const Prescription> prescribed, std::span<const Prescription> ideal);

// (1/n) sum_i c_i(t_hat*_i) / c_i(t*_i), both costs read from the true curve.
double policy_cost_ratio(std::span<const double> prescribed_cost, std::span<const double> ideal_cost);

// True cost tables of a test population and its oracle prescriptions.
struct TrueCosts {
    std::vector<std::size_t> ids;
    RowMatrix table;  // ids x grid
    std::vector<Prescription> ideal;

    static TrueCosts build(const Oracle& oracle, std::span<const std::size_t> ids, const CostParams& cp,
                           const TreatmentGrid& grid, Execution exec = Execution::kParallel);
    // Sets true_cost of each prescription from the table; prescriptions must follow `ids`.
    void fill(std::span<Prescription> prescribed, const TreatmentGrid& grid) const;
};

double policy_cost_ratio(std::span<const Prescription> prescribed, const TrueCosts& truth, const TreatmentGrid& grid);
double policy_cost_ratio(std::span<const Prescription> prescribed, const Oracle& oracle, const CostParams& cp,
                         const TreatmentGrid& grid);

}  // namespace maintcause
