#include "maintcause/eval.hpp"

#include <cmath>
#include <string>

#include "maintcause/errors.hpp"

namespace maintcause {

namespace {

void require_aligned(std::span<const Prescription> a, std::span<const Prescription> b) {
    if (a.size() != b.size()) throw DataError("prescription sets have different sizes");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].contract_id != b[i].contract_id) {
            throw DataError("prescription id mismatch at position " + std::to_string(i) + ": " +
                            std::to_string(a[i].contract_id) + " vs " + std::to_string(b[i].contract_id));
        }
    }
}

std::size_t grid_index(const TreatmentGrid& grid, double t) {
    const auto k = grid.index_of(t);
    if (k == grid.size()) throw DataError("prescribed frequency " + std::to_string(t) + " is not on the grid");
    return k;
}

}  // namespace

double mise(const RowMatrix& truth, const RowMatrix& estimate, const TreatmentGrid& grid, Execution exec) {
    if (truth.cols() != static_cast<Eigen::Index>(grid.size()) || estimate.cols() != truth.cols() ||
        estimate.rows() != truth.rows()) {
        throw DataError("mise: curve tables do not match the grid or each other");
    }
    if (truth.rows() == 0) throw DataError("mise: empty population");
    const Eigen::VectorXd per_row = exec == Execution::kParallel
                                        ? kernels::parallel::integrated_squared_error(truth, estimate, grid.step())
                                        : kernels::serial::integrated_squared_error(truth, estimate, grid.step());
    double s = 0.0;
    for (Eigen::Index i = 0; i < per_row.size(); ++i) s += per_row[i];
    return s / static_cast<double>(per_row.size());
}

double mise(const OutcomeEstimator& est, const RowMatrix& truth, const nn::Matrix& x, const TreatmentGrid& grid,
            Execution exec) {
    if (x.rows() != truth.rows()) throw DataError("mise: population and oracle curves differ in size");
    return mise(truth, est.predict_curves(x, grid.points(), exec), grid, exec);
}

double policy_error(std::span<const double> ideal_t, std::span<const double> prescribed_t) {
    if (ideal_t.size() != prescribed_t.size() || ideal_t.empty()) {
        throw DataError("policy_error needs equally sized, non-empty inputs");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < ideal_t.size(); ++i) {
        const double d = ideal_t[i] - prescribed_t[i];
        s += d * d;
    }
    return s / static_cast<double>(ideal_t.size());
}

double policy_error(std::span<const Prescription> prescribed, std::span<const Prescription> ideal) {
    require_aligned(prescribed, ideal);
    std::vector<double> a, b;
    a.reserve(ideal.size());
    b.reserve(ideal.size());
    for (std::size_t i = 0; i < ideal.size(); ++i) {
        a.push_back(ideal[i].prescribed_t);
        b.push_back(prescribed[i].prescribed_t);
    }
    return policy_error(a, b);
}

double policy_cost_ratio(std::span<const double> prescribed_cost, std::span<const double> ideal_cost) {
    if (prescribed_cost.size() != ideal_cost.size() || ideal_cost.empty()) {
        throw DataError("policy_cost_ratio needs equally sized, non-empty inputs");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < ideal_cost.size(); ++i) {
        if (!(ideal_cost[i] > 0.0)) throw DataError("policy_cost_ratio: ideal cost must be strictly positive");
        s += prescribed_cost[i] / ideal_cost[i];
    }
    return s / static_cast<double>(ideal_cost.size());
}

TrueCosts TrueCosts::build(const Oracle& oracle, std::span<const std::size_t> ids, const CostParams& cp,
                           const TreatmentGrid& grid, Execution exec) {
    TrueCosts tc;
    tc.ids.assign(ids.begin(), ids.end());
    tc.table = true_cost_table(oracle, ids, cp, grid, exec);
    const auto best = exec == Execution::kParallel ? kernels::parallel::row_argmin(tc.table)
                                                   : kernels::serial::row_argmin(tc.table);
    tc.ideal.resize(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const double c = tc.table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(best[r]));
        tc.ideal[r] = {ids[r], PolicyName::kOracle, grid[best[r]], c, c};
    }
    return tc;
}

void TrueCosts::fill(std::span<Prescription> prescribed, const TreatmentGrid& grid) const {
    if (prescribed.size() != ids.size()) throw DataError("prescriptions do not cover the evaluated population");
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (prescribed[r].contract_id != ids[r]) throw DataError("prescription order does not match the population");
        const auto k = grid_index(grid, prescribed[r].prescribed_t);
        prescribed[r].true_cost = table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    }
}

double policy_cost_ratio(std::span<const Prescription> prescribed, const TrueCosts& truth, const TreatmentGrid& grid) {
    require_aligned(prescribed, truth.ideal);
    std::vector<double> num(prescribed.size()), den(prescribed.size());
    for (std::size_t r = 0; r < prescribed.size(); ++r) {
        const auto k = grid_index(grid, prescribed[r].prescribed_t);
        num[r] = truth.table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
        den[r] = truth.ideal[r].true_cost;
    }
    return policy_cost_ratio(num, den);
}

double policy_cost_ratio(std::span<const Prescription> prescribed, const Oracle& oracle, const CostParams& cp,
                         const TreatmentGrid& grid) {
    std::vector<std::size_t> ids;
    ids.reserve(prescribed.size());
    for (const auto& p : prescribed) ids.push_back(static_cast<std::size_t>(p.contract_id));
    return policy_cost_ratio(prescribed, TrueCosts::build(oracle, ids, cp, grid), grid);
}

}  // namespace maintcause
