#include "maintcause/policy.hpp"

#include <cmath>
#include <limits>

#include "maintcause/errors.hpp"

namespace maintcause {

namespace {

void require_finite(const RowMatrix& m, const OutcomeEstimator& e) {
    if (!m.allFinite()) throw DataError("estimator '" + e.name() + "' produced a non-finite prediction");
}

std::vector<Prescription> from_argmin(const RowMatrix& costs, std::span<const std::size_t> ids,
                                      const std::vector<std::size_t>& best, const TreatmentGrid& grid, PolicyName p) {
    std::vector<Prescription> out(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto k = best[r];
        out[r] = {ids[r], p, grid[k], costs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)),
                  std::numeric_limits<double>::quiet_NaN()};
    }
    return out;
}

}  // namespace

std::string_view to_string(PolicyName p) {
    switch (p) {
        case PolicyName::kSciganIte: return "SCIGAN-ITE";
        case PolicyName::kMlpIte: return "MLP-ITE";
        case PolicyName::kSciganAte: return "SCIGAN-ATE";
        case PolicyName::kOracle: return "ORACLE";
    }
    return "?";
}

PolicyName parse_policy(std::string_view s) {
    for (auto p : kAllPolicies) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

CostCurve CostCurve::from_costs(std::vector<double> costs, const TreatmentGrid& grid) {
    if (costs.size() != grid.size()) throw DataError("cost curve length does not match the grid");
    RowMatrix row = Eigen::Map<const RowMatrix>(costs.data(), 1, static_cast<Eigen::Index>(costs.size()));
    CostCurve c;
    c.argmin_index = kernels::serial::row_argmin(row).front();
    c.argmin_t = grid[c.argmin_index];
    c.argmin_cost = costs[c.argmin_index];
    c.costs = std::move(costs);
    return c;
}

Population Population::of(const Dataset& data, std::span<const std::size_t> ids) {
    return {std::vector<std::size_t>(ids.begin(), ids.end()), data.feature_matrix(ids)};
}

CostCurve cost_curve(const OutcomeEstimator& eo, const OutcomeEstimator& ef, std::span<const double> x,
                     const CostParams& cp, const TreatmentGrid& grid) {
    std::vector<double> costs(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double o = eo.predict(x, grid[k]);
        const double f = ef.predict(x, grid[k]);
        if (!std::isfinite(o)) throw DataError("estimator '" + eo.name() + "' produced a non-finite prediction");
        if (!std::isfinite(f)) throw DataError("estimator '" + ef.name() + "' produced a non-finite prediction");
        costs[k] = cp.c_pm * grid[k] + cp.c_overhaul * o + cp.c_failure * f;
    }
    return CostCurve::from_costs(std::move(costs), grid);
}

RowMatrix estimated_cost_table(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const nn::Matrix& x,
                               const CostParams& cp, const TreatmentGrid& grid, Execution exec) {
    const RowMatrix o = eo.predict_curves(x, grid.points(), exec);
    require_finite(o, eo);
    const RowMatrix f = ef.predict_curves(x, grid.points(), exec);
    require_finite(f, ef);
    return exec == Execution::kParallel ? kernels::parallel::cost_table(o, f, grid.points(), cp)
                                        : kernels::serial::cost_table(o, f, grid.points(), cp);
}

std::vector<Prescription> prescribe_ite(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const Population& pop,
                                        const CostParams& cp, const TreatmentGrid& grid, PolicyName name,
                                        Execution exec) {
    if (pop.size() == 0) throw DataError("prescribe_ite: empty population");
    const RowMatrix costs = estimated_cost_table(eo, ef, pop.x, cp, grid, exec);
    const auto best = exec == Execution::kParallel ? kernels::parallel::row_argmin(costs)
                                                   : kernels::serial::row_argmin(costs);
    return from_argmin(costs, pop.ids, best, grid, name);
}

std::vector<Prescription> prescribe_ate(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const Population& pop,
                                        const CostParams& cp, const TreatmentGrid& grid, PolicyName name,
                                        Execution exec) {
    if (pop.size() == 0) throw DataError("prescribe_ate: empty population");
    const RowMatrix costs = estimated_cost_table(eo, ef, pop.x, cp, grid, exec);
    const Eigen::VectorXd mean = exec == Execution::kParallel ? kernels::parallel::column_mean(costs)
                                                              : kernels::serial::column_mean(costs);
    const auto curve = CostCurve::from_costs(std::vector<double>(mean.data(), mean.data() + mean.size()), grid);
    const std::vector<std::size_t> best(pop.size(), curve.argmin_index);
    return from_argmin(costs, pop.ids, best, grid, name);
}

RowMatrix true_cost_table(const Oracle& oracle, std::span<const std::size_t> ids, const CostParams& cp,
                          const TreatmentGrid& grid, Execution exec) {
    oracle.require_test(ids);
    if (exec == Execution::kParallel) {
        return kernels::parallel::cost_table(oracle.curves(OutcomeKind::kOverhauls, ids, grid),
                                             oracle.curves(OutcomeKind::kFailures, ids, grid), grid.points(), cp);
    }
    return kernels::serial::cost_table(oracle.curves_serial(OutcomeKind::kOverhauls, ids, grid),
                                       oracle.curves_serial(OutcomeKind::kFailures, ids, grid), grid.points(), cp);
}

std::vector<Prescription> prescribe_oracle(const Oracle& oracle, std::span<const std::size_t> ids,
                                           const CostParams& cp, const TreatmentGrid& grid, Execution exec) {
    const RowMatrix costs = true_cost_table(oracle, ids, cp, grid, exec);
    const auto best = exec == Execution::kParallel ? kernels::parallel::row_argmin(costs)
                                                   : kernels::serial::row_argmin(costs);
    auto out = from_argmin(costs, ids, best, grid, PolicyName::kOracle);
    for (auto& p : out) p.true_cost = p.estimated_cost;
    return out;
}

}  // namespace maintcause
