#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maintcause/datagen.hpp"
#include "maintcause/domain.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/kernels.hpp"

namespace maintcause {

enum class PolicyName : std::uint8_t { kSciganIte, kMlpIte, kSciganAte, kOracle };

std::string_view to_string(PolicyName p);  // "SCIGAN-ITE", "MLP-ITE", "SCIGAN-ATE", "ORACLE"
PolicyName parse_policy(std::string_view s);
inline constexpr PolicyName kAllPolicies[] = {PolicyName::kSciganIte, PolicyName::kMlpIte, PolicyName::kSciganAte,
                                              PolicyName::kOracle};

// Estimated total cost per running period along the treatment grid.
struct CostCurve {
    std::vector<double> costs;  // aligned with grid points
    std::size_t argmin_index = 0;
    double argmin_t = 0.0;
    double argmin_cost = 0.0;

    // Minimum over the grid, smallest t among points within kArgminTolerance of it.
    static CostCurve from_costs(std::vector<double> costs, const TreatmentGrid& grid);
};

struct Prescription {
    std::uint64_t contract_id = 0;
    PolicyName policy = PolicyName::kOracle;
    double prescribed_t = 0.0;
    double estimated_cost = 0.0;
    double true_cost = 0.0;  // filled by evaluation; NaN until then
};

// A population of contracts: ids and their feature rows.
struct Population {
    std::vector<std::size_t> ids;
    nn::Matrix x;

    std::size_t size() const { return ids.size(); }
    static Population of(const Dataset& data, std::span<const std::size_t> ids);
};

CostCurve cost_curve(const OutcomeEstimator& eo, const OutcomeEstimator& ef, std::span<const double> x,
                     const CostParams& cp, const TreatmentGrid& grid);

// Estimated cost table (population x grid) from the two estimators.
RowMatrix estimated_cost_table(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const nn::Matrix& x,
                               const CostParams& cp, const TreatmentGrid& grid, Execution exec = Execution::kParallel);

// Per-contract argmin of its own estimated cost curve.
std::vector<Prescription> prescribe_ite(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const Population& pop,
                                        const CostParams& cp, const TreatmentGrid& grid, PolicyName name,
                                        Execution exec = Execution::kParallel);

// One t* minimizing the population-mean estimated cost, given to every contract.
// estimated_cost is each contract's own estimated cost at t*.
std::vector<Prescription> prescribe_ate(const OutcomeEstimator& eo, const OutcomeEstimator& ef, const Population& pop,
                                        const CostParams& cp, const TreatmentGrid& grid, PolicyName name,
                                        Execution exec = Execution::kParallel);

// True cost table of test contracts from the oracle curves.
RowMatrix true_cost_table(const Oracle& oracle, std::span<const std::size_t> ids, const CostParams& cp,
                          const TreatmentGrid& grid, Execution exec = Execution::kParallel);

// Argmin of each test contract's true cost curve. Rejects non-test contracts.
std::vector<Prescription> prescribe_oracle(const Oracle& oracle, std::span<const std::size_t> ids,
                                           const CostParams& cp, const TreatmentGrid& grid,
                                           Execution exec = Execution::kParallel);

}  // namespace maintcause
