#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maintcause/domain.hpp"
#include "maintcause/kernels.hpp"

namespace maintcause {

// Hidden dose-response parameters of the semi-synthetic population.
//
//   overhauls_i(t) = 7 * logistic(v_o.x_i - 0.1 * logistic(w_o.x_i) * t + eps_o,i)
//   failures_i(t)  = 9 * logistic(v_f.x_i - 0.1 * logistic(w_f.x_i) * t + eps_f,i)
//
// Weights are drawn once per experiment seed; noise once per contract and
// shared across all t for that contract.
struct TrueOutcomeModel {
    static constexpr double kOverhaulScale = 7.0;
    static constexpr double kFailureScale = 9.0;
    static constexpr double kPmSlope = 0.1;

    std::vector<double> v_o, w_o, v_f, w_f;

    // Each weight i.i.d. uniform on (0, 1).
    static TrueOutcomeModel draw(std::size_t dim, std::uint64_t seed);

    std::size_t dim() const { return v_o.size(); }
    double scale(OutcomeKind k) const { return k == OutcomeKind::kOverhauls ? kOverhaulScale : kFailureScale; }
    // Logit at t = 0 without noise, and the per-unit-t logit decrease.
    double base_logit(OutcomeKind k, std::span<const double> x) const;
    double slope(OutcomeKind k, std::span<const double> x) const;
};

struct ContractNoise {
    double overhauls = 0.0;
    double failures = 0.0;
    double of(OutcomeKind k) const { return k == OutcomeKind::kOverhauls ? overhauls : failures; }
};

double true_overhauls(const TrueOutcomeModel& m, std::span<const double> x, double eps, double t);
double true_failures(const TrueOutcomeModel& m, std::span<const double> x, double eps, double t);
double true_outcome(OutcomeKind k, const TrueOutcomeModel& m, std::span<const double> x, double eps, double t);

struct BetaParams {
    double alpha;
    double beta;
    double mean() const { return alpha / (alpha + beta); }
};

// Treatment assignment t_i ~ 20 * Beta(1 + lambda*delta_i/10, 1 + lambda*delta_i)
// with delta_i = logistic(w_b . x_i).
struct BiasModel {
    std::vector<double> w_b;
    double lambda = 0.0;

    static BiasModel draw(std::size_t dim, double lambda, std::uint64_t seed);

    double delta(std::span<const double> x) const;
    BetaParams params(double delta) const;
};

BetaParams treatment_beta(double lambda, double delta);

// Deterministic in (seed, contract_id).
double assign_treatment(const BiasModel& b, std::span<const double> x, std::uint64_t seed,
                        std::uint64_t contract_id);

// Independent uniform covariates over their declared ranges; row i depends only on (seed, i).
std::vector<Covariates> sample_covariates(std::size_t n, std::uint64_t seed);

// Ground truth retained by the generator: weights, per-contract noise and features.
class Oracle {
public:
    Oracle() = default;
    Oracle(TrueOutcomeModel model, BiasModel bias, std::vector<ContractNoise> noise, const Dataset& data);

    const TrueOutcomeModel& model() const { return model_; }
    const BiasModel& bias() const { return bias_; }
    const std::vector<ContractNoise>& noise() const { return noise_; }
    std::size_t size() const { return noise_.size(); }

    double outcome(OutcomeKind k, std::size_t id, double t) const;
    // Potential-outcome curves of the listed contracts on the grid (rows follow ids).
    RowMatrix curves(OutcomeKind k, std::span<const std::size_t> ids, const TreatmentGrid& grid) const;
    RowMatrix curves_serial(OutcomeKind k, std::span<const std::size_t> ids, const TreatmentGrid& grid) const;

    bool is_test(std::size_t id) const { return id < splits_.size() && splits_[id] == Split::kTest; }
    // Throws DataError unless every id belongs to the test split.
    void require_test(std::span<const std::size_t> ids) const;

private:
    void curve_inputs(OutcomeKind k, std::span<const std::size_t> ids, std::vector<double>& base,
                      std::vector<double>& slope) const;

    TrueOutcomeModel model_;
    BiasModel bias_;
    std::vector<ContractNoise> noise_;
    std::vector<std::vector<double>> features_;
    std::vector<Split> splits_;
};

struct GeneratedData {
    Dataset dataset;
    Oracle oracle;
};

// Covariates -> split -> standardization (train rows) -> features -> true model
// and bias model -> treatments and observed outcomes for every contract.
GeneratedData generate_dataset(std::size_t n, double lambda, std::uint64_t seed);

// Rebuilds features from raw covariates and the stored statistics.
void encode_dataset(Dataset& data);

// Split assignment: a seeded permutation, first half train, next quarter valid.
std::vector<Split> assign_splits(std::size_t n, std::uint64_t seed);

}  // namespace maintcause
