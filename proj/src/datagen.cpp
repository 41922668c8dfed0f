#include "maintcause/datagen.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "maintcause/errors.hpp"
#include "maintcause/rng.hpp"

namespace maintcause {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

std::vector<double> uniform_weights(rng::Engine& e, std::size_t dim) {
    std::vector<double> w(dim);
    for (auto& v : w) {
        // Open interval (0, 1).
        do {
            v = rng::uniform(e, 0.0, 1.0);
        } while (v == 0.0);
    }
    return w;
}

}  // namespace

TrueOutcomeModel TrueOutcomeModel::draw(std::size_t dim, std::uint64_t seed) {
    auto e = rng::engine(seed, rng::Stream::kOutcomeWeights);
    TrueOutcomeModel m;
    m.v_o = uniform_weights(e, dim);
    m.w_o = uniform_weights(e, dim);
    m.v_f = uniform_weights(e, dim);
    m.w_f = uniform_weights(e, dim);
    return m;
}

double TrueOutcomeModel::base_logit(OutcomeKind k, std::span<const double> x) const {
    return dot(k == OutcomeKind::kOverhauls ? v_o : v_f, x);
}

double TrueOutcomeModel::slope(OutcomeKind k, std::span<const double> x) const {
    return kPmSlope * logistic(dot(k == OutcomeKind::kOverhauls ? w_o : w_f, x));
}

double true_outcome(OutcomeKind k, const TrueOutcomeModel& m, std::span<const double> x, double eps, double t) {
    // Same association as kernels::logistic_curves so grid curves match point evaluations exactly.
    const double base = m.base_logit(k, x) + eps;
    return m.scale(k) * logistic(base - m.slope(k, x) * t);
}

double true_overhauls(const TrueOutcomeModel& m, std::span<const double> x, double eps, double t) {
    return true_outcome(OutcomeKind::kOverhauls, m, x, eps, t);
}

double true_failures(const TrueOutcomeModel& m, std::span<const double> x, double eps, double t) {
    return true_outcome(OutcomeKind::kFailures, m, x, eps, t);
}

BiasModel BiasModel::draw(std::size_t dim, double lambda, std::uint64_t seed) {
    if (!(lambda >= 0.0)) throw ConfigError("selection-bias level lambda must be >= 0");
    auto e = rng::engine(seed, rng::Stream::kBiasWeights);
    return {uniform_weights(e, dim), lambda};
}

double BiasModel::delta(std::span<const double> x) const { return logistic(dot(w_b, x)); }

BetaParams BiasModel::params(double delta) const { return treatment_beta(lambda, delta); }

BetaParams treatment_beta(double lambda, double delta) {
    return {1.0 + lambda * delta / 10.0, 1.0 + lambda * delta};
}

double assign_treatment(const BiasModel& b, std::span<const double> x, std::uint64_t seed,
                        std::uint64_t contract_id) {
    const BetaParams p = b.params(b.delta(x));
    auto e = rng::engine(seed, rng::Stream::kTreatment, contract_id);
    return kMaxPmFrequency * rng::beta(e, p.alpha, p.beta);
}

std::vector<Covariates> sample_covariates(std::size_t n, std::uint64_t seed) {
    namespace cr = covariate_ranges;
    std::vector<Covariates> rows(n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        auto e = rng::engine(seed, rng::Stream::kCovariates, i);
        Covariates c;
        c.machine_type = std::uniform_int_distribution<int>(1, kMachineTypes)(e);
        c.age_at_start = rng::uniform(e, cr::kAge.lo, cr::kAge.hi);
        c.hours_at_start = rng::uniform(e, cr::kHoursAtStart.lo, cr::kHoursAtStart.hi);
        c.hours_during = rng::uniform(e, cr::kHoursDuring.lo, cr::kHoursDuring.hi);
        c.avg_hours_per_year = rng::uniform(e, cr::kAvgHoursPerYear.lo, cr::kAvgHoursPerYear.hi);
        c.contract_type = std::uniform_int_distribution<int>(1, kContractTypes)(e);
        c.duration_days = rng::uniform(e, cr::kDurationDays.lo, cr::kDurationDays.hi);
        rows[i] = c;
    }
    return rows;
}

std::vector<Split> assign_splits(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto e = rng::engine(seed, rng::Stream::kSplit);
    std::shuffle(order.begin(), order.end(), e);
    const auto sizes = split_sizes(n);
    std::vector<Split> splits(n, Split::kTest);
    for (std::size_t r = 0; r < n; ++r) {
        if (r < sizes[0]) {
            splits[order[r]] = Split::kTrain;
        } else if (r < sizes[0] + sizes[1]) {
            splits[order[r]] = Split::kValid;
        }
    }
    return splits;
}

void encode_dataset(Dataset& data) {
    for (auto& c : data.contracts) c.features = encode_features(c.covariates, data.stats);
}

Oracle::Oracle(TrueOutcomeModel model, BiasModel bias, std::vector<ContractNoise> noise, const Dataset& data)
    : model_(std::move(model)), bias_(std::move(bias)), noise_(std::move(noise)), splits_(data.splits) {
    if (noise_.size() != data.size()) throw DataError("oracle noise count does not match the dataset");
    features_.reserve(data.size());
    for (const auto& c : data.contracts) {
        if (c.features.size() != model_.dim()) throw DataError("oracle weight dimension does not match features");
        features_.push_back(c.features.values);
    }
}

double Oracle::outcome(OutcomeKind k, std::size_t id, double t) const {
    return true_outcome(k, model_, features_.at(id), noise_.at(id).of(k), t);
}

void Oracle::curve_inputs(OutcomeKind k, std::span<const std::size_t> ids, std::vector<double>& base,
                          std::vector<double>& slope) const {
    base.resize(ids.size());
    slope.resize(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto& x = features_.at(ids[r]);
        base[r] = model_.base_logit(k, x) + noise_[ids[r]].of(k);
        slope[r] = model_.slope(k, x);
    }
}

RowMatrix Oracle::curves(OutcomeKind k, std::span<const std::size_t> ids, const TreatmentGrid& grid) const {
    std::vector<double> base, slope;
    curve_inputs(k, ids, base, slope);
    return kernels::parallel::logistic_curves(model_.scale(k), base, slope, grid.points());
}

RowMatrix Oracle::curves_serial(OutcomeKind k, std::span<const std::size_t> ids, const TreatmentGrid& grid) const {
    std::vector<double> base, slope;
    curve_inputs(k, ids, base, slope);
    return kernels::serial::logistic_curves(model_.scale(k), base, slope, grid.points());
}

void Oracle::require_test(std::span<const std::size_t> ids) const {
    for (auto id : ids) {
        if (!is_test(id)) {
            throw DataError("contract " + std::to_string(id) + " is not in the test split; no oracle curve exposed");
        }
    }
}

GeneratedData generate_dataset(std::size_t n, double lambda, std::uint64_t seed) {
    if (n < 8) throw ConfigError("generate_dataset needs n >= 8");
    if (!(lambda >= 0.0)) throw ConfigError("selection-bias level lambda must be >= 0");

    Dataset data;
    data.meta.seed = seed;
    data.meta.lambda = lambda;
    const auto covariates = sample_covariates(n, seed);
    data.splits = assign_splits(n, seed);

    std::vector<Covariates> train_rows;
    for (std::size_t i = 0; i < n; ++i) {
        if (data.splits[i] == Split::kTrain) train_rows.push_back(covariates[i]);
    }
    data.stats = StandardizationStats::fit(train_rows);

    data.contracts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        data.contracts[i].id = i;
        data.contracts[i].covariates = covariates[i];
    }
    encode_dataset(data);

    auto model = TrueOutcomeModel::draw(kFeatureDim, seed);
    auto bias = BiasModel::draw(kFeatureDim, lambda, seed);
    std::vector<ContractNoise> noise(n);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        auto e = rng::engine(seed, rng::Stream::kNoise, i);
        noise[i].overhauls = rng::normal(e);
        noise[i].failures = rng::normal(e);
        auto& c = data.contracts[i];
        const auto x = c.features.view();
        c.pm_freq = assign_treatment(bias, x, seed, i);
        c.overhauls = true_overhauls(model, x, noise[i].overhauls, c.pm_freq);
        c.failures = true_failures(model, x, noise[i].failures, c.pm_freq);
    }

    Oracle oracle(std::move(model), std::move(bias), std::move(noise), data);
    return {std::move(data), std::move(oracle)};
}

}  // namespace maintcause
