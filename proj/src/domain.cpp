#include "maintcause/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maintcause/errors.hpp"

namespace maintcause {

namespace {

std::string describe(std::string_view field, double v, Range r) {
    std::ostringstream os;
    os << field << " = " << v << " outside [" << r.lo << ", " << r.hi << "]";
    return os.str();
}

}  // namespace

void validate(const Covariates& c) {
    if (c.machine_type < 1 || c.machine_type > kMachineTypes) {
        throw DataError("unknown machine_type level " + std::to_string(c.machine_type) + " (expected 1..7)");
    }
    if (c.contract_type < 1 || c.contract_type > kContractTypes) {
        throw DataError("unknown contract_type level " + std::to_string(c.contract_type) + " (expected 1..2)");
    }
    const auto values = c.numerics();
    for (std::size_t j = 0; j < kNumericCovariates; ++j) {
        const Range r = covariate_ranges::kNumeric[j];
        if (!std::isfinite(values[j]) || !r.contains(values[j])) {
            throw DataError(describe(covariate_ranges::kNumericNames[j], values[j], r));
        }
    }
}

StandardizationStats StandardizationStats::fit(std::span<const Covariates> rows) {
    if (rows.empty()) throw DataError("cannot standardize an empty split");
    StandardizationStats s;
    const double n = static_cast<double>(rows.size());
    for (const auto& c : rows) {
        const auto v = c.numerics();
        for (std::size_t j = 0; j < kNumericCovariates; ++j) s.mean[j] += v[j];
    }
    for (auto& m : s.mean) m /= n;
    for (const auto& c : rows) {
        const auto v = c.numerics();
        for (std::size_t j = 0; j < kNumericCovariates; ++j) {
            const double d = v[j] - s.mean[j];
            s.stddev[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < kNumericCovariates; ++j) {
        s.stddev[j] = std::sqrt(s.stddev[j] / n);
        if (!(s.stddev[j] > 0.0)) {
            throw DataError("degenerate standardization: column " +
                            std::string(covariate_ranges::kNumericNames[j]) + " has zero variance");
        }
    }
    return s;
}

FeatureVector encode_features(const Covariates& c, const StandardizationStats& stats) {
    validate(c);
    FeatureVector fv;
    fv.values.assign(kFeatureDim, 0.0);
    fv.values[static_cast<std::size_t>(c.machine_type - 1)] = 1.0;
    fv.values[kMachineTypes + static_cast<std::size_t>(c.contract_type - 1)] = 1.0;
    const auto v = c.numerics();
    for (std::size_t j = 0; j < kNumericCovariates; ++j) {
        fv.values[kMachineTypes + kContractTypes + j] = (v[j] - stats.mean[j]) / stats.stddev[j];
    }
    return fv;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kValid: return "valid";
        case Split::kTest: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::kTrain;
    if (s == "valid") return Split::kValid;
    if (s == "test") return Split::kTest;
    throw DataError("unknown split label '" + std::string(s) + "'");
}

std::string_view to_string(OutcomeKind k) {
    return k == OutcomeKind::kOverhauls ? "overhauls" : "failures";
}

OutcomeKind parse_outcome_kind(std::string_view s) {
    if (s == "overhauls") return OutcomeKind::kOverhauls;
    if (s == "failures") return OutcomeKind::kFailures;
    throw DataError("unknown outcome kind '" + std::string(s) + "'");
}

void CostParams::validate() const {
    for (double c : {c_pm, c_overhaul, c_failure}) {
        if (!std::isfinite(c) || c < 0.0) throw ConfigError("cost parameters must be finite and non-negative");
    }
}

double total_cost(double t, double o, double f, const CostParams& cp) {
    if (!(t >= 0.0) || !(o >= 0.0) || !(f >= 0.0)) {
        throw DataError("total_cost: frequency and outcome counts must be non-negative");
    }
    return cp.c_pm * t + cp.c_overhaul * o + cp.c_failure * f;
}

TreatmentGrid::TreatmentGrid(double t_max, double step) : t_max_(t_max), step_(step) {
    if (!(t_max > 0.0) || !(step > 0.0) || !std::isfinite(t_max) || !std::isfinite(step)) {
        throw ConfigError("treatment grid needs positive finite t_max and step");
    }
    const double intervals = t_max / step;
    const double rounded = std::round(intervals);
    if (std::abs(intervals - rounded) > 1e-9 * std::max(1.0, intervals)) {
        throw ConfigError("treatment grid step must divide t_max");
    }
    const auto k_max = static_cast<std::size_t>(rounded);
    points_.resize(k_max + 1);
    for (std::size_t k = 0; k < k_max; ++k) points_[k] = static_cast<double>(k) * step;
    points_[k_max] = t_max;
}

std::size_t TreatmentGrid::index_of(double t) const {
    const double pos = t / step_;
    const double k = std::round(pos);
    if (k < 0 || k >= static_cast<double>(points_.size())) return points_.size();
    const auto idx = static_cast<std::size_t>(k);
    return std::abs(points_[idx] - t) <= 1e-9 ? idx : points_.size();
}

bool TreatmentGrid::same_as(const TreatmentGrid& other) const {
    return t_max_ == other.t_max_ && step_ == other.step_;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        if (splits[i] == s) out.push_back(i);
    }
    return out;
}

Eigen::MatrixXd Dataset::feature_matrix(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kFeatureDim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& f = contracts[rows[r]].features.values;
        for (std::size_t j = 0; j < f.size(); ++j) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = f[j];
    }
    return x;
}

std::array<std::size_t, 3> split_sizes(std::size_t n) {
    const auto train = static_cast<std::size_t>(std::llround(0.50 * static_cast<double>(n)));
    const auto valid = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(n)));
    return {train, valid, n - train - valid};
}

}  // namespace maintcause
