#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace maintcause {

inline constexpr int kMachineTypes = 7;
inline constexpr int kContractTypes = 2;
inline constexpr std::size_t kNumericCovariates = 5;
// One-hot machine type, one-hot contract type, standardized numerics.
inline constexpr std::size_t kFeatureDim = kMachineTypes + kContractTypes + kNumericCovariates;

inline constexpr double kMaxPmFrequency = 20.0;

struct Range {
    double lo;
    double hi;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

// Machine and contract characteristics as recorded at contract start.
struct Covariates {
    int machine_type = 1;  // {1..7}
    double age_at_start = 0.0;
    double hours_at_start = 2500.0;
    double hours_during = 0.0;
    double avg_hours_per_year = 300.0;
    int contract_type = 1;  // {1, 2}
    double duration_days = 180.0;

    // Numeric fields in feature order.
    std::array<double, kNumericCovariates> numerics() const {
        return {age_at_start, hours_at_start, hours_during, avg_hours_per_year, duration_days};
    }
};

namespace covariate_ranges {
inline constexpr Range kAge{0.0, 39.0};
inline constexpr Range kHoursAtStart{2500.0, 110000.0};
inline constexpr Range kHoursDuring{0.0, 186000.0};
inline constexpr Range kAvgHoursPerYear{300.0, 8500.0};
inline constexpr Range kDurationDays{180.0, 5850.0};
inline constexpr std::array<Range, kNumericCovariates> kNumeric{
    kAge, kHoursAtStart, kHoursDuring, kAvgHoursPerYear, kDurationDays};
inline constexpr std::array<std::string_view, kNumericCovariates> kNumericNames{
    "age_at_start", "hours_at_start", "hours_during", "avg_hours_per_year", "duration_days"};
}  // namespace covariate_ranges

// Throws DataError if a field is outside its declared domain.
void validate(const Covariates& c);

// Per-column mean and standard deviation of the numeric covariates.
struct StandardizationStats {
    std::array<double, kNumericCovariates> mean{};
    std::array<double, kNumericCovariates> stddev{};

    // Population statistics; a zero-variance column is rejected.
    static StandardizationStats fit(std::span<const Covariates> rows);
};

struct FeatureVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> view() const { return values; }
};

FeatureVector encode_features(const Covariates& c, const StandardizationStats& stats);

struct Contract {
    std::uint64_t id = 0;
    Covariates covariates;
    FeatureVector features;
    double pm_freq = 0.0;
    double overhauls = 0.0;
    double failures = 0.0;
};

enum class Split : std::uint8_t { kTrain, kValid, kTest };

enum class OutcomeKind : std::uint8_t { kOverhauls, kFailures };

std::string_view to_string(OutcomeKind k);
OutcomeKind parse_outcome_kind(std::string_view s);

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct CostParams {
    double c_pm = 73.0;
    double c_overhaul = 207.0;
    double c_failure = 104.0;

    // Finite and non-negative; throws ConfigError otherwise.
    void validate() const;
    bool all_positive() const { return c_pm > 0 && c_overhaul > 0 && c_failure > 0; }
    CostParams scaled(double alpha) const { return {alpha * c_pm, alpha * c_overhaul, alpha * c_failure}; }
};

// c_pm * t + c_overhaul * o + c_failure * f.
double total_cost(double t, double o, double f, const CostParams& cp);

// Uniform discretization of the PM-frequency range [0, t_max].
class TreatmentGrid {
public:
    explicit TreatmentGrid(double t_max = kMaxPmFrequency, double step = 0.1);

    double t_min() const { return 0.0; }
    double t_max() const { return t_max_; }
    double step() const { return step_; }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t k) const { return points_[k]; }
    std::span<const double> points() const { return points_; }

    // Index of the grid point equal to t within 1e-9, or size() if none.
    std::size_t index_of(double t) const;
    bool same_as(const TreatmentGrid& other) const;

private:
    double t_max_;
    double step_;
    std::vector<double> points_;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double train_fraction = 0.50;
    double valid_fraction = 0.25;
    double test_fraction = 0.25;
    std::string covariate_distribution = "independent-uniform";
};

struct Dataset {
    std::vector<Contract> contracts;  // contracts[i].id == i
    std::vector<Split> splits;        // aligned with contracts
    StandardizationStats stats;
    DatasetMeta meta;

    std::size_t size() const { return contracts.size(); }
    std::vector<std::size_t> indices(Split s) const;
    // Rows are contracts[rows[i]].features.
    Eigen::MatrixXd feature_matrix(std::span<const std::size_t> rows) const;
};

// Split sizes for n contracts: round(n/2), round(n/4), remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n);

}  // namespace maintcause
