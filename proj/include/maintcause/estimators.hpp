#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "maintcause/datagen.hpp"
#include "maintcause/domain.hpp"
#include "maintcause/kernels.hpp"
#include "maintcause/nncore.hpp"

namespace maintcause {

enum class EstimatorKind : std::uint8_t { kSupervised, kScigan };

std::string_view to_string(EstimatorKind k);  // "mlp" / "scigan"
EstimatorKind parse_estimator_kind(std::string_view s);

enum class Execution : std::uint8_t { kSerial, kParallel };

// g(x, t) = E[outcome(t) | X = x].
class OutcomeEstimator {
public:
    virtual ~OutcomeEstimator() = default;

    virtual OutcomeKind outcome() const = 0;
    virtual std::string name() const = 0;
    virtual double predict(std::span<const double> x, double t) const = 0;
    // rows(x) x |t| table of predictions.
    virtual RowMatrix predict_curves(const nn::Matrix& x, std::span<const double> t,
                                     Execution exec = Execution::kParallel) const;
};

// Observed (x, t, y) triples of one split for one outcome.
struct ObservedData {
    nn::Matrix x;
    Eigen::VectorXd t;
    Eigen::VectorXd y;

    Eigen::Index size() const { return x.rows(); }
};

ObservedData observed(const Dataset& data, Split split, OutcomeKind kind);

// Affine map of PM frequency onto [-1, 1] and standardization of the target.
struct InputScaling {
    double t_center = kMaxPmFrequency / 2.0;
    double t_half_range = kMaxPmFrequency / 2.0;
    double y_mean = 0.0;
    double y_std = 1.0;

    double scale_t(double t) const { return (t - t_center) / t_half_range; }
    double scale_y(double y) const { return (y - y_mean) / y_std; }
    double unscale_y(double y) const { return y_mean + y_std * y; }

    static InputScaling fit(const Eigen::VectorXd& y_train);
};

// Network over [x, scaled t] producing a standardized outcome.
class NetEstimator final : public OutcomeEstimator {
public:
    NetEstimator() = default;
    NetEstimator(EstimatorKind kind, OutcomeKind outcome, nn::Mlp net, InputScaling scaling);

    OutcomeKind outcome() const override { return outcome_; }
    std::string name() const override;
    double predict(std::span<const double> x, double t) const override;
    RowMatrix predict_curves(const nn::Matrix& x, std::span<const double> t,
                             Execution exec = Execution::kParallel) const override;
    // Predictions at paired (x_i, t_i).
    Eigen::VectorXd predict_pairs(const nn::Matrix& x, const Eigen::VectorXd& t) const;

    EstimatorKind kind() const { return kind_; }
    const nn::Mlp& net() const { return net_; }
    const InputScaling& scaling() const { return scaling_; }

private:
    EstimatorKind kind_ = EstimatorKind::kSupervised;
    OutcomeKind outcome_ = OutcomeKind::kOverhauls;
    nn::Mlp net_;
    InputScaling scaling_;
};

// Test and diagnostic estimator backed by an arbitrary function.
class FunctionEstimator final : public OutcomeEstimator {
public:
    using Fn = std::function<double(std::span<const double>, double)>;
    FunctionEstimator(OutcomeKind outcome, std::string name, Fn fn)
        : outcome_(outcome), name_(std::move(name)), fn_(std::move(fn)) {}

    OutcomeKind outcome() const override { return outcome_; }
    std::string name() const override { return name_; }
    double predict(std::span<const double> x, double t) const override { return fn_(x, t); }

private:
    OutcomeKind outcome_;
    std::string name_;
    Fn fn_;
};

// Exposes the generator's true curves through the estimator interface. The
// contract is recognized by its exact feature vector.
class OracleEstimator final : public OutcomeEstimator {
public:
    OracleEstimator(const Dataset& data, const Oracle& oracle, OutcomeKind outcome);

    OutcomeKind outcome() const override { return outcome_; }
    std::string name() const override { return "oracle"; }
    double predict(std::span<const double> x, double t) const override;

private:
    const Oracle* oracle_;
    OutcomeKind outcome_;
    std::map<std::vector<double>, std::size_t> ids_;
};

// ---------------------------------------------------------------------------
// Training configuration.

// Hyperparameter grid searched on validation MSE of observed outcomes.
struct SearchGrid {
    std::vector<double> learning_rates{0.01, 0.003};
    std::vector<int> hidden_widths{32, 64};
    int hidden_layers = 2;
};

struct SupervisedConfig {
    SearchGrid search;
    nn::TrainConfig train;  // learning_rate is overridden by the search
};

struct SciganConfig {
    int dosage_samples = 6;  // D: factual pair plus D - 1 generated pairs
    int noise_dim = 10;
    double reconstruction_weight = 1.0;
    int augmentation = 5;  // generated pairs per training contract in phase 2
    std::vector<int> generator_hidden{64, 64};
    std::vector<int> discriminator_hidden{64, 64};
    std::size_t gan_epochs = 100;
    std::size_t gan_batch_size = 64;
    double gan_learning_rate = 1e-3;
    nn::OptimizerKind gan_optimizer = nn::OptimizerKind::kAdam;
    // Abort when the discriminator loss stays below collapse_fraction * ln D for
    // collapse_epochs consecutive epochs.
    double collapse_fraction = 0.1;
    std::size_t collapse_epochs = 10;
    SupervisedConfig inference;  // phase-2 network

    void validate() const;
};

struct EstimatorConfig {
    SupervisedConfig supervised;
    SciganConfig scigan;
};

nlohmann::json to_json(const SupervisedConfig& c);
nlohmann::json to_json(const SciganConfig& c);
SupervisedConfig supervised_config_from_json(const nlohmann::json& j);
SciganConfig scigan_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Fitting.

struct SearchRecord {
    double learning_rate = 0.0;
    int hidden_width = 0;
    double valid_mse = 0.0;  // original outcome units
};

struct FitResult {
    NetEstimator estimator;
    std::vector<nn::EpochRecord> history;  // of the selected configuration
    std::vector<SearchRecord> search;
    double valid_mse = 0.0;  // factual validation MSE, original units
};

struct GanEpoch {
    std::size_t epoch = 0;
    double discriminator_loss = 0.0;
    double generator_loss = 0.0;
    double reconstruction_mse = 0.0;  // standardized units
    double discriminator_accuracy = 0.0;
};

// Phase-1 networks plus the data scaling they were trained under.
struct SciganComponents {
    nn::Mlp generator;  // sigmoid output, mapped onto [outcome_lo, outcome_hi]
    nn::Mlp discriminator;
    InputScaling scaling;
    int dosage_samples = 0;
    int noise_dim = 0;
    // Generated outcomes stay within [0, largest observed training outcome] (standardized units here).
    double outcome_lo = 0.0;
    double outcome_hi = 1.0;

    double generated_outcome(double sigmoid_out) const { return outcome_lo + (outcome_hi - outcome_lo) * sigmoid_out; }

    // Counterfactual outcome (original units) for each row at target dosage.
    Eigen::VectorXd generate(const nn::Matrix& x, const Eigen::VectorXd& t_factual, const Eigen::VectorXd& y_factual,
                             const Eigen::VectorXd& t_target, std::uint64_t seed) const;
    // Fraction of fresh dosage sets in which the discriminator picks the factual slot.
    double discriminator_accuracy(const ObservedData& data, std::uint64_t seed) const;
};

struct SciganFit {
    FitResult fit;
    SciganComponents components;
    std::vector<GanEpoch> gan_history;
};

FitResult fit_supervised(const ObservedData& train, const ObservedData& valid, OutcomeKind kind,
                         const SupervisedConfig& cfg, std::uint64_t seed);

SciganFit fit_scigan(const ObservedData& train, const ObservedData& valid, OutcomeKind kind, const SciganConfig& cfg,
                     std::uint64_t seed);

// Phase 1 alone: adversarial training of generator and discriminator.
SciganComponents train_counterfactual_gan(const ObservedData& train, const SciganConfig& cfg, std::uint64_t seed,
                                          std::vector<GanEpoch>* history = nullptr);

// t -> (1/n) sum_i e.predict(x_i, t).
class AverageEffect {
public:
    AverageEffect(const OutcomeEstimator& e, nn::Matrix population);

    double operator()(double t) const;
    Eigen::VectorXd curve(std::span<const double> t, Execution exec = Execution::kParallel) const;
    const OutcomeEstimator& estimator() const { return *estimator_; }

private:
    const OutcomeEstimator* estimator_;
    nn::Matrix population_;
};

AverageEffect average_effect_estimator(const OutcomeEstimator& e, const nn::Matrix& population);

// Checkpoint envelope: estimator kind, outcome kind, grid, training config and network.
inline constexpr int kEstimatorSchemaVersion = 1;

nlohmann::json to_json(const NetEstimator& e, const TreatmentGrid& grid, const nlohmann::json& train_config);
NetEstimator estimator_from_json(const nlohmann::json& j);

}  // namespace maintcause
