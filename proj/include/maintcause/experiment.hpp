#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maintcause/domain.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/policy.hpp"

namespace maintcause {

inline constexpr int kSchemaVersion = 1;

struct GridSpec {
    double t_max = kMaxPmFrequency;
    double step = 0.1;

    TreatmentGrid build() const { return TreatmentGrid(t_max, step); }
};

struct ExperimentConfig {
    std::size_t n = 4000;
    std::vector<double> lambdas{0.0, 10.0, 20.0, 30.0};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    GridSpec grid;
    CostParams costs;
    EstimatorConfig estimators;
    std::vector<PolicyName> policies{std::begin(kAllPolicies), std::end(kAllPolicies)};
    bool diagnostics = false;  // per-contract prescriptions in cell files
    std::string output_dir = "out";

    // Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys take defaults; unknown keys and bad values raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON of the config without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Metric key for one estimator on one outcome, e.g. "scigan/overhauls".
std::string model_key(EstimatorKind e, OutcomeKind k);

struct CellResult {
    std::uint64_t seed = 0;
    double lambda = 0.0;
    bool ok = false;
    std::string error;
    std::map<std::string, double> mise;       // by model_key
    std::map<std::string, double> valid_mse;  // by model_key
    std::map<std::string, double> pe;         // by policy name
    std::map<std::string, double> pcr;
    std::map<std::string, double> mean_t;
    std::vector<Prescription> prescriptions;  // only with diagnostics
};

nlohmann::json to_json(const CellResult& c);
CellResult cell_from_json(const nlohmann::json& j);

using Logger = std::function<void(const std::string&)>;

// Fitted estimators of one cell, indexed by outcome (overhauls, failures).
struct CellModels {
    NetEstimator mlp[2];
    NetEstimator scigan[2];
};

// Seed of an estimator fit inside a cell, shared by run_cell and the CLI.
std::uint64_t estimator_seed(std::uint64_t seed, EstimatorKind e, OutcomeKind k);

// MISE, validation MSE and every configured policy's PE/PCR on the test split.
// Throws on failure.
CellResult score_cell(const ExperimentConfig& cfg, std::uint64_t seed, double lambda, const GeneratedData& g,
                      const CellModels& m);

// Generate, fit both estimators for both outcomes, prescribe and score one (seed, lambda).
// Stage failures are captured in the result instead of thrown.
CellResult run_cell(const ExperimentConfig& cfg, std::uint64_t seed, double lambda, const Logger& log = {});

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
    double median = 0.0;
    std::vector<double> values;  // in seed order
};

Summary summarize(std::vector<double> values);

struct LambdaAggregate {
    double lambda = 0.0;
    std::size_t completed = 0;
    std::map<std::string, Summary> mise;
    std::map<std::string, Summary> pe;
    std::map<std::string, Summary> pcr;
};

struct EvalReport {
    std::string config_hash;
    ExperimentConfig config;
    std::vector<CellResult> cells;  // sorted by (lambda, seed)
    std::vector<LambdaAggregate> aggregates;
};

// Deterministic fold over cells sorted by (lambda, seed).
EvalReport aggregate(const ExperimentConfig& cfg, std::vector<CellResult> cells);

nlohmann::json to_json(const EvalReport& r);
// Structural and range checks; returns the list of problems (empty when valid).
std::vector<std::string> validate_report(const nlohmann::json& j);

// Runs every (lambda, seed) cell. With a cell directory, finished cells are read back
// instead of recomputed and new ones are written there.
EvalReport run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& cell_dir = {},
                          const Logger& log = {});

// "lambda,policy_or_model,mean,std" tables.
std::string mise_csv(const EvalReport& r);
std::string pe_csv(const EvalReport& r);
std::string pcr_csv(const EvalReport& r);

}  // namespace maintcause
