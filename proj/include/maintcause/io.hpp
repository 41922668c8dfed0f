#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "maintcause/datagen.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/policy.hpp"

namespace maintcause::io {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

// Identifies the run that produced a file.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

// "# schema_version=1 config_hash=<h> seed=<s>"
std::string csv_preamble(const Provenance& p);

// Writes through a temporary file and rename.
void write_file(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

// contracts.csv, oracle.bin and meta.json inside dir.
void write_dataset(const fs::path& dir, const GeneratedData& g, const Provenance& p);
struct LoadedData {
    GeneratedData data;
    Provenance provenance;
};
LoadedData read_dataset(const fs::path& dir);

std::string contracts_csv(const Dataset& d, const Provenance& p);
std::vector<std::uint8_t> oracle_bytes(const Oracle& o, const Provenance& p);
nlohmann::json dataset_meta(const Dataset& d, const Provenance& p);

// model_<estimator>_<outcome>.json
fs::path checkpoint_path(const fs::path& dir, EstimatorKind e, OutcomeKind k);
void write_checkpoint(const fs::path& path, const NetEstimator& e, const TreatmentGrid& grid,
                      const nlohmann::json& train_config, const Provenance& p);
NetEstimator read_checkpoint(const fs::path& path);

// epoch,train_mse,valid_mse in original outcome units.
std::string history_csv(std::span<const nn::EpochRecord> h, const InputScaling& s, const Provenance& p);
std::string gan_history_csv(std::span<const GanEpoch> h, const Provenance& p);
// id,policy,prescribed_t,estimated_cost,true_cost
std::string prescriptions_csv(std::span<const Prescription> rows, const Provenance& p);

}  // namespace maintcause::io
