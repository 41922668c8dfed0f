#include "maintcause/io.hpp"

#include <array>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "maintcause/errors.hpp"

namespace maintcause::io {

namespace {

static_assert(std::endian::native == std::endian::little, "oracle.bin is written little-endian");

constexpr char kOracleMagic[8] = {'M', 'C', 'O', 'R', 'A', 'C', 'L', 'E'};
constexpr const char* kContractsHeader =
    "id,split,machine_type,age_at_start,hours_at_start,hours_during,avg_hours_per_year,contract_type,"
    "duration_days,pm_freq,overhauls,failures";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_all(const std::vector<double>& v) {
        for (double x : v) put(x);
    }
    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& s) : data_(s) {}
    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > data_.size()) throw DataError("oracle.bin is truncated");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::vector<double> get_all(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = get<double>();
        return v;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    const std::string& data_;
    std::size_t pos_ = 0;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad number '" + s + "' in " + where);
    }
}

int parse_int(const std::string& s, const std::string& where) {
    const double v = parse_double(s, where);
    if (v != static_cast<int>(v)) throw DataError("expected an integer, got '" + s + "' in " + where);
    return static_cast<int>(v);
}

Provenance provenance_of(const nlohmann::json& j) {
    return {j.at("config_hash").get<std::string>(), j.at("seed").get<std::uint64_t>()};
}

}  // namespace

std::string csv_preamble(const Provenance& p) {
    return "# schema_version=" + std::to_string(kFormatVersion) + " config_hash=" + p.config_hash +
           " seed=" + std::to_string(p.seed) + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed for " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("cannot write " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

std::string contracts_csv(const Dataset& d, const Provenance& p) {
    std::string out = csv_preamble(p);
    out += kContractsHeader;
    out += "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& c = d.contracts[i];
        const auto& v = c.covariates;
        out += std::to_string(c.id) + "," + std::string(to_string(d.splits[i])) + "," +
               std::to_string(v.machine_type) + "," + num(v.age_at_start) + "," + num(v.hours_at_start) + "," +
               num(v.hours_during) + "," + num(v.avg_hours_per_year) + "," + std::to_string(v.contract_type) + "," +
               num(v.duration_days) + "," + num(c.pm_freq) + "," + num(c.overhauls) + "," + num(c.failures) + "\n";
    }
    return out;
}

std::vector<std::uint8_t> oracle_bytes(const Oracle& o, const Provenance& p) {
    if (p.config_hash.size() != 16) throw DataError("config hash must have 16 characters");
    ByteWriter w;
    for (char c : kOracleMagic) w.put(c);
    w.put(static_cast<std::uint32_t>(kFormatVersion));
    w.put(static_cast<std::uint32_t>(o.model().dim()));
    w.put(static_cast<std::uint64_t>(o.size()));
    w.put(p.seed);
    for (char c : p.config_hash) w.put(c);
    w.put(o.bias().lambda);
    w.put_all(o.model().v_o);
    w.put_all(o.model().w_o);
    w.put_all(o.model().v_f);
    w.put_all(o.model().w_f);
    w.put_all(o.bias().w_b);
    for (const auto& e : o.noise()) {
        w.put(e.overhauls);
        w.put(e.failures);
    }
    return w.bytes;
}

nlohmann::json dataset_meta(const Dataset& d, const Provenance& p) {
    const auto sizes = split_sizes(d.size());
    std::vector<std::string> names(covariate_ranges::kNumericNames.begin(), covariate_ranges::kNumericNames.end());
    return {{"schema_version", kFormatVersion},
            {"kind", "dataset"},
            {"config_hash", p.config_hash},
            {"seed", p.seed},
            {"n", d.size()},
            {"lambda", d.meta.lambda},
            {"split_sizes", {{"train", sizes[0]}, {"valid", sizes[1]}, {"test", sizes[2]}}},
            {"covariate_distribution", d.meta.covariate_distribution},
            {"standardization",
             {{"columns", names},
              {"mean", std::vector<double>(d.stats.mean.begin(), d.stats.mean.end())},
              {"stddev", std::vector<double>(d.stats.stddev.begin(), d.stats.stddev.end())}}},
            {"files", {"contracts.csv", "oracle.bin", "meta.json"}}};
}

void write_dataset(const fs::path& dir, const GeneratedData& g, const Provenance& p) {
    write_file(dir / "contracts.csv", contracts_csv(g.dataset, p));
    const auto bytes = oracle_bytes(g.oracle, p);
    write_file(dir / "oracle.bin", std::string(bytes.begin(), bytes.end()));
    write_json(dir / "meta.json", dataset_meta(g.dataset, p));
}

LoadedData read_dataset(const fs::path& dir) {
    const auto meta = read_json(dir / "meta.json");
    LoadedData out;
    Dataset& d = out.data.dataset;
    std::size_t n = 0;
    try {
        if (meta.at("schema_version").get<int>() != kFormatVersion || meta.at("kind") != "dataset") {
            throw DataError("meta.json: unsupported schema_version or kind");
        }
        out.provenance = provenance_of(meta);
        n = meta.at("n").get<std::size_t>();
        d.meta.seed = out.provenance.seed;
        d.meta.lambda = meta.at("lambda").get<double>();
        d.meta.covariate_distribution = meta.at("covariate_distribution").get<std::string>();
        const auto mean = meta.at("standardization").at("mean").get<std::vector<double>>();
        const auto sd = meta.at("standardization").at("stddev").get<std::vector<double>>();
        if (mean.size() != kNumericCovariates || sd.size() != kNumericCovariates) {
            throw DataError("meta.json: standardization has the wrong number of columns");
        }
        std::copy(mean.begin(), mean.end(), d.stats.mean.begin());
        std::copy(sd.begin(), sd.end(), d.stats.stddev.begin());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("meta.json: ") + e.what());
    }

    std::istringstream csv(read_file(dir / "contracts.csv"));
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kContractsHeader) throw DataError("contracts.csv: unexpected header");
            header_seen = true;
            continue;
        }
        const std::string where = "contracts.csv line " + std::to_string(line_no);
        const auto f = split_csv_line(line);
        if (f.size() != 12) throw DataError(where + ": expected 12 fields, got " + std::to_string(f.size()));
        Contract c;
        c.id = static_cast<std::uint64_t>(parse_int(f[0], where));
        if (c.id != d.contracts.size()) throw DataError(where + ": ids must be 0..n-1 in order");
        Split split;
        try {
            split = parse_split(f[1]);
        } catch (const Error&) {
            throw DataError(where + ": unknown split '" + f[1] + "'");
        }
        c.covariates.machine_type = parse_int(f[2], where);
        c.covariates.age_at_start = parse_double(f[3], where);
        c.covariates.hours_at_start = parse_double(f[4], where);
        c.covariates.hours_during = parse_double(f[5], where);
        c.covariates.avg_hours_per_year = parse_double(f[6], where);
        c.covariates.contract_type = parse_int(f[7], where);
        c.covariates.duration_days = parse_double(f[8], where);
        c.pm_freq = parse_double(f[9], where);
        c.overhauls = parse_double(f[10], where);
        c.failures = parse_double(f[11], where);
        d.contracts.push_back(std::move(c));
        d.splits.push_back(split);
    }
    if (d.size() != n) throw DataError("contracts.csv has " + std::to_string(d.size()) + " rows, meta.json says " +
                                       std::to_string(n));
    encode_dataset(d);

    const std::string raw = read_file(dir / "oracle.bin");
    ByteReader r(raw);
    char magic[8];
    for (char& c : magic) c = r.get<char>();
    if (std::memcmp(magic, kOracleMagic, 8) != 0) throw DataError("oracle.bin: bad magic");
    if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(kFormatVersion)) {
        throw DataError("oracle.bin: unsupported version");
    }
    const std::size_t dim = r.get<std::uint32_t>();
    if (r.get<std::uint64_t>() != n) throw DataError("oracle.bin: contract count differs from meta.json");
    if (r.get<std::uint64_t>() != out.provenance.seed) throw DataError("oracle.bin: seed differs from meta.json");
    std::string hash(16, ' ');
    for (char& c : hash) c = r.get<char>();
    if (hash != out.provenance.config_hash) throw DataError("oracle.bin: config hash differs from meta.json");
    TrueOutcomeModel model;
    BiasModel bias;
    bias.lambda = r.get<double>();
    model.v_o = r.get_all(dim);
    model.w_o = r.get_all(dim);
    model.v_f = r.get_all(dim);
    model.w_f = r.get_all(dim);
    bias.w_b = r.get_all(dim);
    std::vector<ContractNoise> noise(n);
    for (auto& e : noise) {
        e.overhauls = r.get<double>();
        e.failures = r.get<double>();
    }
    if (!r.at_end()) throw DataError("oracle.bin: trailing bytes");
    out.data.oracle = Oracle(std::move(model), std::move(bias), std::move(noise), d);
    return out;
}

fs::path checkpoint_path(const fs::path& dir, EstimatorKind e, OutcomeKind k) {
    return dir / ("model_" + std::string(to_string(e)) + "_" + std::string(to_string(k)) + ".json");
}

void write_checkpoint(const fs::path& path, const NetEstimator& e, const TreatmentGrid& grid,
                      const nlohmann::json& train_config, const Provenance& p) {
    auto j = to_json(e, grid, train_config);
    j["config_hash"] = p.config_hash;
    j["seed"] = p.seed;
    write_json(path, j);
}

NetEstimator read_checkpoint(const fs::path& path) { return estimator_from_json(read_json(path)); }

std::string history_csv(std::span<const nn::EpochRecord> h, const InputScaling& s, const Provenance& p) {
    const double unit = s.y_std * s.y_std;
    std::string out = csv_preamble(p) + "epoch,train_mse,valid_mse\n";
    for (const auto& r : h) {
        out += std::to_string(r.epoch) + "," + num(r.train_loss * unit) + "," + num(r.valid_loss * unit) + "\n";
    }
    return out;
}

std::string gan_history_csv(std::span<const GanEpoch> h, const Provenance& p) {
    std::string out =
        csv_preamble(p) + "epoch,discriminator_loss,generator_loss,reconstruction_mse,discriminator_accuracy\n";
    for (const auto& r : h) {
        out += std::to_string(r.epoch) + "," + num(r.discriminator_loss) + "," + num(r.generator_loss) + "," +
               num(r.reconstruction_mse) + "," + num(r.discriminator_accuracy) + "\n";
    }
    return out;
}

std::string prescriptions_csv(std::span<const Prescription> rows, const Provenance& p) {
    std::string out = csv_preamble(p) + "id,policy,prescribed_t,estimated_cost,true_cost\n";
    for (const auto& r : rows) {
        out += std::to_string(r.contract_id) + "," + std::string(to_string(r.policy)) + "," + num(r.prescribed_t) +
               "," + num(r.estimated_cost) + "," + num(r.true_cost) + "\n";
    }
    return out;
}

}  // namespace maintcause::io
