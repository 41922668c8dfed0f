#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "maintcause/errors.hpp"
#include "maintcause/io.hpp"

using namespace maintcause;
namespace fs = std::filesystem;

namespace {

const io::Provenance kProv{"0123456789abcdef", 7};

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("maintcause_io_" + name);
    fs::remove_all(d);
    return d;
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char ch : s) n += ch == '\n';
    return n;
}

}  // namespace

TEST_CASE("csv preamble") {
    CHECK(io::csv_preamble(kProv) == "# schema_version=1 config_hash=0123456789abcdef seed=7\n");
}

TEST_CASE("dataset round trip") {
    const auto g = generate_dataset(60, 20.0, 7);
    const auto dir = fresh_dir("roundtrip");
    io::write_dataset(dir, g, kProv);
    for (const char* f : {"contracts.csv", "oracle.bin", "meta.json"}) CHECK(fs::exists(dir / f));

    const auto csv = io::read_file(dir / "contracts.csv");
    CHECK(count_lines(csv) == 60 + 2);

    const auto back = io::read_dataset(dir);
    CHECK(back.provenance.config_hash == kProv.config_hash);
    CHECK(back.provenance.seed == 7);
    const auto& a = g.dataset;
    const auto& b = back.data.dataset;
    REQUIRE(b.size() == a.size());
    CHECK(b.splits == a.splits);
    CHECK(b.meta.lambda == a.meta.lambda);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& ca = a.contracts[i];
        const auto& cb = b.contracts[i];
        CHECK(cb.id == ca.id);
        CHECK(cb.covariates.machine_type == ca.covariates.machine_type);
        CHECK(cb.covariates.contract_type == ca.covariates.contract_type);
        CHECK(std::abs(cb.pm_freq - ca.pm_freq) <= 1e-12);
        CHECK(std::abs(cb.overhauls - ca.overhauls) <= 1e-12);
        CHECK(std::abs(cb.failures - ca.failures) <= 1e-12);
        REQUIRE(cb.features.size() == ca.features.size());
        for (std::size_t k = 0; k < ca.features.size(); ++k) {
            CHECK(std::abs(cb.features[k] - ca.features[k]) <= 1e-12);
        }
    }
    for (std::size_t k = 0; k < a.stats.mean.size(); ++k) {
        CHECK(b.stats.mean[k] == a.stats.mean[k]);
        CHECK(b.stats.stddev[k] == a.stats.stddev[k]);
    }

    // The hidden model is stored exactly.
    const auto& oa = g.oracle;
    const auto& ob = back.data.oracle;
    CHECK(ob.model().v_o == oa.model().v_o);
    CHECK(ob.model().w_f == oa.model().w_f);
    CHECK(ob.bias().w_b == oa.bias().w_b);
    CHECK(ob.bias().lambda == oa.bias().lambda);
    for (std::size_t i = 0; i < oa.size(); ++i) {
        CHECK(ob.noise()[i].overhauls == oa.noise()[i].overhauls);
        CHECK(ob.noise()[i].failures == oa.noise()[i].failures);
        CHECK(std::abs(ob.outcome(OutcomeKind::kFailures, i, 3.3) - oa.outcome(OutcomeKind::kFailures, i, 3.3)) <=
              1e-12);
    }

    // Writing again yields identical bytes.
    const auto dir2 = fresh_dir("roundtrip2");
    io::write_dataset(dir2, g, kProv);
    for (const char* f : {"contracts.csv", "oracle.bin", "meta.json"}) {
        CHECK(io::read_file(dir / f) == io::read_file(dir2 / f));
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("corrupted datasets are rejected") {
    const auto g = generate_dataset(40, 0.0, 3);
    const auto dir = fresh_dir("corrupt");
    io::write_dataset(dir, g, kProv);
    const auto csv = io::read_file(dir / "contracts.csv");
    const auto bin = io::read_file(dir / "oracle.bin");

    SUBCASE("truncated oracle") {
        io::write_file(dir / "oracle.bin", bin.substr(0, bin.size() - 9));
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("bad magic") {
        auto b = bin;
        b[0] = 'X';
        io::write_file(dir / "oracle.bin", b);
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("trailing bytes") {
        io::write_file(dir / "oracle.bin", bin + "x");
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("missing row") {
        const auto cut = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);
        io::write_file(dir / "contracts.csv", cut);
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("bad number") {
        auto c = csv;
        const auto pos = c.find("\n0,") + 1;
        const auto line_end = c.find('\n', pos);
        c.replace(pos, line_end - pos, "0,train,1,abc,1,1,1,1,1,1,1,1");
        io::write_file(dir / "contracts.csv", c);
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("missing file") {
        fs::remove(dir / "meta.json");
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    SUBCASE("not json") {
        io::write_file(dir / "meta.json", "{ nope");
        CHECK_THROWS_AS(io::read_dataset(dir), DataError);
    }
    fs::remove_all(dir);
}

TEST_CASE("prescriptions and history tables") {
    Prescription p;
    p.contract_id = 4;
    p.policy = PolicyName::kMlpIte;
    p.prescribed_t = 0.1;
    p.estimated_cost = 300.5;
    p.true_cost = 301.25;
    const std::vector<Prescription> rows{p};
    const auto csv = io::prescriptions_csv(rows, kProv);
    CHECK(csv.find("id,policy,prescribed_t,estimated_cost,true_cost\n") != std::string::npos);
    CHECK(csv.find("4,MLP-ITE,0.10000000000000001,300.5,301.25\n") != std::string::npos);

    InputScaling s;
    s.y_std = 2.0;
    const std::vector<nn::EpochRecord> h{{1, 0.25, 0.5}};
    const auto hist = io::history_csv(h, s, kProv);
    CHECK(hist.find("epoch,train_mse,valid_mse\n1,1,2\n") != std::string::npos);
}

TEST_CASE("checkpoint files") {
    nn::Mlp net(std::vector<int>{4, 4, 1}, nn::Activation::kRelu, nn::Activation::kLinear, 5);
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = 0.1 * static_cast<double>(i) - 0.7;
    net.set_parameters(params);
    InputScaling s;
    s.y_mean = 1.5;
    const NetEstimator e(EstimatorKind::kScigan, OutcomeKind::kOverhauls, net, s);
    const auto dir = fresh_dir("ckpt");
    const auto path = io::checkpoint_path(dir, EstimatorKind::kScigan, OutcomeKind::kOverhauls);
    CHECK(path.filename() == "model_scigan_overhauls.json");
    io::write_checkpoint(path, e, TreatmentGrid{}, nlohmann::json::object(), kProv);
    const auto j = io::read_json(path);
    CHECK(j.at("config_hash") == kProv.config_hash);
    CHECK(j.at("seed") == 7);
    const auto back = io::read_checkpoint(path);
    CHECK(back.net().parameters() == params);
    CHECK(back.kind() == EstimatorKind::kScigan);
    const std::vector<double> x{0.1, -0.2, 0.3};
    CHECK(back.predict(x, 7.0) == e.predict(x, 7.0));
    io::write_file(path, "{}");
    CHECK_THROWS_AS(io::read_checkpoint(path), DataError);
    fs::remove_all(dir);
}
