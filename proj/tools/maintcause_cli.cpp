// maintcause: generate data, train estimators, prescribe PM frequencies and evaluate policies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maintcause/datagen.hpp"
#include "maintcause/errors.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/eval.hpp"
#include "maintcause/experiment.hpp"
#include "maintcause/io.hpp"
#include "maintcause/kernels.hpp"
#include "maintcause/policy.hpp"

namespace fs = std::filesystem;
using namespace maintcause;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool verbose = false;
};

constexpr OutcomeKind kOutcomes[] = {OutcomeKind::kOverhauls, OutcomeKind::kFailures};

Logger make_logger(const Globals& g) {
    if (!g.verbose) return {};
    return [](const std::string& s) { std::cerr << s << "\n"; };
}

ExperimentConfig base_config(const Globals& g) {
    ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_experiment_config(g.config_path);
    if (g.seed) c.seeds = {*g.seed};
    if (!g.out.empty()) c.output_dir = g.out;
    return c;
}

// Config describing exactly one dataset, used for provenance of its derived files.
ExperimentConfig single_cell(ExperimentConfig c, std::size_t n, double lambda, std::uint64_t seed) {
    c.n = n;
    c.lambdas = {lambda};
    c.seeds = {seed};
    c.validate();
    return c;
}

io::Provenance provenance(const ExperimentConfig& c) { return {config_hash(c), c.seeds.front()}; }

fs::path out_dir(const Globals& g, const fs::path& fallback) { return g.out.empty() ? fallback : fs::path(g.out); }

std::vector<EstimatorKind> estimator_kinds(const std::string& s) {
    if (s == "all") return {EstimatorKind::kSupervised, EstimatorKind::kScigan};
    return {parse_estimator_kind(s)};
}

int cmd_generate(const Globals& g, std::optional<std::size_t> n, std::optional<double> lambda) {
    ExperimentConfig c = base_config(g);
    if (n) c.n = *n;
    const double l = lambda ? *lambda : c.lambdas.front();
    c = single_cell(c, c.n, l, c.seeds.front());
    const fs::path dir = c.output_dir;
    const auto p = provenance(c);
    if (g.verbose) std::cerr << "generating n=" << c.n << " lambda=" << l << " seed=" << p.seed << "\n";
    const GeneratedData data = generate_dataset(c.n, l, p.seed);
    io::write_dataset(dir, data, p);
    std::cout << "wrote " << (dir / "contracts.csv").string() << ", oracle.bin, meta.json\n";
    return 0;
}

struct Loaded {
    io::LoadedData data;
    ExperimentConfig config;
    io::Provenance provenance;
};

Loaded load(const Globals& g, const fs::path& data_dir) {
    Loaded l;
    l.data = io::read_dataset(data_dir);
    const auto& d = l.data.data.dataset;
    const std::uint64_t seed = g.seed ? *g.seed : l.data.provenance.seed;
    l.config = single_cell(base_config(g), d.size(), d.meta.lambda, seed);
    l.provenance = provenance(l.config);
    return l;
}

int cmd_train(const Globals& g, const fs::path& data_dir, const std::string& which) {
    const Loaded l = load(g, data_dir);
    const fs::path dir = out_dir(g, data_dir);
    const auto& d = l.data.data.dataset;
    const TreatmentGrid grid = l.config.grid.build();
    for (auto e : estimator_kinds(which)) {
        for (auto kind : kOutcomes) {
            const auto train = observed(d, Split::kTrain, kind);
            const auto valid = observed(d, Split::kValid, kind);
            const std::string tag = std::string(to_string(e)) + "_" + std::string(to_string(kind));
            if (g.verbose) std::cerr << "training " << tag << "\n";
            const std::uint64_t seed = estimator_seed(l.provenance.seed, e, kind);
            FitResult fit;
            if (e == EstimatorKind::kSupervised) {
                fit = fit_supervised(train, valid, kind, l.config.estimators.supervised, seed);
                io::write_checkpoint(io::checkpoint_path(dir, e, kind), fit.estimator, grid,
                                     to_json(l.config.estimators.supervised), l.provenance);
            } else {
                auto sg = fit_scigan(train, valid, kind, l.config.estimators.scigan, seed);
                io::write_file(dir / ("gan_history_" + std::string(to_string(kind)) + ".csv"),
                               io::gan_history_csv(sg.gan_history, l.provenance));
                fit = std::move(sg.fit);
                io::write_checkpoint(io::checkpoint_path(dir, e, kind), fit.estimator, grid,
                                     to_json(l.config.estimators.scigan), l.provenance);
            }
            io::write_file(dir / ("history_" + tag + ".csv"),
                           io::history_csv(fit.history, fit.estimator.scaling(), l.provenance));
            std::cout << tag << ": validation MSE " << fit.valid_mse << "\n";
        }
    }
    return 0;
}

CellModels load_models(const fs::path& dir, bool need_mlp, bool need_scigan) {
    CellModels m;
    for (std::size_t k = 0; k < 2; ++k) {
        if (need_mlp) m.mlp[k] = io::read_checkpoint(io::checkpoint_path(dir, EstimatorKind::kSupervised, kOutcomes[k]));
        if (need_scigan) m.scigan[k] = io::read_checkpoint(io::checkpoint_path(dir, EstimatorKind::kScigan, kOutcomes[k]));
    }
    return m;
}

int cmd_prescribe(const Globals& g, const fs::path& data_dir, const std::string& models_dir,
                  const std::vector<std::string>& policy_names) {
    Loaded l = load(g, data_dir);
    if (!policy_names.empty()) {
        l.config.policies.clear();
        for (const auto& p : policy_names) l.config.policies.push_back(parse_policy(p));
        l.config.validate();
        l.provenance = provenance(l.config);
    }
    const auto& data = l.data.data;
    bool need_mlp = false, need_scigan = false;
    for (auto p : l.config.policies) {
        need_mlp |= p == PolicyName::kMlpIte;
        need_scigan |= p == PolicyName::kSciganIte || p == PolicyName::kSciganAte;
    }
    const CellModels m = load_models(models_dir.empty() ? data_dir : fs::path(models_dir), need_mlp, need_scigan);
    const TreatmentGrid grid = l.config.grid.build();
    const auto test = data.dataset.indices(Split::kTest);
    const Population pop = Population::of(data.dataset, test);
    const TrueCosts truth = TrueCosts::build(data.oracle, test, l.config.costs, grid);
    std::vector<Prescription> rows;
    for (auto policy : l.config.policies) {
        std::vector<Prescription> p;
        switch (policy) {
            case PolicyName::kSciganIte:
                p = prescribe_ite(m.scigan[0], m.scigan[1], pop, l.config.costs, grid, policy);
                break;
            case PolicyName::kMlpIte: p = prescribe_ite(m.mlp[0], m.mlp[1], pop, l.config.costs, grid, policy); break;
            case PolicyName::kSciganAte:
                p = prescribe_ate(m.scigan[0], m.scigan[1], pop, l.config.costs, grid, policy);
                break;
            case PolicyName::kOracle: p = truth.ideal; break;
        }
        truth.fill(p, grid);
        std::cout << to_string(policy) << ": PE " << policy_error(p, truth.ideal) << " PCR "
                  << policy_cost_ratio(p, truth, grid) << "\n";
        rows.insert(rows.end(), p.begin(), p.end());
    }
    const fs::path dir = out_dir(g, data_dir);
    io::write_file(dir / "prescriptions.csv", io::prescriptions_csv(rows, l.provenance));
    return 0;
}

void write_report(const fs::path& dir, const EvalReport& r) {
    const auto j = to_json(r);
    const auto problems = validate_report(j);
    if (!problems.empty()) throw DataError("report failed validation: " + problems.front());
    io::write_json(dir / "report.json", j);
    io::write_file(dir / "mise_vs_lambda.csv", mise_csv(r));
    io::write_file(dir / "pe_vs_lambda.csv", pe_csv(r));
    io::write_file(dir / "pcr_vs_lambda.csv", pcr_csv(r));
}

void print_summary(const EvalReport& r) {
    for (const auto& a : r.aggregates) {
        std::cout << "lambda " << a.lambda << " (" << a.completed << " cells)\n";
        for (const auto& [k, s] : a.mise) std::cout << "  MISE " << k << " " << s.mean << " +- " << s.std << "\n";
        for (const auto& [k, s] : a.pe) {
            std::cout << "  " << k << " PE " << s.mean << " +- " << s.std << " PCR " << a.pcr.at(k).mean << " +- "
                      << a.pcr.at(k).std << "\n";
        }
    }
}

int cmd_evaluate(const Globals& g, const fs::path& data_dir, const std::string& models_dir) {
    const Loaded l = load(g, data_dir);
    const CellModels m = load_models(models_dir.empty() ? data_dir : fs::path(models_dir), true, true);
    const auto& d = l.data.data.dataset;
    const CellResult cell = score_cell(l.config, l.provenance.seed, d.meta.lambda, l.data.data, m);
    const EvalReport r = aggregate(l.config, {cell});
    write_report(out_dir(g, data_dir), r);
    print_summary(r);
    return 0;
}

int cmd_sweep(const Globals& g) {
    const ExperimentConfig c = base_config(g);
    c.validate();
    const fs::path dir = c.output_dir;
    const EvalReport r = run_experiment(c, dir / "cells", make_logger(g));
    write_report(dir, r);
    print_summary(r);
    std::size_t failed = 0;
    for (const auto& cell : r.cells) {
        if (!cell.ok) {
            ++failed;
            std::cerr << "cell lambda=" << cell.lambda << " seed=" << cell.seed << " failed: " << cell.error << "\n";
        }
    }
    if (failed > 0) std::cerr << failed << " of " << r.cells.size() << " cells incomplete\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal estimation of preventive-maintenance frequency for service contracts"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "experiment seed (overrides the config's seed list)");
    app.add_option("--out", g.out, "output directory");
    app.add_flag("--verbose", g.verbose, "progress on stderr");

    std::optional<std::size_t> n;
    std::optional<double> lambda;
    auto* gen = app.add_subcommand("generate", "write contracts.csv, oracle.bin and meta.json");
    gen->add_option("--n", n, "number of contracts");
    gen->add_option("--lambda", lambda, "selection-bias strength (default: first lambda of the config)");

    std::string data_dir, models_dir, estimator = "all";
    std::vector<std::string> policies;
    auto* train = app.add_subcommand("train", "fit estimators for both outcomes");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--estimator", estimator, "mlp, scigan or all")
        ->check(CLI::IsMember({"mlp", "scigan", "all"}));

    auto* prescribe = app.add_subcommand("prescribe", "write prescriptions.csv for the test split");
    prescribe->add_option("--data", data_dir, "dataset directory")->required();
    prescribe->add_option("--models", models_dir, "checkpoint directory (default: --data)");
    prescribe->add_option("--policy", policies, "SCIGAN-ITE, MLP-ITE, SCIGAN-ATE or ORACLE (repeatable)");

    auto* evaluate = app.add_subcommand("evaluate", "score checkpoints against the oracle");
    evaluate->add_option("--data", data_dir, "dataset directory")->required();
    evaluate->add_option("--models", models_dir, "checkpoint directory (default: --data)");

    auto* sweep = app.add_subcommand("sweep", "run every (lambda, seed) cell of the config; resumable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
    }

    kernels::apply_thread_cap();
    try {
        if (*gen) return cmd_generate(g, n, lambda);
        if (*train) return cmd_train(g, data_dir, estimator);
        if (*prescribe) return cmd_prescribe(g, data_dir, models_dir, policies);
        if (*evaluate) return cmd_evaluate(g, data_dir, models_dir);
        if (*sweep) return cmd_sweep(g);
    } catch (const Error& e) {
        std::cerr << "maintcause: " << exit_code_name(e.code()) << ": " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "maintcause: internal error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kInternal);
    }
    return static_cast<int>(ExitCode::kInternal);
}
