#include "maintcause/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "maintcause/datagen.hpp"
#include "maintcause/errors.hpp"
#include "maintcause/eval.hpp"
#include "maintcause/rng.hpp"

namespace maintcause {

namespace {

constexpr OutcomeKind kOutcomes[] = {OutcomeKind::kOverhauls, OutcomeKind::kFailures};

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

bool non_negative_integer(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

void require_unsigned(const nlohmann::json& j, const char* key) {
    if (j.contains(key) && !non_negative_integer(j.at(key))) {
        throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json config_body(const ExperimentConfig& c) {
    nlohmann::json policies = nlohmann::json::array();
    for (auto p : c.policies) policies.push_back(std::string(to_string(p)));
    return {{"n", c.n},
            {"lambdas", c.lambdas},
            {"seeds", c.seeds},
            {"grid", {{"t_max", c.grid.t_max}, {"step", c.grid.step}}},
            {"costs", {{"c_pm", c.costs.c_pm}, {"c_overhaul", c.costs.c_overhaul}, {"c_failure", c.costs.c_failure}}},
            {"estimators", {{"mlp", to_json(c.estimators.supervised)}, {"scigan", to_json(c.estimators.scigan)}}},
            {"policies", policies},
            {"diagnostics", c.diagnostics}};
}

nlohmann::json summary_json(const Summary& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"median", s.median}, {"values", s.values}};
}

nlohmann::json summaries_json(const std::map<std::string, Summary>& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, s] : m) out[k] = summary_json(s);
    return out;
}

bool cell_less(const CellResult& a, const CellResult& b) {
    return a.lambda != b.lambda ? a.lambda < b.lambda : a.seed < b.seed;
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    return s;
}

std::string plot_csv(const EvalReport& r, const std::map<std::string, Summary> LambdaAggregate::*field,
                     const std::vector<std::string>& keys) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << " config_hash=" << r.config_hash
       << " seeds=" << seeds_text(r.config.seeds) << "\n";
    os << "lambda,policy_or_model,mean,std\n";
    for (const auto& agg : r.aggregates) {
        const auto& m = agg.*field;
        for (const auto& k : keys) {
            const auto it = m.find(k);
            os << fmt(agg.lambda) << "," << k << ",";
            if (it == m.end() || it->second.count == 0) {
                os << "nan,nan\n";
            } else {
                os << fmt(it->second.mean) << "," << fmt(it->second.std) << "\n";
            }
        }
    }
    return os.str();
}

std::vector<std::string> policy_keys(const ExperimentConfig& c) {
    std::vector<std::string> k;
    for (auto p : c.policies) k.emplace_back(to_string(p));
    return k;
}

std::vector<std::string> model_keys() {
    std::vector<std::string> k;
    for (auto e : {EstimatorKind::kScigan, EstimatorKind::kSupervised}) {
        for (auto o : kOutcomes) k.push_back(model_key(e, o));
    }
    return k;
}

std::string cell_file_name(std::uint64_t seed, double lambda) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "cell_lambda%g_seed%" PRIu64 ".json", lambda, seed);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n < 8) throw ConfigError("n must be at least 8, got " + std::to_string(n));
    if (lambdas.empty()) throw ConfigError("lambdas must not be empty");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    for (double l : lambdas) {
        if (!std::isfinite(l) || l < 0.0) throw ConfigError("lambda values must be finite and >= 0");
    }
    if (std::set<double>(lambdas.begin(), lambdas.end()).size() != lambdas.size()) {
        throw ConfigError("lambda values must be distinct");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (!(grid.step > 0.0) || !(grid.t_max > 0.0) || !std::isfinite(grid.t_max) || grid.t_max > kMaxPmFrequency) {
        throw ConfigError("grid needs 0 < step and 0 < t_max <= 20");
    }
    const double steps = grid.t_max / grid.step;
    if (std::abs(steps - std::round(steps)) > 1e-9) throw ConfigError("grid step must divide t_max");
    costs.validate();
    estimators.scigan.validate();
    if (policies.empty()) throw ConfigError("policies must not be empty");
    if (std::set<PolicyName>(policies.begin(), policies.end()).size() != policies.size()) {
        throw ConfigError("policies must be distinct");
    }
}

nlohmann::json to_json(const ExperimentConfig& c) {
    auto j = config_body(c);
    j["schema_version"] = kSchemaVersion;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    reject_unknown(j,
                   {"schema_version", "n", "lambdas", "seeds", "grid", "costs", "estimators", "policies",
                    "diagnostics", "output_dir"},
                   "experiment config");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion) {
        throw ConfigError("unsupported config schema_version");
    }
    ExperimentConfig c;
    require_unsigned(j, "n");
    read_opt(j, "n", c.n);
    read_opt(j, "lambdas", c.lambdas);
    if (j.contains("seeds")) {
        if (!j.at("seeds").is_array()) throw ConfigError("'seeds' must be an array");
        for (const auto& s : j.at("seeds")) {
            if (!non_negative_integer(s)) throw ConfigError("seeds must be non-negative integers");
        }
    }
    read_opt(j, "seeds", c.seeds);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        reject_unknown(g, {"t_max", "step"}, "grid");
        read_opt(g, "t_max", c.grid.t_max);
        read_opt(g, "step", c.grid.step);
    }
    if (j.contains("costs")) {
        const auto& g = j.at("costs");
        reject_unknown(g, {"c_pm", "c_overhaul", "c_failure"}, "costs");
        read_opt(g, "c_pm", c.costs.c_pm);
        read_opt(g, "c_overhaul", c.costs.c_overhaul);
        read_opt(g, "c_failure", c.costs.c_failure);
    }
    if (j.contains("estimators")) {
        const auto& e = j.at("estimators");
        reject_unknown(e, {"mlp", "scigan"}, "estimators");
        if (e.contains("mlp")) c.estimators.supervised = supervised_config_from_json(e.at("mlp"));
        if (e.contains("scigan")) c.estimators.scigan = scigan_config_from_json(e.at("scigan"));
    }
    if (j.contains("policies")) {
        std::vector<std::string> names;
        read_opt(j, "policies", names);
        c.policies.clear();
        for (const auto& p : names) c.policies.push_back(parse_policy(p));
    }
    read_opt(j, "diagnostics", c.diagnostics);
    read_opt(j, "output_dir", c.output_dir);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return experiment_config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
    const std::string text = config_body(c).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string model_key(EstimatorKind e, OutcomeKind k) {
    return std::string(to_string(e)) + "/" + std::string(to_string(k));
}

nlohmann::json to_json(const CellResult& c) {
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"kind", "cell"},
                        {"seed", c.seed},
                        {"lambda", c.lambda},
                        {"status", c.ok ? "ok" : "failed"},
                        {"error", c.error},
                        {"mise", c.mise},
                        {"valid_mse", c.valid_mse},
                        {"pe", c.pe},
                        {"pcr", c.pcr},
                        {"mean_t", c.mean_t}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : c.prescriptions) {
        rows.push_back({{"id", p.contract_id},
                        {"policy", std::string(to_string(p.policy))},
                        {"prescribed_t", p.prescribed_t},
                        {"estimated_cost", p.estimated_cost},
                        {"true_cost", p.true_cost}});
    }
    j["prescriptions"] = rows;
    return j;
}

CellResult cell_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version") != kSchemaVersion || j.at("kind") != "cell") throw DataError("not a cell file");
        CellResult c;
        c.seed = j.at("seed").get<std::uint64_t>();
        c.lambda = j.at("lambda").get<double>();
        c.ok = j.at("status") == "ok";
        c.error = j.at("error").get<std::string>();
        c.mise = j.at("mise").get<std::map<std::string, double>>();
        c.valid_mse = j.at("valid_mse").get<std::map<std::string, double>>();
        c.pe = j.at("pe").get<std::map<std::string, double>>();
        c.pcr = j.at("pcr").get<std::map<std::string, double>>();
        c.mean_t = j.at("mean_t").get<std::map<std::string, double>>();
        for (const auto& r : j.at("prescriptions")) {
            c.prescriptions.push_back({r.at("id").get<std::uint64_t>(), parse_policy(r.at("policy").get<std::string>()),
                                       r.at("prescribed_t").get<double>(), r.at("estimated_cost").get<double>(),
                                       r.at("true_cost").get<double>()});
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed cell file: ") + e.what());
    }
}

std::uint64_t estimator_seed(std::uint64_t seed, EstimatorKind e, OutcomeKind k) {
    const std::uint64_t base = e == EstimatorKind::kSupervised ? 1000 : 2000;
    return rng::derive(seed, rng::Stream::kInit, base + (k == OutcomeKind::kOverhauls ? 0 : 1));
}

CellResult score_cell(const ExperimentConfig& cfg, std::uint64_t seed, double lambda, const GeneratedData& g,
                      const CellModels& m) {
    CellResult cell;
    cell.seed = seed;
    cell.lambda = lambda;
    const TreatmentGrid grid = cfg.grid.build();
    const auto test = g.dataset.indices(Split::kTest);
    const Population pop = Population::of(g.dataset, test);
    for (std::size_t k = 0; k < 2; ++k) {
        const OutcomeKind kind = kOutcomes[k];
        const auto valid = observed(g.dataset, Split::kValid, kind);
        const RowMatrix truth = g.oracle.curves(kind, test, grid);
        for (const NetEstimator* e : {&m.mlp[k], &m.scigan[k]}) {
            if (e->outcome() != kind) throw DataError("estimator " + e->name() + " is not a model of " +
                                                      std::string(to_string(kind)));
            const auto key = model_key(e->kind(), kind);
            cell.mise[key] = mise(*e, truth, pop.x, grid);
            cell.valid_mse[key] = (e->predict_pairs(valid.x, valid.t) - valid.y).squaredNorm() /
                                  static_cast<double>(valid.size());
        }
    }

    const TrueCosts truth = TrueCosts::build(g.oracle, test, cfg.costs, grid);
    for (auto policy : cfg.policies) {
        std::vector<Prescription> p;
        switch (policy) {
            case PolicyName::kSciganIte:
                p = prescribe_ite(m.scigan[0], m.scigan[1], pop, cfg.costs, grid, policy);
                break;
            case PolicyName::kMlpIte:
                p = prescribe_ite(m.mlp[0], m.mlp[1], pop, cfg.costs, grid, policy);
                break;
            case PolicyName::kSciganAte:
                p = prescribe_ate(m.scigan[0], m.scigan[1], pop, cfg.costs, grid, policy);
                break;
            case PolicyName::kOracle:
                p = truth.ideal;
                break;
        }
        truth.fill(p, grid);
        const std::string name(to_string(policy));
        cell.pe[name] = policy_error(p, truth.ideal);
        cell.pcr[name] = policy_cost_ratio(p, truth, grid);
        double s = 0.0;
        for (const auto& q : p) s += q.prescribed_t;
        cell.mean_t[name] = s / static_cast<double>(p.size());
        if (cfg.diagnostics) cell.prescriptions.insert(cell.prescriptions.end(), p.begin(), p.end());
    }
    cell.ok = true;
    return cell;
}

CellResult run_cell(const ExperimentConfig& cfg, std::uint64_t seed, double lambda, const Logger& log) {
    CellResult cell;
    const auto say = [&](const std::string& s) {
        if (log) log("[lambda=" + fmt(lambda) + " seed=" + std::to_string(seed) + "] " + s);
    };
    try {
        say("generating " + std::to_string(cfg.n) + " contracts");
        const GeneratedData g = generate_dataset(cfg.n, lambda, seed);
        CellModels m;
        for (std::size_t k = 0; k < 2; ++k) {
            const OutcomeKind kind = kOutcomes[k];
            const auto train = observed(g.dataset, Split::kTrain, kind);
            const auto valid = observed(g.dataset, Split::kValid, kind);
            say("fitting mlp/" + std::string(to_string(kind)));
            m.mlp[k] = fit_supervised(train, valid, kind, cfg.estimators.supervised,
                                      estimator_seed(seed, EstimatorKind::kSupervised, kind))
                           .estimator;
            say("fitting scigan/" + std::string(to_string(kind)));
            m.scigan[k] = fit_scigan(train, valid, kind, cfg.estimators.scigan,
                                     estimator_seed(seed, EstimatorKind::kScigan, kind))
                              .fit.estimator;
        }
        say("scoring");
        cell = score_cell(cfg, seed, lambda, g, m);
    } catch (const Error& e) {
        cell = CellResult{seed, lambda, false, std::string(exit_code_name(e.code())) + ": " + e.what(), {}, {}, {}, {}, {}, {}};
    } catch (const std::exception& e) {
        cell = CellResult{seed, lambda, false, std::string("internal: ") + e.what(), {}, {}, {}, {}, {}, {}};
    }
    if (!cell.ok) say("failed: " + cell.error);
    return cell;
}

Summary summarize(std::vector<double> values) {
    Summary s;
    s.count = values.size();
    s.values = values;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    s.median = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
    return s;
}

EvalReport aggregate(const ExperimentConfig& cfg, std::vector<CellResult> cells) {
    std::sort(cells.begin(), cells.end(), cell_less);
    EvalReport r;
    r.config = cfg;
    r.config_hash = config_hash(cfg);
    std::vector<double> lambdas = cfg.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    for (double l : lambdas) {
        LambdaAggregate agg;
        agg.lambda = l;
        std::map<std::string, std::vector<double>> mise, pe, pcr;
        for (const auto& c : cells) {
            if (c.lambda != l || !c.ok) continue;
            ++agg.completed;
            for (const auto& [k, v] : c.mise) mise[k].push_back(v);
            for (const auto& [k, v] : c.pe) pe[k].push_back(v);
            for (const auto& [k, v] : c.pcr) pcr[k].push_back(v);
        }
        for (auto& [k, v] : mise) agg.mise[k] = summarize(std::move(v));
        for (auto& [k, v] : pe) agg.pe[k] = summarize(std::move(v));
        for (auto& [k, v] : pcr) agg.pcr[k] = summarize(std::move(v));
        r.aggregates.push_back(std::move(agg));
    }
    r.cells = std::move(cells);
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json cells = nlohmann::json::array();
    nlohmann::json incomplete = nlohmann::json::array();
    for (const auto& c : r.cells) {
        cells.push_back(to_json(c));
        if (!c.ok) incomplete.push_back({{"seed", c.seed}, {"lambda", c.lambda}, {"error", c.error}});
    }
    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : r.aggregates) {
        aggs.push_back({{"lambda", a.lambda},
                        {"completed", a.completed},
                        {"mise", summaries_json(a.mise)},
                        {"pe", summaries_json(a.pe)},
                        {"pcr", summaries_json(a.pcr)}});
    }
    const TreatmentGrid grid = r.config.grid.build();
    return {{"schema_version", kSchemaVersion},
            {"kind", "eval_report"},
            {"config_hash", r.config_hash},
            {"config", config_body(r.config)},
            {"n", r.config.n},
            {"seeds", r.config.seeds},
            {"lambdas", r.config.lambdas},
            {"grid", {{"t_min", grid.t_min()}, {"t_max", grid.t_max()}, {"step", grid.step()}, {"points", grid.size()}}},
            {"integration_upper_limit", grid.t_max()},
            {"aggregates", aggs},
            {"incomplete", incomplete},
            {"cells", cells}};
}

std::vector<std::string> validate_report(const nlohmann::json& j) {
    std::vector<std::string> problems;
    const auto need = [&](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
        return ok;
    };
    if (!need(j.is_object(), "report is not an object")) return problems;
    need(j.value("schema_version", -1) == kSchemaVersion, "schema_version missing or unsupported");
    need(j.value("kind", "") == "eval_report", "kind must be eval_report");
    const auto hash = j.value("config_hash", "");
    need(hash.size() == 16 && hash.find_first_not_of("0123456789abcdef") == std::string::npos,
         "config_hash must be 16 lowercase hex digits");
    for (const char* key : {"config", "seeds", "lambdas", "grid", "aggregates", "incomplete", "cells"}) {
        need(j.contains(key), std::string("missing '") + key + "'");
    }
    if (!problems.empty()) return problems;
    for (const auto& a : j.at("aggregates")) {
        const std::string at = "aggregate lambda=" + a.at("lambda").dump();
        for (const char* metric : {"mise", "pe", "pcr"}) {
            if (!need(a.contains(metric) && a.at(metric).is_object(), at + ": missing " + metric)) continue;
            for (const auto& [k, s] : a.at(metric).items()) {
                for (const char* f : {"count", "mean", "std", "median", "values"}) {
                    need(s.contains(f), at + " " + metric + "/" + k + ": missing " + f);
                }
                if (!s.contains("values")) continue;
                for (const auto& v : s.at("values")) {
                    const double x = v.is_number() ? v.get<double>() : std::nan("");
                    const std::string where = at + " " + metric + "/" + k;
                    need(std::isfinite(x), where + ": non-finite value");
                    if (std::string(metric) == "pcr") {
                        need(x >= 1.0 - 1e-12, where + ": PCR below 1");
                    } else {
                        need(x >= 0.0, where + ": negative value");
                    }
                }
            }
        }
    }
    for (const auto& c : j.at("cells")) {
        if (c.value("status", "") != "ok") continue;
        const auto& pe = c.at("pe");
        const auto& pcr = c.at("pcr");
        if (pe.contains("ORACLE")) need(pe.at("ORACLE").get<double>() == 0.0, "oracle PE is not 0");
        if (pcr.contains("ORACLE")) need(pcr.at("ORACLE").get<double>() == 1.0, "oracle PCR is not 1");
    }
    return problems;
}

EvalReport run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& cell_dir,
                          const Logger& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    if (cell_dir) std::filesystem::create_directories(*cell_dir);
    std::vector<double> lambdas = cfg.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::sort(seeds.begin(), seeds.end());

    std::vector<CellResult> cells;
    for (double l : lambdas) {
        for (auto s : seeds) {
            std::filesystem::path file;
            if (cell_dir) {
                file = *cell_dir / cell_file_name(s, l);
                std::ifstream in(file);
                if (in) {
                    try {
                        const auto j = nlohmann::json::parse(in);
                        if (j.value("config_hash", "") == hash) {
                            auto c = cell_from_json(j);
                            if (c.ok) {
                                if (log) log("reusing " + file.string());
                                cells.push_back(std::move(c));
                                continue;
                            }
                        }
                    } catch (const std::exception&) {
                        // unreadable cells are recomputed
                    }
                }
            }
            auto c = run_cell(cfg, s, l, log);
            if (cell_dir && c.ok) {
                auto j = to_json(c);
                j["config_hash"] = hash;
                const auto tmp = file.string() + ".tmp";
                {
                    std::ofstream out(tmp, std::ios::binary);
                    if (!out) throw DataError("cannot write " + tmp);
                    out << j.dump(2) << "\n";
                }
                std::filesystem::rename(tmp, file);
            }
            cells.push_back(std::move(c));
        }
    }
    return aggregate(cfg, std::move(cells));
}

std::string mise_csv(const EvalReport& r) { return plot_csv(r, &LambdaAggregate::mise, model_keys()); }
std::string pe_csv(const EvalReport& r) { return plot_csv(r, &LambdaAggregate::pe, policy_keys(r.config)); }
std::string pcr_csv(const EvalReport& r) { return plot_csv(r, &LambdaAggregate::pcr, policy_keys(r.config)); }

}  // namespace maintcause
