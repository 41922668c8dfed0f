#include "maintcause/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "maintcause/errors.hpp"
#include "maintcause/rng.hpp"

namespace maintcause {

namespace {

// Contracts per prediction block. Fixed so that the blocks, and therefore every
// floating-point sum inside the forward pass, do not depend on the thread count.
constexpr Eigen::Index kCurveBlock = 32;

nn::Matrix with_scaled_t(const nn::Matrix& x, const Eigen::VectorXd& t, const InputScaling& s) {
    nn::Matrix in(x.rows(), x.cols() + 1);
    in.leftCols(x.cols()) = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) in(i, x.cols()) = s.scale_t(t[i]);
    return in;
}

nn::Matrix scaled_targets(const Eigen::VectorXd& y, const InputScaling& s) {
    nn::Matrix out(y.size(), 1);
    for (Eigen::Index i = 0; i < y.size(); ++i) out(i, 0) = s.scale_y(y[i]);
    return out;
}

std::vector<int> hidden_stack(int width, int layers) { return std::vector<int>(static_cast<std::size_t>(layers), width); }

std::vector<int> widths_of(Eigen::Index in, const std::vector<int>& hidden, Eigen::Index out) {
    std::vector<int> w{static_cast<int>(in)};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(static_cast<int>(out));
    return w;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

nlohmann::json train_json(const nn::TrainConfig& t) {
    return {{"batch_size", t.batch_size},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience},
            {"optimizer", nn::to_string(t.optimizer)},
            {"momentum", t.momentum}};
}

nn::TrainConfig train_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"batch_size", "max_epochs", "patience", "optimizer", "momentum"}, "train");
    nn::TrainConfig t;
    read_opt(j, "batch_size", t.batch_size);
    read_opt(j, "max_epochs", t.max_epochs);
    read_opt(j, "patience", t.patience);
    read_opt(j, "momentum", t.momentum);
    if (j.contains("optimizer")) t.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
    return t;
}

// Grid search over (learning rate, width); the lowest validation MSE wins, first on ties.
FitResult search_and_train(EstimatorKind kind, OutcomeKind outcome, const nn::Matrix& x_train,
                           const nn::Matrix& y_train, const nn::Matrix& x_valid, const nn::Matrix& y_valid,
                           const InputScaling& scaling, const SupervisedConfig& cfg, std::uint64_t seed) {
    if (cfg.search.learning_rates.empty() || cfg.search.hidden_widths.empty()) {
        throw ConfigError("hyperparameter search grid is empty");
    }
    FitResult best;
    best.valid_mse = std::numeric_limits<double>::infinity();
    const double unit = scaling.y_std * scaling.y_std;
    std::uint64_t config_index = 0;
    for (int width : cfg.search.hidden_widths) {
        for (double lr : cfg.search.learning_rates) {
            nn::TrainConfig tc = cfg.train;
            tc.learning_rate = lr;
            tc.seed = rng::derive(seed, rng::Stream::kShuffle, config_index);
            const auto widths = widths_of(x_train.cols(), hidden_stack(width, cfg.search.hidden_layers), 1);
            nn::Mlp init(widths, nn::Activation::kRelu, nn::Activation::kLinear,
                         rng::derive(seed, rng::Stream::kInit, config_index));
            auto tr = nn::train(std::move(init), x_train, y_train, x_valid, y_valid, tc);
            const double mse = tr.best_valid_loss * unit;
            best.search.push_back({lr, width, mse});
            if (mse < best.valid_mse) {
                best.valid_mse = mse;
                best.history = std::move(tr.history);
                best.estimator = NetEstimator(kind, outcome, std::move(tr.model), scaling);
            }
            ++config_index;
        }
    }
    return best;
}

// One adversarial minibatch layout: per contract a factual slot and D - 1
// uniformly drawn dosages.
struct DosageSets {
    std::vector<int> factual_slot;
    nn::Matrix t;  // B x D, original units
};

DosageSets draw_dosage_sets(Eigen::Index batch, int dosages, const Eigen::VectorXd& t_factual, rng::Engine& e) {
    DosageSets s;
    s.factual_slot.resize(static_cast<std::size_t>(batch));
    s.t.resize(batch, dosages);
    std::uniform_int_distribution<int> slot(0, dosages - 1);
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int k = slot(e);
        s.factual_slot[static_cast<std::size_t>(i)] = k;
        for (int j = 0; j < dosages; ++j) {
            s.t(i, j) = (j == k) ? t_factual[i] : rng::uniform(e, 0.0, kMaxPmFrequency);
        }
    }
    return s;
}

nn::Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, rng::Engine& e) {
    nn::Matrix z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = rng::normal(e);
    }
    return z;
}

// Generator rows: [x, t_f, y_f, z, t_target] (scaled), one per (contract, slot).
nn::Matrix generator_input(const nn::Matrix& x, const Eigen::VectorXd& t_f, const Eigen::VectorXd& y_f,
                           const nn::Matrix& z, const nn::Matrix& t_target, const InputScaling& s) {
    const Eigen::Index b = x.rows();
    const Eigen::Index slots = t_target.cols();
    const Eigen::Index d = x.cols();
    nn::Matrix in(b * slots, d + 3 + z.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < slots; ++j) {
            const Eigen::Index r = i * slots + j;
            in.block(r, 0, 1, d) = x.row(i);
            in(r, d) = s.scale_t(t_f[i]);
            in(r, d + 1) = s.scale_y(y_f[i]);
            in.block(r, d + 2, 1, z.cols()) = z.row(i);
            in(r, d + 2 + z.cols()) = s.scale_t(t_target(i, j));
        }
    }
    return in;
}

// Discriminator rows: [x, (t_1, y_1), ..., (t_D, y_D)] with the factual outcome in its slot.
nn::Matrix discriminator_input(const nn::Matrix& x, const DosageSets& sets, const Eigen::VectorXd& y_f,
                               const nn::Matrix& generated, const InputScaling& s) {
    const Eigen::Index b = x.rows();
    const Eigen::Index dosages = sets.t.cols();
    const Eigen::Index d = x.cols();
    nn::Matrix in(b, d + 2 * dosages);
    in.leftCols(d) = x;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int k = sets.factual_slot[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < dosages; ++j) {
            in(i, d + 2 * j) = s.scale_t(sets.t(i, j));
            in(i, d + 2 * j + 1) = (j == k) ? s.scale_y(y_f[i]) : generated(i * dosages + j, 0);
        }
    }
    return in;
}

double argmax_accuracy(const nn::Matrix& logits, const std::vector<int>& target) {
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        if (best == target[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
    return out;
}

}  // namespace

std::string_view to_string(EstimatorKind k) { return k == EstimatorKind::kScigan ? "scigan" : "mlp"; }

EstimatorKind parse_estimator_kind(std::string_view s) {
    if (s == "mlp") return EstimatorKind::kSupervised;
    if (s == "scigan") return EstimatorKind::kScigan;
    throw ConfigError("unknown estimator kind '" + std::string(s) + "' (expected mlp or scigan)");
}

RowMatrix OutcomeEstimator::predict_curves(const nn::Matrix& x, std::span<const double> t, Execution exec) const {
    RowMatrix out(x.rows(), static_cast<Eigen::Index>(t.size()));
    auto fill_row = [&](Eigen::Index i) {
        const Eigen::RowVectorXd row = x.row(i);
        const std::span<const double> xi(row.data(), static_cast<std::size_t>(row.size()));
        for (std::size_t k = 0; k < t.size(); ++k) out(i, static_cast<Eigen::Index>(k)) = predict(xi, t[k]);
    };
    if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < x.rows(); ++i) fill_row(i);
    } else {
        for (Eigen::Index i = 0; i < x.rows(); ++i) fill_row(i);
    }
    return out;
}

ObservedData observed(const Dataset& data, Split split, OutcomeKind kind) {
    const auto rows = data.indices(split);
    ObservedData o;
    o.x = data.feature_matrix(rows);
    o.t.resize(static_cast<Eigen::Index>(rows.size()));
    o.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& c = data.contracts[rows[r]];
        o.t[static_cast<Eigen::Index>(r)] = c.pm_freq;
        o.y[static_cast<Eigen::Index>(r)] = kind == OutcomeKind::kOverhauls ? c.overhauls : c.failures;
    }
    return o;
}

InputScaling InputScaling::fit(const Eigen::VectorXd& y_train) {
    if (y_train.size() == 0) throw DataError("cannot fit output scaling on an empty split");
    InputScaling s;
    s.y_mean = y_train.mean();
    const double var = (y_train.array() - s.y_mean).square().mean();
    // Constant targets keep unit scale.
    s.y_std = var > 1e-24 ? std::sqrt(var) : 1.0;
    return s;
}

NetEstimator::NetEstimator(EstimatorKind kind, OutcomeKind outcome, nn::Mlp net, InputScaling scaling)
    : kind_(kind), outcome_(outcome), net_(std::move(net)), scaling_(scaling) {}

std::string NetEstimator::name() const {
    return std::string(to_string(kind_)) + "/" + std::string(to_string(outcome_));
}

double NetEstimator::predict(std::span<const double> x, double t) const {
    nn::Matrix in(1, static_cast<Eigen::Index>(x.size()) + 1);
    for (std::size_t j = 0; j < x.size(); ++j) in(0, static_cast<Eigen::Index>(j)) = x[j];
    in(0, static_cast<Eigen::Index>(x.size())) = scaling_.scale_t(t);
    return scaling_.unscale_y(net_.forward(in)(0, 0));
}

Eigen::VectorXd NetEstimator::predict_pairs(const nn::Matrix& x, const Eigen::VectorXd& t) const {
    const nn::Matrix out = net_.forward(with_scaled_t(x, t, scaling_));
    Eigen::VectorXd y(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) y[i] = scaling_.unscale_y(out(i, 0));
    return y;
}

RowMatrix NetEstimator::predict_curves(const nn::Matrix& x, std::span<const double> t, Execution exec) const {
    const Eigen::Index n = x.rows();
    const Eigen::Index g = static_cast<Eigen::Index>(t.size());
    const Eigen::Index d = x.cols();
    RowMatrix out(n, g);
    const Eigen::Index blocks = (n + kCurveBlock - 1) / kCurveBlock;
    auto run_block = [&](Eigen::Index b) {
        const Eigen::Index first = b * kCurveBlock;
        const Eigen::Index rows = std::min(kCurveBlock, n - first);
        nn::Matrix in(rows * g, d + 1);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index k = 0; k < g; ++k) {
                in.block(i * g + k, 0, 1, d) = x.row(first + i);
                in(i * g + k, d) = scaling_.scale_t(t[static_cast<std::size_t>(k)]);
            }
        }
        const nn::Matrix y = net_.forward(in);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index k = 0; k < g; ++k) out(first + i, k) = scaling_.unscale_y(y(i * g + k, 0));
        }
    };
    if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (Eigen::Index b = 0; b < blocks; ++b) run_block(b);
    } else {
        for (Eigen::Index b = 0; b < blocks; ++b) run_block(b);
    }
    return out;
}

OracleEstimator::OracleEstimator(const Dataset& data, const Oracle& oracle, OutcomeKind outcome)
    : oracle_(&oracle), outcome_(outcome) {
    for (const auto& c : data.contracts) ids_.emplace(c.features.values, static_cast<std::size_t>(c.id));
}

double OracleEstimator::predict(std::span<const double> x, double t) const {
    const auto it = ids_.find(std::vector<double>(x.begin(), x.end()));
    if (it == ids_.end()) throw DataError("oracle estimator: feature vector does not belong to the dataset");
    return oracle_->outcome(outcome_, it->second, t);
}

void SciganConfig::validate() const {
    if (dosage_samples < 2) throw ConfigError("scigan: dosage_samples must be >= 2");
    if (noise_dim < 1) throw ConfigError("scigan: noise_dim must be >= 1");
    if (!(reconstruction_weight >= 0.0)) throw ConfigError("scigan: reconstruction_weight must be >= 0");
    if (augmentation < 0) throw ConfigError("scigan: augmentation must be >= 0");
    if (gan_epochs == 0 || gan_batch_size == 0) throw ConfigError("scigan: gan_epochs and gan_batch_size must be positive");
    if (!(gan_learning_rate > 0.0)) throw ConfigError("scigan: gan_learning_rate must be positive");
    if (collapse_epochs == 0) throw ConfigError("scigan: collapse_epochs must be positive");
    for (int w : generator_hidden) {
        if (w <= 0) throw ConfigError("scigan: generator widths must be positive");
    }
    for (int w : discriminator_hidden) {
        if (w <= 0) throw ConfigError("scigan: discriminator widths must be positive");
    }
    inference.train.validate();
}

nlohmann::json to_json(const SupervisedConfig& c) {
    return {{"learning_rates", c.search.learning_rates},
            {"hidden_widths", c.search.hidden_widths},
            {"hidden_layers", c.search.hidden_layers},
            {"train", train_json(c.train)}};
}

SupervisedConfig supervised_config_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"learning_rates", "hidden_widths", "hidden_layers", "train"}, "supervised config");
    SupervisedConfig c;
    read_opt(j, "learning_rates", c.search.learning_rates);
    read_opt(j, "hidden_widths", c.search.hidden_widths);
    read_opt(j, "hidden_layers", c.search.hidden_layers);
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (c.search.learning_rates.empty() || c.search.hidden_widths.empty() || c.search.hidden_layers < 1) {
        throw ConfigError("supervised config: search grid must be non-empty with >= 1 hidden layer");
    }
    for (double lr : c.search.learning_rates) {
        if (!(lr > 0.0)) throw ConfigError("supervised config: learning rates must be positive");
    }
    for (int w : c.search.hidden_widths) {
        if (w <= 0) throw ConfigError("supervised config: hidden widths must be positive");
    }
    c.train.validate();
    return c;
}

nlohmann::json to_json(const SciganConfig& c) {
    return {{"dosage_samples", c.dosage_samples},
            {"noise_dim", c.noise_dim},
            {"reconstruction_weight", c.reconstruction_weight},
            {"augmentation", c.augmentation},
            {"generator_hidden", c.generator_hidden},
            {"discriminator_hidden", c.discriminator_hidden},
            {"gan_epochs", c.gan_epochs},
            {"gan_batch_size", c.gan_batch_size},
            {"gan_learning_rate", c.gan_learning_rate},
            {"gan_optimizer", nn::to_string(c.gan_optimizer)},
            {"collapse_fraction", c.collapse_fraction},
            {"collapse_epochs", c.collapse_epochs},
            {"inference", to_json(c.inference)}};
}

SciganConfig scigan_config_from_json(const nlohmann::json& j) {
    reject_unknown(j,
                   {"dosage_samples", "noise_dim", "reconstruction_weight", "augmentation", "generator_hidden",
                    "discriminator_hidden", "gan_epochs", "gan_batch_size", "gan_learning_rate", "gan_optimizer",
                    "collapse_fraction", "collapse_epochs", "inference"},
                   "scigan config");
    SciganConfig c;
    read_opt(j, "dosage_samples", c.dosage_samples);
    read_opt(j, "noise_dim", c.noise_dim);
    read_opt(j, "reconstruction_weight", c.reconstruction_weight);
    read_opt(j, "augmentation", c.augmentation);
    read_opt(j, "generator_hidden", c.generator_hidden);
    read_opt(j, "discriminator_hidden", c.discriminator_hidden);
    read_opt(j, "gan_epochs", c.gan_epochs);
    read_opt(j, "gan_batch_size", c.gan_batch_size);
    read_opt(j, "gan_learning_rate", c.gan_learning_rate);
    read_opt(j, "collapse_fraction", c.collapse_fraction);
    read_opt(j, "collapse_epochs", c.collapse_epochs);
    if (j.contains("gan_optimizer")) c.gan_optimizer = nn::parse_optimizer(j.at("gan_optimizer").get<std::string>());
    if (j.contains("inference")) c.inference = supervised_config_from_json(j.at("inference"));
    c.validate();
    return c;
}

FitResult fit_supervised(const ObservedData& train, const ObservedData& valid, OutcomeKind kind,
                         const SupervisedConfig& cfg, std::uint64_t seed) {
    if (train.size() == 0 || valid.size() == 0) throw DataError("fit_supervised: empty train or valid split");
    const InputScaling scaling = InputScaling::fit(train.y);
    return search_and_train(EstimatorKind::kSupervised, kind, with_scaled_t(train.x, train.t, scaling),
                            scaled_targets(train.y, scaling), with_scaled_t(valid.x, valid.t, scaling),
                            scaled_targets(valid.y, scaling), scaling, cfg, seed);
}

Eigen::VectorXd SciganComponents::generate(const nn::Matrix& x, const Eigen::VectorXd& t_factual,
                                           const Eigen::VectorXd& y_factual, const Eigen::VectorXd& t_target,
                                           std::uint64_t seed) const {
    auto e = rng::engine(seed, rng::Stream::kAugment);
    const nn::Matrix z = normal_matrix(x.rows(), noise_dim, e);
    const nn::Matrix out = generator.forward(generator_input(x, t_factual, y_factual, z, t_target, scaling));
    Eigen::VectorXd y(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) y[i] = scaling.unscale_y(generated_outcome(out(i, 0)));
    return y;
}

double SciganComponents::discriminator_accuracy(const ObservedData& data, std::uint64_t seed) const {
    auto e = rng::engine(seed, rng::Stream::kAdversarial);
    const auto sets = draw_dosage_sets(data.size(), dosage_samples, data.t, e);
    const nn::Matrix z = normal_matrix(data.size(), noise_dim, e);
    const nn::Matrix gen = generator.forward(generator_input(data.x, data.t, data.y, z, sets.t, scaling))
                               .unaryExpr([this](double v) { return generated_outcome(v); });
    const nn::Matrix logits = discriminator.forward(discriminator_input(data.x, sets, data.y, gen, scaling));
    return argmax_accuracy(logits, sets.factual_slot);
}

SciganComponents train_counterfactual_gan(const ObservedData& train, const SciganConfig& cfg, std::uint64_t seed,
                                          std::vector<GanEpoch>* history) {
    cfg.validate();
    if (train.size() == 0) throw DataError("fit_scigan: empty training split");
    const Eigen::Index n = train.size();
    const Eigen::Index d = train.x.cols();
    const int dosages = cfg.dosage_samples;

    SciganComponents comp;
    comp.scaling = InputScaling::fit(train.y);
    comp.dosage_samples = dosages;
    comp.noise_dim = cfg.noise_dim;
    comp.outcome_lo = comp.scaling.scale_y(0.0);
    comp.outcome_hi = comp.scaling.scale_y(train.y.maxCoeff());
    const double out_span = comp.outcome_hi - comp.outcome_lo;
    comp.generator = nn::Mlp(widths_of(d + 3 + cfg.noise_dim, cfg.generator_hidden, 1), nn::Activation::kRelu,
                             nn::Activation::kSigmoid, rng::derive(seed, rng::Stream::kInit, 101));
    comp.discriminator = nn::Mlp(widths_of(d + 2 * dosages, cfg.discriminator_hidden, dosages),
                                 nn::Activation::kRelu, nn::Activation::kLinear,
                                 rng::derive(seed, rng::Stream::kInit, 102));

    nn::OptimizerConfig oc;
    oc.kind = cfg.gan_optimizer;
    oc.learning_rate = cfg.gan_learning_rate;
    nn::Optimizer g_opt(comp.generator, oc);
    nn::Optimizer d_opt(comp.discriminator, oc);

    auto e = rng::engine(seed, rng::Stream::kAdversarial);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double collapse_level = cfg.collapse_fraction * std::log(static_cast<double>(dosages));
    std::size_t collapsed = 0;

    for (std::size_t epoch = 1; epoch <= cfg.gan_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), e);
        GanEpoch rec;
        rec.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.gan_batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.gan_batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const nn::Matrix x = nn::gather_rows(train.x, rows);
            const Eigen::VectorXd t_f = gather(train.t, rows);
            const Eigen::VectorXd y_f = gather(train.y, rows);
            const auto b = x.rows();

            const auto sets = draw_dosage_sets(b, dosages, t_f, e);
            const nn::Matrix z = normal_matrix(b, cfg.noise_dim, e);
            // The factual slot's generator row targets t_f and feeds the reconstruction term only.
            const auto g_trace = comp.generator.forward_trace(generator_input(x, t_f, y_f, z, sets.t, comp.scaling));
            const nn::Matrix generated =
                g_trace.output.unaryExpr([&comp](double v) { return comp.generated_outcome(v); });
            const nn::Matrix d_in = discriminator_input(x, sets, y_f, generated, comp.scaling);

            const auto d_trace = comp.discriminator.forward_trace(d_in);
            const auto d_loss = nn::softmax_cross_entropy(d_trace.output, sets.factual_slot);
            d_opt.step(comp.discriminator, comp.discriminator.backward(d_trace, d_loss.grad));
            rec.discriminator_accuracy += argmax_accuracy(d_trace.output, sets.factual_slot);

            const auto d_trace2 = comp.discriminator.forward_trace(d_in);
            const auto g_adv = nn::confusion_loss(d_trace2.output, sets.factual_slot);
            nn::Matrix d_input_grad;
            comp.discriminator.backward(d_trace2, g_adv.grad, &d_input_grad);

            nn::Matrix g_out_grad = nn::Matrix::Zero(b * dosages, 1);
            double recon = 0.0;
            for (Eigen::Index i = 0; i < b; ++i) {
                const int k = sets.factual_slot[static_cast<std::size_t>(i)];
                for (int j = 0; j < dosages; ++j) {
                    const Eigen::Index r = i * dosages + j;
                    if (j == k) {
                        const double resid = generated(r, 0) - comp.scaling.scale_y(y_f[i]);
                        recon += resid * resid;
                        g_out_grad(r, 0) = out_span * cfg.reconstruction_weight * 2.0 * resid / static_cast<double>(b);
                    } else {
                        g_out_grad(r, 0) = out_span * d_input_grad(i, d + 2 * j + 1);
                    }
                }
            }
            g_opt.step(comp.generator, comp.generator.backward(g_trace, g_out_grad));

            rec.discriminator_loss += d_loss.value;
            rec.generator_loss += g_adv.value + cfg.reconstruction_weight * recon / static_cast<double>(b);
            rec.reconstruction_mse += recon / static_cast<double>(b);
            ++batches;
        }
        const double nb = static_cast<double>(batches);
        rec.discriminator_loss /= nb;
        rec.generator_loss /= nb;
        rec.reconstruction_mse /= nb;
        rec.discriminator_accuracy /= nb;
        if (!std::isfinite(rec.discriminator_loss) || !std::isfinite(rec.generator_loss)) {
            throw TrainingError("adversarial training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                "; lower gan_learning_rate");
        }
        if (history != nullptr) history->push_back(rec);
        collapsed = rec.discriminator_loss < collapse_level ? collapsed + 1 : 0;
        if (collapsed >= cfg.collapse_epochs) {
            std::ostringstream os;
            os << "adversarial training collapsed: discriminator loss below " << collapse_level << " for "
               << cfg.collapse_epochs << " consecutive epochs (epoch " << epoch << "); lower gan_learning_rate";
            throw TrainingError(os.str());
        }
    }
    return comp;
}

SciganFit fit_scigan(const ObservedData& train, const ObservedData& valid, OutcomeKind kind, const SciganConfig& cfg,
                     std::uint64_t seed) {
    if (train.size() == 0 || valid.size() == 0) throw DataError("fit_scigan: empty train or valid split");
    SciganFit out;
    out.components = train_counterfactual_gan(train, cfg, seed, &out.gan_history);
    const auto& s = out.components.scaling;

    // Augmented set: every factual pair, then `augmentation` generated pairs per contract.
    const Eigen::Index n = train.size();
    const Eigen::Index a = cfg.augmentation;
    nn::Matrix x_aug(n * (a + 1), train.x.cols());
    Eigen::VectorXd t_aug(n * (a + 1));
    Eigen::VectorXd y_aug(n * (a + 1));
    x_aug.topRows(n) = train.x;
    t_aug.head(n) = train.t;
    y_aug.head(n) = train.y;
    if (a > 0) {
        auto e = rng::engine(seed, rng::Stream::kAugment, 1);
        nn::Matrix x_rep(n * a, train.x.cols());
        Eigen::VectorXd t_f(n * a), y_f(n * a), t_new(n * a);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index r = 0; r < a; ++r) {
                const Eigen::Index row = i * a + r;
                x_rep.row(row) = train.x.row(i);
                t_f[row] = train.t[i];
                y_f[row] = train.y[i];
                t_new[row] = rng::uniform(e, 0.0, kMaxPmFrequency);
            }
        }
        const Eigen::VectorXd y_new = out.components.generate(x_rep, t_f, y_f, t_new, rng::derive(seed, rng::Stream::kAugment, 2));
        x_aug.bottomRows(n * a) = x_rep;
        t_aug.tail(n * a) = t_new;
        y_aug.tail(n * a) = y_new;
    }

    out.fit = search_and_train(EstimatorKind::kScigan, kind, with_scaled_t(x_aug, t_aug, s), scaled_targets(y_aug, s),
                               with_scaled_t(valid.x, valid.t, s), scaled_targets(valid.y, s), s, cfg.inference,
                               rng::derive(seed, rng::Stream::kInit, 200));
    return out;
}

AverageEffect::AverageEffect(const OutcomeEstimator& e, nn::Matrix population)
    : estimator_(&e), population_(std::move(population)) {
    if (population_.rows() == 0) throw DataError("average effect over an empty population");
}

double AverageEffect::operator()(double t) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < population_.rows(); ++i) {
        const Eigen::RowVectorXd row = population_.row(i);
        s += estimator_->predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), t);
    }
    return s / static_cast<double>(population_.rows());
}

Eigen::VectorXd AverageEffect::curve(std::span<const double> t, Execution exec) const {
    const RowMatrix table = estimator_->predict_curves(population_, t, exec);
    return exec == Execution::kParallel ? kernels::parallel::column_mean(table) : kernels::serial::column_mean(table);
}

AverageEffect average_effect_estimator(const OutcomeEstimator& e, const nn::Matrix& population) {
    return AverageEffect(e, population);
}

nlohmann::json to_json(const NetEstimator& e, const TreatmentGrid& grid, const nlohmann::json& train_config) {
    const auto& s = e.scaling();
    return {{"schema_version", kEstimatorSchemaVersion},
            {"estimator", to_string(e.kind())},
            {"outcome", to_string(e.outcome())},
            {"grid", {{"t_min", grid.t_min()}, {"t_max", grid.t_max()}, {"step", grid.step()}}},
            {"train_config", train_config},
            {"scaling", {{"t_center", s.t_center}, {"t_half_range", s.t_half_range}, {"y_mean", s.y_mean}, {"y_std", s.y_std}}},
            {"network", nn::to_json(e.net())}};
}

NetEstimator estimator_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != kEstimatorSchemaVersion) {
            throw DataError("unsupported estimator schema_version");
        }
        InputScaling s;
        const auto& sj = j.at("scaling");
        s.t_center = sj.at("t_center").get<double>();
        s.t_half_range = sj.at("t_half_range").get<double>();
        s.y_mean = sj.at("y_mean").get<double>();
        s.y_std = sj.at("y_std").get<double>();
        return NetEstimator(parse_estimator_kind(j.at("estimator").get<std::string>()),
                            parse_outcome_kind(j.at("outcome").get<std::string>()), nn::mlp_from_json(j.at("network")), s);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed estimator checkpoint: ") + e.what());
    }
}

}  // namespace maintcause
