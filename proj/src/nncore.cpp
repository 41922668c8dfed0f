#include "maintcause/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "maintcause/errors.hpp"
#include "maintcause/rng.hpp"

namespace maintcause::nn {

namespace {

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::kLinear: return z;
        case Activation::kRelu: return z.cwiseMax(0.0);
        case Activation::kSigmoid: return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    }
    return z;
}

// dLoss/dz given dLoss/dy, pre-activation z and y = act(z).
Matrix activation_backward(const Matrix& d_out, const Matrix& z, Activation a) {
    switch (a) {
        case Activation::kLinear: return d_out;
        case Activation::kRelu: return d_out.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        case Activation::kSigmoid: {
            const Matrix s = activate(z, Activation::kSigmoid);
            return d_out.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
        }
    }
    return d_out;
}

double log_sum_exp(const Eigen::Ref<const RowVector>& row) {
    const double m = row.maxCoeff();
    return m + std::log((row.array() - m).exp().sum());
}

double log_sum_exp_except(const Eigen::Ref<const RowVector>& row, Eigen::Index skip) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (j != skip) m = std::max(m, row[j]);
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (j != skip) s += std::exp(row[j] - m);
    }
    return m + std::log(s);
}

void check_targets(const Matrix& logits, std::span<const int> target) {
    if (static_cast<std::size_t>(logits.rows()) != target.size()) {
        throw DataError("adversarial loss: one target index per row required");
    }
    for (int k : target) {
        if (k < 0 || k >= logits.cols()) throw DataError("adversarial loss: target index out of range");
    }
}

std::vector<int> indices_from_column(const Matrix& targets) {
    if (targets.cols() != 1) throw DataError("adversarial targets must be a single column of indices");
    std::vector<int> idx(static_cast<std::size_t>(targets.rows()));
    for (Eigen::Index i = 0; i < targets.rows(); ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(targets(i, 0));
    return idx;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::kLinear: return "linear";
        case Activation::kRelu: return "relu";
        case Activation::kSigmoid: return "sigmoid";
    }
    return "?";
}

Activation parse_activation(std::string_view s) {
    if (s == "linear") return Activation::kLinear;
    if (s == "relu") return Activation::kRelu;
    if (s == "sigmoid") return Activation::kSigmoid;
    throw DataError("unknown activation '" + std::string(s) + "'");
}

Gradients& Gradients::operator+=(const Gradients& other) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] += other.weight[l];
        bias[l] += other.bias[l];
    }
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] *= s;
        bias[l] *= s;
    }
    return *this;
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.insert(out.end(), weight[l].data(), weight[l].data() + weight[l].size());
        out.insert(out.end(), bias[l].data(), bias[l].data() + bias[l].size());
    }
    return out;
}

Mlp::Mlp(std::span<const int> widths, Activation hidden, Activation output, std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
    for (int w : widths) {
        if (w <= 0) throw ConfigError("layer widths must be positive");
    }
    auto e = rng::engine(seed, rng::Stream::kInit);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Dense d;
        d.activation = (l + 2 == widths.size()) ? output : hidden;
        const double fan_in = widths[l];
        const double limit = std::sqrt((d.activation == Activation::kRelu ? 6.0 : 3.0) / fan_in);
        d.weight.resize(widths[l], widths[l + 1]);
        // Row-major fill so the draw order does not depend on storage order.
        for (Eigen::Index r = 0; r < d.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = rng::uniform(e, -limit, limit);
        }
        // Output layer starts at zero.
        if (l + 2 == widths.size()) d.weight.setZero();
        d.bias = RowVector::Zero(widths[l + 1]);
        layers_.push_back(std::move(d));
    }
}

Mlp::Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DataError("an MLP needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].bias.size() != layers_[l].out()) throw DataError("layer bias width mismatch");
        if (l > 0 && layers_[l].in() != layers_[l - 1].out()) throw DataError("layer widths do not chain");
    }
}

void Mlp::check_input(const Matrix& batch) const {
    if (layers_.empty()) throw DataError("forward on an empty MLP");
    if (batch.cols() != input_dim()) {
        std::ostringstream os;
        os << "MLP input has " << batch.cols() << " columns, expected " << input_dim();
        throw DataError(os.str());
    }
}

Matrix Mlp::forward(const Matrix& batch) const {
    check_input(batch);
    Matrix a = batch;
    for (const auto& d : layers_) {
        Matrix z = a * d.weight;
        z.rowwise() += d.bias;
        a = activate(z, d.activation);
    }
    return a;
}

Mlp::Trace Mlp::forward_trace(const Matrix& batch) const {
    check_input(batch);
    Trace t;
    t.inputs.reserve(layers_.size());
    t.pre.reserve(layers_.size());
    Matrix a = batch;
    for (const auto& d : layers_) {
        Matrix z = a * d.weight;
        z.rowwise() += d.bias;
        t.inputs.push_back(std::move(a));
        a = activate(z, d.activation);
        t.pre.push_back(std::move(z));
    }
    t.output = std::move(a);
    return t;
}

Gradients Mlp::backward(const Trace& trace, const Matrix& d_output, Matrix* d_input) const {
    if (d_output.rows() != trace.output.rows() || d_output.cols() != trace.output.cols()) {
        throw DataError("backward: output gradient shape mismatch");
    }
    Gradients g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = d_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Matrix dz = activation_backward(delta, trace.pre[l], layers_[l].activation);
        g.weight[l] = trace.inputs[l].transpose() * dz;
        g.bias[l] = dz.colwise().sum();
        if (l > 0 || d_input != nullptr) delta = dz * layers_[l].weight.transpose();
    }
    if (d_input != nullptr) *d_input = std::move(delta);
    return g;
}

Eigen::Index Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
Eigen::Index Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& d : layers_) n += static_cast<std::size_t>(d.weight.size() + d.bias.size());
    return n;
}

std::vector<int> Mlp::widths() const {
    std::vector<int> w;
    if (layers_.empty()) return w;
    w.push_back(static_cast<int>(layers_.front().in()));
    for (const auto& d : layers_) w.push_back(static_cast<int>(d.out()));
    return w;
}

bool Mlp::all_finite() const {
    for (const auto& d : layers_) {
        if (!d.weight.allFinite() || !d.bias.allFinite()) return false;
    }
    return true;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& d : layers_) {
        out.insert(out.end(), d.weight.data(), d.weight.data() + d.weight.size());
        out.insert(out.end(), d.bias.data(), d.bias.data() + d.bias.size());
    }
    return out;
}

void Mlp::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw DataError("parameter vector has the wrong length");
    std::size_t pos = 0;
    for (auto& d : layers_) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), d.weight.size(), d.weight.data());
        pos += static_cast<std::size_t>(d.weight.size());
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), d.bias.size(), d.bias.data());
        pos += static_cast<std::size_t>(d.bias.size());
    }
}

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw DataError("mse: shape mismatch");
    const double count = static_cast<double>(pred.size());
    const Matrix resid = pred - target;
    return {resid.squaredNorm() / count, (2.0 / count) * resid};
}

Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double lse = log_sum_exp(logits.row(i));
        p.row(i) = (logits.row(i).array() - lse).exp().matrix();
    }
    return p;
}

LossValue softmax_cross_entropy(const Matrix& logits, std::span<const int> target) {
    check_targets(logits, target);
    const double b = static_cast<double>(logits.rows());
    LossValue out;
    out.grad = softmax(logits);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int k = target[static_cast<std::size_t>(i)];
        out.value += log_sum_exp(logits.row(i)) - logits(i, k);
        out.grad(i, k) -= 1.0;
    }
    out.value /= b;
    out.grad /= b;
    return out;
}

LossValue confusion_loss(const Matrix& logits, std::span<const int> target) {
    check_targets(logits, target);
    const double b = static_cast<double>(logits.rows());
    LossValue out;
    const Matrix p = softmax(logits);
    out.grad.resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int k = target[static_cast<std::size_t>(i)];
        const double lse = log_sum_exp(logits.row(i));
        const double log_rest = log_sum_exp_except(logits.row(i), k);
        // -log(1 - p_k) = lse - log sum_{j != k} exp(z_j)
        out.value += lse - log_rest;
        // d/dz_j = p_j - q_j, with q the softmax restricted to j != k.
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const double q = (j == k) ? 0.0 : std::exp(logits(i, j) - log_rest);
            out.grad(i, j) = p(i, j) - q;
        }
    }
    out.value /= b;
    out.grad /= b;
    return out;
}

Gradients gradient(const Mlp& m, const Matrix& batch, const Matrix& targets, Loss loss) {
    const auto trace = m.forward_trace(batch);
    if (loss == Loss::kMse) return m.backward(trace, mse_loss(trace.output, targets).grad);
    const auto idx = indices_from_column(targets);
    return m.backward(trace, softmax_cross_entropy(trace.output, idx).grad);
}

double loss_value(const Mlp& m, const Matrix& batch, const Matrix& targets, Loss loss) {
    const Matrix out = m.forward(batch);
    if (loss == Loss::kMse) return mse_loss(out, targets).value;
    return softmax_cross_entropy(out, indices_from_column(targets)).value;
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd_momentum"; }

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd_momentum") return OptimizerKind::kSgdMomentum;
    if (s == "adam") return OptimizerKind::kAdam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

Optimizer::Optimizer(const Mlp& shape, OptimizerConfig cfg) : cfg_(cfg) {
    for (const auto& d : shape.layers()) {
        first_.weight.push_back(Matrix::Zero(d.in(), d.out()));
        first_.bias.push_back(RowVector::Zero(d.out()));
    }
    second_ = first_;
}

void Optimizer::step(Mlp& m, const Gradients& g) {
    ++steps_;
    auto& layers = m.layers();
    if (cfg_.kind == OptimizerKind::kSgdMomentum) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            first_.weight[l] = cfg_.momentum * first_.weight[l] - cfg_.learning_rate * g.weight[l];
            first_.bias[l] = cfg_.momentum * first_.bias[l] - cfg_.learning_rate * g.bias[l];
            layers[l].weight += first_.weight[l];
            layers[l].bias += first_.bias[l];
        }
        return;
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const double lr = cfg_.learning_rate * std::sqrt(c2) / c1;
    auto update = [&](auto& param, auto& m1, auto& m2, const auto& grad) {
        m1 = cfg_.beta1 * m1 + (1.0 - cfg_.beta1) * grad;
        m2 = cfg_.beta2 * m2 + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * m1.array() / (m2.array().sqrt() + cfg_.epsilon);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, first_.weight[l], second_.weight[l], g.weight[l]);
        update(layers[l].bias, first_.bias[l], second_.bias[l], g.bias[l]);
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (max_epochs == 0) throw ConfigError("epoch budget must be positive");
    if (patience > max_epochs) throw ConfigError("patience must not exceed the epoch budget");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

OptimizerConfig TrainConfig::optimizer_config() const {
    OptimizerConfig oc;
    oc.kind = optimizer;
    oc.learning_rate = learning_rate;
    oc.momentum = momentum;
    oc.beta1 = 0.9;
    return oc;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

TrainResult train(Mlp model, const Matrix& x_train, const Matrix& y_train, const Matrix& x_valid,
                  const Matrix& y_valid, const TrainConfig& cfg) {
    cfg.validate();
    if (x_train.rows() == 0 || x_valid.rows() == 0) throw DataError("training needs non-empty train and valid splits");
    if (x_train.rows() != y_train.rows() || x_valid.rows() != y_valid.rows()) {
        throw DataError("feature and target row counts differ");
    }

    Optimizer opt(model, cfg.optimizer_config());
    auto shuffle_rng = rng::engine(cfg.seed, rng::Stream::kShuffle);
    std::vector<std::size_t> order(static_cast<std::size_t>(x_train.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.model = model;
    result.best_valid_loss = mse_loss(model.forward(x_valid), y_valid).value;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const Matrix xb = gather_rows(x_train, rows);
            const Matrix yb = gather_rows(y_train, rows);
            const auto trace = model.forward_trace(xb);
            const auto loss = mse_loss(trace.output, yb);
            if (!std::isfinite(loss.value)) {
                throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                    "; try a lower learning rate");
            }
            opt.step(model, model.backward(trace, loss.grad));
            loss_sum += loss.value;
            ++batches;
        }
        const double valid_loss = mse_loss(model.forward(x_valid), y_valid).value;
        if (!std::isfinite(valid_loss)) {
            throw TrainingError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch) +
                                "; try a lower learning rate");
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(batches), valid_loss});
        if (valid_loss < result.best_valid_loss) {
            result.best_valid_loss = valid_loss;
            result.best_epoch = epoch;
            result.model = model;
            stale = 0;
        } else if (++stale > cfg.patience) {
            break;
        }
    }
    return result;
}

nlohmann::json to_json(const Mlp& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& d : m.layers()) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(d.weight.size()));
        for (Eigen::Index r = 0; r < d.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < d.weight.cols(); ++c) w.push_back(d.weight(r, c));
        }
        layers.push_back({{"in", d.in()},
                          {"out", d.out()},
                          {"activation", to_string(d.activation)},
                          {"weight", w},
                          {"bias", std::vector<double>(d.bias.data(), d.bias.data() + d.bias.size())}});
    }
    return {{"schema_version", kCheckpointSchemaVersion}, {"kind", "mlp"}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
            throw DataError("unsupported checkpoint schema_version");
        }
        if (j.at("kind").get<std::string>() != "mlp") throw DataError("checkpoint is not an MLP");
        std::vector<Dense> layers;
        for (const auto& lj : j.at("layers")) {
            Dense d;
            const auto in = lj.at("in").get<Eigen::Index>();
            const auto out = lj.at("out").get<Eigen::Index>();
            d.activation = parse_activation(lj.at("activation").get<std::string>());
            const auto w = lj.at("weight").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
                throw DataError("checkpoint layer array sizes do not match its widths");
            }
            d.weight.resize(in, out);
            for (Eigen::Index r = 0; r < in; ++r) {
                for (Eigen::Index c = 0; c < out; ++c) d.weight(r, c) = w[static_cast<std::size_t>(r * out + c)];
            }
            d.bias = Eigen::Map<const RowVector>(b.data(), out);
            layers.push_back(std::move(d));
        }
        return Mlp(std::move(layers));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed MLP checkpoint: ") + e.what());
    }
}

}  // namespace maintcause::nn
