#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace maintcause::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation : std::uint8_t { kLinear, kRelu, kSigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

// Fully connected layer y = act(x W + b) on row-major batches (one sample per row).
struct Dense {
    Matrix weight;  // in x out
    RowVector bias;  // 1 x out
    Activation activation = Activation::kLinear;

    Eigen::Index in() const { return weight.rows(); }
    Eigen::Index out() const { return weight.cols(); }
};

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<RowVector> bias;

    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);
    // All parameters flattened in layer order (weights column-major, then bias).
    std::vector<double> flatten() const;
};

class Mlp {
public:
    // Activations and pre-activations retained for backpropagation.
    struct Trace {
        std::vector<Matrix> inputs;  // input to each layer
        std::vector<Matrix> pre;     // x W + b of each layer
        Matrix output;
    };

    Mlp() = default;
    // widths = {input, hidden..., output}; hidden layers use `hidden`, the last uses `output`.
    // Weights are uniform in +-sqrt(6/fan_in) (ReLU) or +-sqrt(3/fan_in) otherwise; biases start at 0.
    Mlp(std::span<const int> widths, Activation hidden, Activation output, std::uint64_t seed);
    explicit Mlp(std::vector<Dense> layers);

    Matrix forward(const Matrix& batch) const;
    Trace forward_trace(const Matrix& batch) const;
    // d_output is dLoss/dOutput. If d_input is non-null it receives dLoss/dInput.
    Gradients backward(const Trace& trace, const Matrix& d_output, Matrix* d_input = nullptr) const;

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    std::size_t parameter_count() const;
    std::vector<int> widths() const;
    bool all_finite() const;

    const std::vector<Dense>& layers() const { return layers_; }
    std::vector<Dense>& layers() { return layers_; }

    // Flattened parameter access in Gradients::flatten order.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

private:
    void check_input(const Matrix& batch) const;

    std::vector<Dense> layers_;
};

// ---------------------------------------------------------------------------
// Losses. Each returns the mean loss and its gradient w.r.t. the network output.

struct LossValue {
    double value = 0.0;
    Matrix grad;
};

// Mean over all entries of (pred - target)^2.
LossValue mse_loss(const Matrix& pred, const Matrix& target);

// Row-wise softmax.
Matrix softmax(const Matrix& logits);

// Mean of -log softmax(logits_i)[k_i]: the discriminator's factual-identification loss.
LossValue softmax_cross_entropy(const Matrix& logits, std::span<const int> target);

// Mean of -log(1 - softmax(logits_i)[k_i]): pushes probability mass away from
// the true index, used by the generator against the discriminator.
LossValue confusion_loss(const Matrix& logits, std::span<const int> target);

enum class Loss : std::uint8_t { kMse, kAdversarial };

// Exact gradient of `loss` w.r.t. every parameter. For kAdversarial the targets
// are a single column of class indices and the loss is softmax_cross_entropy.
Gradients gradient(const Mlp& m, const Matrix& batch, const Matrix& targets, Loss loss);
double loss_value(const Mlp& m, const Matrix& batch, const Matrix& targets, Loss loss);

// ---------------------------------------------------------------------------
// Optimization.

enum class OptimizerKind : std::uint8_t { kSgdMomentum, kAdam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::kSgdMomentum;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    Optimizer(const Mlp& shape, OptimizerConfig cfg);
    void step(Mlp& m, const Gradients& g);
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    Gradients first_;
    Gradients second_;
    std::size_t steps_ = 0;
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;  // non-improving epochs tolerated before stopping
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
    double momentum = 0.9;

    // Throws ConfigError unless learning rate, batch size and epoch budget are
    // positive and patience does not exceed the epoch budget.
    void validate() const;
    OptimizerConfig optimizer_config() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct TrainResult {
    Mlp model;  // parameters with the best validation loss seen
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_valid_loss = 0.0;
};

// Minibatch MSE training with per-epoch shuffling and early stopping on the
// validation loss. Throws TrainingError on a non-finite loss.
TrainResult train(Mlp model, const Matrix& x_train, const Matrix& y_train, const Matrix& x_valid,
                  const Matrix& y_valid, const TrainConfig& cfg);

// Rows of `m` selected by `rows`.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Checkpoints: {"schema_version", "kind": "mlp", "layers": [{in, out, activation,
// weight (row-major), bias}]}. Decimal doubles round-trip exactly.

inline constexpr int kCheckpointSchemaVersion = 1;

nlohmann::json to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace maintcause::nn
