#include <doctest.h>

#include <cmath>
#include <random>

#include "maintcause/errors.hpp"
#include "maintcause/nncore.hpp"

using namespace maintcause;
using namespace maintcause::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed, double scale = 1.0) {
    std::mt19937_64 e(seed);
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(e);
    }
    return m;
}

// Max over parameters of |analytic - numeric| / max(1e-6, |analytic| + |numeric|).
// Parameters (biases included) are redrawn first so no ReLU sits exactly on its kink.
double gradient_check(Mlp m, const Matrix& x, const Matrix& y, Loss loss, unsigned seed) {
    {
        std::mt19937_64 e(seed);
        std::normal_distribution<double> n(0.0, 0.5);
        auto q = m.parameters();
        for (auto& v : q) v = n(e);
        m.set_parameters(q);
    }
    const auto analytic = gradient(m, x, y, loss).flatten();
    auto p = m.parameters();
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        m.set_parameters(p);
        const double up = loss_value(m, x, y, loss);
        p[i] = keep - h;
        m.set_parameters(p);
        const double down = loss_value(m, x, y, loss);
        p[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max(1e-6, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    m.set_parameters(p);
    return worst;
}

}  // namespace

TEST_CASE("forward pass basics") {
    Dense zero{Matrix::Zero(3, 2), RowVector::Zero(2), Activation::kLinear};
    const Mlp z({zero});
    CHECK(z.forward(random_matrix(4, 3, 1)).isZero());

    Dense id{Matrix::Identity(3, 3), RowVector::Zero(3), Activation::kLinear};
    const Mlp ident({id});
    const Matrix x = random_matrix(5, 3, 2);
    CHECK(ident.forward(x) == x);

    const Mlp m(std::vector<int>{3, 8, 1}, Activation::kRelu, Activation::kLinear, 4);
    Matrix dup(2, 3);
    dup.row(0) = x.row(0);
    dup.row(1) = x.row(0);
    const Matrix out = m.forward(dup);
    CHECK(out(0, 0) == out(1, 0));
    CHECK_THROWS_AS(m.forward(random_matrix(2, 4, 3)), Error);
}

TEST_CASE("gradient check, five-parameter net") {
    // 2 -> 1 -> 1: three parameters in the first layer, two in the second
    const Mlp m(std::vector<int>{2, 1, 1}, Activation::kSigmoid, Activation::kLinear, 9);
    REQUIRE(m.parameter_count() == 5);
    CHECK(gradient_check(m, random_matrix(6, 2, 1), random_matrix(6, 1, 2), Loss::kMse, 1) < 1e-4);
}

TEST_CASE("gradient check, both losses, randomized nets") {
    for (unsigned s = 0; s < 5; ++s) {
        CAPTURE(s);
        const Mlp reg(std::vector<int>{4, 7, 5, 2}, s % 2 ? Activation::kSigmoid : Activation::kRelu,
                      Activation::kLinear, 100 + s);
        CHECK(gradient_check(reg, random_matrix(9, 4, s), random_matrix(9, 2, s + 50), Loss::kMse, s) < 1e-4);

        const Mlp disc(std::vector<int>{5, 6, 4}, Activation::kSigmoid, Activation::kLinear, 200 + s);
        Matrix cls(9, 1);
        for (int i = 0; i < 9; ++i) cls(i, 0) = (i + s) % 4;
        CHECK(gradient_check(disc, random_matrix(9, 5, s + 7), cls, Loss::kAdversarial, s + 1) < 1e-4);

        const Mlp sig(std::vector<int>{3, 4, 1}, Activation::kRelu, Activation::kSigmoid, 300 + s);
        CHECK(gradient_check(sig, random_matrix(8, 3, s + 9), random_matrix(8, 1, s + 11), Loss::kMse, s + 2) < 1e-4);
    }
}

TEST_CASE("logit gradients of the adversarial losses") {
    const Matrix logits = random_matrix(5, 4, 21);
    const std::vector<int> target{0, 3, 1, 2, 2};
    const double h = 1e-6;
    for (auto fn : {&softmax_cross_entropy, &confusion_loss}) {
        const auto l = fn(logits, target);
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                Matrix up = logits, down = logits;
                up(i, j) += h;
                down(i, j) -= h;
                const double numeric = (fn(up, target).value - fn(down, target).value) / (2 * h);
                CHECK(l.grad(i, j) == doctest::Approx(numeric).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("MSE gradient properties") {
    const Mlp m(std::vector<int>{3, 5, 1}, Activation::kRelu, Activation::kLinear, 5);
    const Matrix x = random_matrix(10, 3, 6);
    const Matrix at_min = m.forward(x);
    const auto g0 = gradient(m, x, at_min, Loss::kMse);
    for (const auto& w : g0.weight) CHECK(w.isZero());
    for (const auto& b : g0.bias) CHECK(b.isZero());

    const Matrix y = at_min.array() - 0.5;
    const Matrix y2 = at_min.array() - 1.0;
    const auto g1 = gradient(m, x, y, Loss::kMse);
    const auto g2 = gradient(m, x, y2, Loss::kMse);
    CHECK(g2.bias.back()(0) == doctest::Approx(2.0 * g1.bias.back()(0)).epsilon(1e-12));
}

TEST_CASE("learns y = 2x") {
    std::mt19937_64 e(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(1000, 1), xv(200, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = u(e);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) xv(i, 0) = u(e);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 200;
    cfg.seed = 1;
    const Mlp init(std::vector<int>{1, 16, 1}, Activation::kRelu, Activation::kLinear, 2);
    const auto r = train(init, x, 2.0 * x, xv, 2.0 * xv, cfg);
    CHECK(r.best_valid_loss < 1e-3);
    CHECK(r.model.all_finite());

    const auto again = train(init, x, 2.0 * x, xv, 2.0 * xv, cfg);
    CHECK(again.model.parameters() == r.model.parameters());
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
    const Matrix x = random_matrix(64, 2, 4);
    const Matrix y = random_matrix(64, 1, 5);  // pure noise: validation soon stops improving
    TrainConfig cfg;
    cfg.patience = 0;
    cfg.max_epochs = 100;
    cfg.learning_rate = 0.05;
    const auto r = train(Mlp(std::vector<int>{2, 8, 1}, Activation::kRelu, Activation::kLinear, 1), x, y,
                         random_matrix(32, 2, 6), random_matrix(32, 1, 7), cfg);
    REQUIRE(r.history.size() >= 2);
    CHECK(r.history.size() < cfg.max_epochs);
    const auto& h = r.history;
    for (std::size_t i = 1; i + 1 < h.size(); ++i) CHECK(h[i].valid_loss < h[i - 1].valid_loss);
    CHECK(h.back().valid_loss >= h[h.size() - 2].valid_loss);
}

TEST_CASE("convex problem: full-batch loss is non-increasing") {
    const Matrix x = random_matrix(50, 3, 8);
    Matrix w(3, 1);
    w << 1.0, -2.0, 0.5;
    const Matrix y = x * w;
    TrainConfig cfg;
    cfg.batch_size = 50;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.0;
    cfg.max_epochs = 50;
    cfg.patience = 50;
    const auto r = train(Mlp(std::vector<int>{3, 1}, Activation::kLinear, Activation::kLinear, 3), x, y, x, y, cfg);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        CHECK(r.history[i].train_loss <= r.history[i - 1].train_loss + 1e-15);
    }
}

TEST_CASE("training errors") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.learning_rate = 1e6;
    cfg.max_epochs = 5;
    cfg.patience = 2;
    const Matrix x = random_matrix(64, 2, 1, 100.0);
    CHECK_THROWS_AS(train(Mlp(std::vector<int>{2, 8, 1}, Activation::kRelu, Activation::kLinear, 1), x,
                          random_matrix(64, 1, 2, 100.0), x, random_matrix(64, 1, 3), cfg),
                    TrainingError);
}

TEST_CASE("checkpoint round-trip is exact") {
    const Mlp m(std::vector<int>{4, 6, 3, 1}, Activation::kRelu, Activation::kSigmoid, 17);
    const auto j = to_json(m);
    CHECK(j.at("schema_version") == kCheckpointSchemaVersion);
    const Mlp back = mlp_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.parameters() == m.parameters());
    CHECK(back.widths() == m.widths());
    const Matrix x = random_matrix(3, 4, 2);
    CHECK(back.forward(x) == m.forward(x));

    auto bad = j;
    bad["schema_version"] = 99;
    CHECK_THROWS_AS(mlp_from_json(bad), DataError);
}

TEST_CASE("optimizers reduce a quadratic") {
    for (auto kind : {OptimizerKind::kSgdMomentum, OptimizerKind::kAdam}) {
        Mlp m(std::vector<int>{2, 1}, Activation::kLinear, Activation::kLinear, 4);
        const Matrix x = random_matrix(20, 2, 5);
        const Matrix y = random_matrix(20, 1, 6);
        OptimizerConfig oc;
        oc.kind = kind;
        oc.learning_rate = 0.01;
        Optimizer opt(m, oc);
        const double before = loss_value(m, x, y, Loss::kMse);
        for (int i = 0; i < 200; ++i) opt.step(m, gradient(m, x, y, Loss::kMse));
        CHECK(loss_value(m, x, y, Loss::kMse) < before);
    }
}
