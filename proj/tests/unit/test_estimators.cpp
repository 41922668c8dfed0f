#include <doctest.h>

#include <cmath>
#include <random>

#include "maintcause/datagen.hpp"
#include "maintcause/errors.hpp"
#include "maintcause/estimators.hpp"

using namespace maintcause;

namespace {

// y = 2 + x - 0.05 t + noise with t independent of x.
ObservedData toy(int n, unsigned seed, double noise = 0.1) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u(-1, 1), ut(0, 20);
    std::normal_distribution<double> nz(0, noise);
    ObservedData d;
    d.x.resize(n, 1);
    d.t.resize(n);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        d.x(i, 0) = u(e);
        d.t[i] = ut(e);
        d.y[i] = 2 + d.x(i, 0) - 0.05 * d.t[i] + nz(e);
    }
    return d;
}

SupervisedConfig quick_supervised() {
    SupervisedConfig c;
    c.search.learning_rates = {0.01};
    c.search.hidden_widths = {16};
    c.train.max_epochs = 60;
    c.train.patience = 10;
    return c;
}

SciganConfig quick_scigan() {
    SciganConfig c;
    c.gan_epochs = 30;
    c.generator_hidden = {32, 32};
    c.discriminator_hidden = {32, 32};
    c.inference = quick_supervised();
    return c;
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm() / a.size(); }

}  // namespace

TEST_CASE("input scaling") {
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    const auto s = InputScaling::fit(y);
    CHECK(s.y_mean == doctest::Approx(2.5));
    CHECK(s.y_std == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.unscale_y(s.scale_y(3.7)) == doctest::Approx(3.7));
    CHECK(s.scale_t(0.0) == -1.0);
    CHECK(s.scale_t(20.0) == 1.0);
    CHECK(InputScaling::fit(Eigen::VectorXd::Constant(5, 3.0)).y_std == 1.0);
    CHECK_THROWS_AS(InputScaling::fit(Eigen::VectorXd()), DataError);
}

TEST_CASE("constant outcome is learned") {
    auto train = toy(400, 1), valid = toy(100, 2);
    train.y.setConstant(3.0);
    valid.y.setConstant(3.0);
    const auto fit = fit_supervised(train, valid, OutcomeKind::kOverhauls, SupervisedConfig{}, 7);
    for (double t : {0.0, 5.5, 13.0, 20.0}) {
        for (double x : {-0.9, 0.0, 0.8}) CHECK(std::abs(fit.estimator.predict(std::vector<double>{x}, t) - 3.0) < 1e-2);
    }
}

TEST_CASE("supervised fit is deterministic and curves agree") {
    const auto train = toy(400, 3), valid = toy(100, 4);
    const auto a = fit_supervised(train, valid, OutcomeKind::kFailures, quick_supervised(), 11);
    const auto b = fit_supervised(train, valid, OutcomeKind::kFailures, quick_supervised(), 11);
    CHECK(a.estimator.net().parameters() == b.estimator.net().parameters());
    CHECK(a.valid_mse == b.valid_mse);
    CHECK(a.valid_mse < 0.05);
    CHECK(a.estimator.outcome() == OutcomeKind::kFailures);
    CHECK(a.estimator.name() == "mlp/failures");

    const TreatmentGrid grid;
    const auto x = toy(70, 5).x;
    const auto par = a.estimator.predict_curves(x, grid.points(), Execution::kParallel);
    const auto ser = a.estimator.predict_curves(x, grid.points(), Execution::kSerial);
    CHECK(par == ser);
    for (Eigen::Index i = 0; i < x.rows(); i += 13) {
        for (std::size_t k = 0; k < grid.size(); k += 37) {
            const double p = a.estimator.predict(std::vector<double>{x(i, 0)}, grid[k]);
            CHECK(std::abs(p - par(i, static_cast<Eigen::Index>(k))) < 1e-12);
        }
    }
    const auto pairs = a.estimator.predict_pairs(x, Eigen::VectorXd::Constant(x.rows(), grid[50]));
    for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(std::abs(pairs[i] - par(i, 50)) < 1e-12);
}

TEST_CASE("hyperparameter search records every candidate") {
    auto cfg = quick_supervised();
    cfg.search.learning_rates = {0.01, 0.003};
    cfg.search.hidden_widths = {8, 16};
    cfg.train.max_epochs = 10;
    cfg.train.patience = 5;
    const auto fit = fit_supervised(toy(200, 6), toy(80, 7), OutcomeKind::kOverhauls, cfg, 1);
    REQUIRE(fit.search.size() == 4);
    double best = fit.search.front().valid_mse;
    for (const auto& r : fit.search) best = std::min(best, r.valid_mse);
    CHECK(fit.valid_mse == best);
}

TEST_CASE("counterfactual GAN on a toy problem") {
    const auto train = toy(1000, 1), valid = toy(300, 2);
    std::vector<GanEpoch> history;
    const auto comp = train_counterfactual_gan(train, quick_scigan(), 3, &history);
    REQUIRE(history.size() == 30);

    // The discriminator should be near chance at picking the factual slot.
    const double acc = comp.discriminator_accuracy(valid, 9);
    CHECK(acc < 0.3);

    const auto recon = comp.generate(valid.x, valid.t, valid.y, valid.t, 5);
    CHECK(mse(recon, valid.y) < 0.05);

    const Eigen::VectorXd target = Eigen::VectorXd::Constant(valid.size(), 15.0);
    const auto cf = comp.generate(valid.x, valid.t, valid.y, target, 5);
    const Eigen::VectorXd truth = valid.y.array() - 0.05 * (15.0 - valid.t.array());
    CHECK(mse(cf, truth) < 0.2);

    // Generated values are bounded by [0, max training outcome].
    for (Eigen::Index i = 0; i < cf.size(); ++i) {
        CHECK(cf[i] >= -1e-9);
        CHECK(cf[i] <= train.y.maxCoeff() + 1e-9);
    }
    CHECK(comp.generate(valid.x, valid.t, valid.y, target, 5) == cf);
}

TEST_CASE("SCIGAN inference network keeps the factual fit") {
    const auto g = generate_dataset(600, 0.0, 3);
    for (auto k : {OutcomeKind::kOverhauls, OutcomeKind::kFailures}) {
        const auto train = observed(g.dataset, Split::kTrain, k), valid = observed(g.dataset, Split::kValid, k);
        const auto base = fit_supervised(train, valid, k, quick_supervised(), 2);
        const auto sg = fit_scigan(train, valid, k, quick_scigan(), 2);
        CHECK(sg.fit.estimator.kind() == EstimatorKind::kScigan);
        CHECK(sg.fit.valid_mse <= 1.5 * base.valid_mse);
        CHECK(sg.gan_history.size() == 30);
    }
}

TEST_CASE("models of one outcome ignore the other") {
    const auto g = generate_dataset(200, 10.0, 4);
    auto altered = g.dataset;
    for (auto& c : altered.contracts) c.failures += 1.0;
    const auto cfg = quick_supervised();
    const auto a = fit_supervised(observed(g.dataset, Split::kTrain, OutcomeKind::kOverhauls),
                                  observed(g.dataset, Split::kValid, OutcomeKind::kOverhauls),
                                  OutcomeKind::kOverhauls, cfg, 5);
    const auto b = fit_supervised(observed(altered, Split::kTrain, OutcomeKind::kOverhauls),
                                  observed(altered, Split::kValid, OutcomeKind::kOverhauls), OutcomeKind::kOverhauls,
                                  cfg, 5);
    CHECK(a.estimator.net().parameters() == b.estimator.net().parameters());
}

TEST_CASE("observed data follows the split") {
    const auto g = generate_dataset(40, 0.0, 1);
    const auto o = observed(g.dataset, Split::kValid, OutcomeKind::kFailures);
    const auto rows = g.dataset.indices(Split::kValid);
    REQUIRE(o.size() == static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        CHECK(o.t[static_cast<Eigen::Index>(r)] == g.dataset.contracts[rows[r]].pm_freq);
        CHECK(o.y[static_cast<Eigen::Index>(r)] == g.dataset.contracts[rows[r]].failures);
    }
}

TEST_CASE("average effect") {
    const FunctionEstimator f(OutcomeKind::kOverhauls, "lin", [](std::span<const double> x, double t) {
        return x[0] + 2.0 * t;
    });
    nn::Matrix pop(3, 1);
    pop << 1, 2, 6;
    const auto ae = average_effect_estimator(f, pop);
    CHECK(ae(0.0) == doctest::Approx(3.0));
    CHECK(ae(1.5) == doctest::Approx(6.0));
    const std::vector<double> ts{0.0, 1.0, 2.0};
    const auto c = ae.curve(ts, Execution::kParallel);
    CHECK(c == ae.curve(ts, Execution::kSerial));
    CHECK(c[2] == doctest::Approx(7.0));

    // Homogeneous population: average effect equals the individual curve.
    nn::Matrix same(4, 1);
    same.setConstant(0.3);
    const auto h = average_effect_estimator(f, same);
    for (double t : ts) CHECK(h(t) == doctest::Approx(f.predict(std::vector<double>{0.3}, t)));
}

TEST_CASE("oracle estimator") {
    const auto g = generate_dataset(60, 20.0, 2);
    const OracleEstimator o(g.dataset, g.oracle, OutcomeKind::kFailures);
    for (std::size_t id : {0u, 17u, 59u}) {
        const auto& c = g.dataset.contracts[id];
        CHECK(o.predict(c.features.view(), 4.2) == g.oracle.outcome(OutcomeKind::kFailures, id, 4.2));
        CHECK(o.predict(c.features.view(), c.pm_freq) == doctest::Approx(c.failures).epsilon(1e-12));
    }
    std::vector<double> stranger(g.dataset.contracts[0].features.values);
    stranger[0] += 0.5;
    CHECK_THROWS_AS((void)o.predict(stranger, 1.0), DataError);
}

TEST_CASE("config round trip and validation") {
    SciganConfig c;
    c.reconstruction_weight = 10.0;
    c.dosage_samples = 4;
    c.inference.search.hidden_widths = {8};
    const auto back = scigan_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));

    auto j = to_json(quick_supervised());
    CHECK(to_json(supervised_config_from_json(j)) == j);
    j["bogus"] = 1;
    CHECK_THROWS_AS(supervised_config_from_json(j), ConfigError);

    SciganConfig bad;
    bad.dosage_samples = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SciganConfig{};
    bad.reconstruction_weight = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(SciganConfig{}.validate());

    CHECK(to_string(parse_estimator_kind("scigan")) == "scigan");
    CHECK_THROWS_AS(parse_estimator_kind("forest"), ConfigError);
}

TEST_CASE("estimator checkpoint round trip") {
    const auto fit = fit_supervised(toy(200, 8), toy(60, 9), OutcomeKind::kFailures, quick_supervised(), 3);
    const TreatmentGrid grid;
    const auto j = to_json(fit.estimator, grid, to_json(quick_supervised()));
    const auto back = estimator_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.kind() == fit.estimator.kind());
    CHECK(back.outcome() == OutcomeKind::kFailures);
    CHECK(back.net().parameters() == fit.estimator.net().parameters());
    CHECK(back.scaling().y_mean == fit.estimator.scaling().y_mean);
    const auto x = toy(20, 10).x;
    CHECK(back.predict_curves(x, grid.points()) == fit.estimator.predict_curves(x, grid.points()));
}

TEST_CASE("predictions are continuous in t") {
    const auto fit = fit_supervised(toy(300, 12), toy(80, 13), OutcomeKind::kOverhauls, quick_supervised(), 4);
    // Lipschitz bound from the weight norms of the network.
    double lip = fit.estimator.scaling().y_std / fit.estimator.scaling().t_half_range;
    for (const auto& layer : fit.estimator.net().layers()) lip *= layer.weight.norm();
    const std::vector<double> x{0.2};
    for (double t = 0.0; t < 20.0; t += 0.7) {
        const double d = std::abs(fit.estimator.predict(x, t + 1e-3) - fit.estimator.predict(x, t));
        CHECK(d <= lip * 1e-3 + 1e-12);
    }
}
