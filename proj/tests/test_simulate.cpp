#include <cmath>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "edpm/simulate.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("generator output has the configured shape and is valid") {
    edpm::SimConfig cfg;
    cfg.n = 150;
    cfg.d = 3;
    cfg.n_true = 6;
    cfg.m_true = 4;
    cfg.seed = 12;

    const auto [data, truth] = edpm::generate_dataset(cfg);
    REQUIRE(data.n() == 150);
    REQUIRE(data.d() == 3);
    data.validate();

    CHECK(truth.levels.n_theta == 6);
    CHECK(truth.levels.total_pairs() == 24);
    truth.sticks.validate(truth.levels);
    truth.weights.validate(truth.levels);
    truth.atoms.validate(truth.levels);
    truth.assign.validate(truth.levels);
    CHECK(truth.assign.n() == 150);
    CHECK(truth.atoms.sigma_theta == cfg.sigma);
    CHECK(truth.atoms.sigma_psi == cfg.sigma);
}

TEST_CASE("generator is deterministic in the seed and varies across seeds") {
    edpm::SimConfig cfg;
    cfg.n = 60;
    cfg.d = 2;
    cfg.seed = 777;
    cfg.scenario = edpm::Scenario::t_contaminated;

    const auto [d1, t1] = edpm::generate_dataset(cfg);
    const auto [d2, t2] = edpm::generate_dataset(cfg);
    CHECK((d1.y.array() == d2.y.array()).all());
    CHECK((d1.x.array() == d2.x.array()).all());
    CHECK(t1.assign.k == t2.assign.k);
    CHECK(t1.assign.j == t2.assign.j);
    CHECK((t1.atoms.theta_star.array() == t2.atoms.theta_star.array()).all());

    cfg.seed = 778;
    const auto [d3, t3] = edpm::generate_dataset(cfg);
    CHECK_FALSE((d1.y.array() == d3.y.array()).all());
}

TEST_CASE("response-branch weight matches its closed form at the origin") {
    const edpm::SimConfig cfg;
    // Defaults omega1 = omega2 = 2, mu1 = 0, mu2 = 1: at x1 = 0 the softmax
    // reduces to 1 / (1 + exp(-1)).
    CHECK_THAT(edpm::lambda_weight(0.0, cfg),
               WithinRel(1.0 / (1.0 + std::exp(-1.0)), 1e-14));
    // At the midpoint both kernels agree.
    CHECK_THAT(edpm::lambda_weight(0.5, cfg), WithinRel(0.5, 1e-14));
    // Far left the first kernel dominates.
    CHECK(edpm::lambda_weight(-10.0, cfg) > 0.999);
}

TEST_CASE("gaussian scenario residuals have the configured noise law") {
    edpm::SimConfig cfg;
    cfg.n = 5000;
    cfg.d = 2;
    cfg.n_true = 3;
    cfg.m_true = 2;
    cfg.sigma = 0.25;
    cfg.scenario = edpm::Scenario::gaussian;
    cfg.seed = 2024;

    const auto [data, truth] = edpm::generate_dataset(cfg);
    double mean = 0.0;
    double ss = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const int k = truth.assign.k[i];
        const double res =
            data.y[i] - data.x.row(i).dot(truth.atoms.theta_star.row(k));
        mean += res;
        ss += res * res;
    }
    mean /= data.n();
    const double sd = std::sqrt(ss / data.n() - mean * mean);
    CHECK_THAT(mean, WithinAbs(0.0, 4.0 * 0.25 / std::sqrt(5000.0)));
    CHECK_THAT(sd, WithinAbs(0.25, 0.02));
}

TEST_CASE("contaminated scenario leaves Gaussian-branch draws near the line") {
    edpm::SimConfig cfg;
    cfg.n = 2000;
    cfg.d = 2;
    cfg.sigma = 0.25;
    cfg.scenario = edpm::Scenario::t_contaminated;
    cfg.seed = 99;

    const auto [data, truth] = edpm::generate_dataset(cfg);
    // The t branch is centered at zero, not at the linear predictor, so the
    // residual spread must exceed the pure-noise value of sigma.
    double ss = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const int k = truth.assign.k[i];
        const double res =
            data.y[i] - data.x.row(i).dot(truth.atoms.theta_star.row(k));
        ss += res * res;
    }
    CHECK(std::sqrt(ss / data.n()) > 0.3);
}

TEST_CASE("generator uses several components under a diffuse prior") {
    edpm::SimConfig cfg;
    cfg.n = 400;
    cfg.alpha_theta = 3.0;
    cfg.alpha_psi = 2.0;
    cfg.seed = 5;

    const auto [data, truth] = edpm::generate_dataset(cfg);
    const std::set<int> used(truth.assign.k.begin(), truth.assign.k.end());
    CHECK(used.size() >= 2);
}

TEST_CASE("scenario names round trip and bad ones are rejected") {
    CHECK(edpm::scenario_from_string("gaussian") == edpm::Scenario::gaussian);
    CHECK(edpm::scenario_from_string("t_contaminated") ==
          edpm::Scenario::t_contaminated);
    CHECK(edpm::to_string(edpm::Scenario::gaussian) == "gaussian");
    CHECK(edpm::to_string(edpm::Scenario::t_contaminated) == "t_contaminated");
    CHECK_THROWS_AS(edpm::scenario_from_string("cauchy"),
                    edpm::validation_error);
}

TEST_CASE("generator rejects invalid configurations") {
    edpm::SimConfig cfg;
    cfg.n = 0;
    CHECK_THROWS_AS(edpm::generate_dataset(cfg), edpm::validation_error);
    cfg = edpm::SimConfig{};
    cfg.sigma = -1.0;
    CHECK_THROWS_AS(edpm::generate_dataset(cfg), edpm::validation_error);
    cfg = edpm::SimConfig{};
    cfg.alpha_theta = 0.0;
    CHECK_THROWS_AS(edpm::generate_dataset(cfg), edpm::validation_error);
}
