#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/rng.hpp"
#include "edpm/sticks.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Response mechanisms of the generator: pure Gaussian regression noise, or
/// a covariate-driven mixture of Gaussian noise and a Student-t component.
enum class Scenario {
    gaussian,
    t_contaminated,
};

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "gaussian") {
        return Scenario::gaussian;
    }
    if (s == "t_contaminated") {
        return Scenario::t_contaminated;
    }
    throw validation_error("scenario: expected 'gaussian' or 't_contaminated'");
}

inline std::string to_string(Scenario s) {
    return s == Scenario::gaussian ? "gaussian" : "t_contaminated";
}

/// Generator configuration. Component counts and concentrations control the
/// mixture sampled for the ground truth; the prior means and scales control
/// where atoms land; sigma is both the regression and the covariate noise.
struct SimConfig {
    int n = 200;
    int d = 5;
    int n_true = 10;          // response-side components
    int m_true = 6;           // covariate-side components per response atom
    double alpha_theta = 1.0;
    double alpha_psi = 1.0;
    double sigma = 0.25;
    double mu_theta_prior = 0.0;
    double sigma_theta_prior = 1.0;
    double mu_psi_prior = 0.0;
    double sigma_psi_prior = 2.0;
    Scenario scenario = Scenario::gaussian;
    double omega1 = 2.0;
    double omega2 = 2.0;
    double mu1 = 0.0;
    double mu2 = 1.0;
    double nu_min = 1.0;      // floor of the Student-t degrees of freedom
    bool t_centered_at_mean = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || d < 1 || n_true < 1 || m_true < 1) {
            throw validation_error("SimConfig: counts must be >= 1");
        }
        if (!(alpha_theta > 0.0) || !(alpha_psi > 0.0)) {
            throw validation_error("SimConfig: concentrations must be positive");
        }
        if (!(sigma > 0.0) || !(sigma_theta_prior > 0.0) ||
            !(sigma_psi_prior > 0.0)) {
            throw validation_error("SimConfig: scales must be positive");
        }
        if (!(omega1 > 0.0) || !(omega2 > 0.0)) {
            throw validation_error("SimConfig: omega weights must be positive");
        }
        if (!(nu_min > 0.0)) {
            throw validation_error("SimConfig: nu_min must be positive");
        }
    }
};

/// Everything the generator sampled: mixture structure and labels, enough
/// to evaluate the true regression function or check recovery.
struct GroundTruth {
    TruncationLevels levels;
    StickState sticks;
    WeightState weights;
    AtomState atoms;
    Assignments assign;
};

/// Probability of the Gaussian response branch as a function of the first
/// covariate: a two-kernel softmax in x1 with weights omega1, omega2 and
/// centers mu1, mu2.
inline double lambda_weight(double x1, const SimConfig& cfg) {
    const double g1 =
        cfg.omega1 * std::exp(-0.5 * cfg.omega1 * (x1 - cfg.mu1) * (x1 - cfg.mu1));
    const double g2 =
        cfg.omega2 * std::exp(-0.5 * cfg.omega2 * (x1 - cfg.mu2) * (x1 - cfg.mu2));
    return g1 / (g1 + g2);
}

/// Response draw for the contaminated scenario: with probability
/// lambda(x1) Gaussian noise around the linear predictor, otherwise a
/// unit-scale Student-t whose degrees of freedom are 2 * (linear predictor),
/// floored at nu_min. The t branch sits at zero unless t_centered_at_mean.
inline double scenario1_draw_y(const Eigen::VectorXd& x_row,
                               const Eigen::VectorXd& theta,
                               const SimConfig& cfg, Rng& rng) {
    const double xt = x_row.dot(theta);
    if (rng.uniform() < lambda_weight(x_row[0], cfg)) {
        return rng.normal(xt, cfg.sigma);
    }
    const double dof = std::max(2.0 * xt, cfg.nu_min);
    const double t = rng.student_t(dof);
    return cfg.t_centered_at_mean ? xt + t : t;
}

/// Response draw for the Gaussian scenario.
inline double scenario2_draw_y(const Eigen::VectorXd& x_row,
                               const Eigen::VectorXd& theta,
                               const SimConfig& cfg, Rng& rng) {
    return rng.normal(x_row.dot(theta), cfg.sigma);
}

/// Sample a full synthetic dataset plus its ground truth. Sticks come from
/// Beta(1, alpha) with final entries pinned to 1, atoms coordinate-wise
/// from the configured Gaussian priors, labels categorically from the
/// weights, covariates around their subcluster means, and responses from
/// the configured scenario.
inline std::pair<Dataset, GroundTruth> generate_dataset(const SimConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    GroundTruth truth;
    truth.levels.n_theta = cfg.n_true;
    truth.levels.m_psi.assign(cfg.n_true, cfg.m_true);

    truth.sticks.v_theta.resize(cfg.n_true);
    for (int k = 0; k + 1 < cfg.n_true; ++k) {
        truth.sticks.v_theta[k] = rng.beta_one(cfg.alpha_theta);
    }
    truth.sticks.v_theta[cfg.n_true - 1] = 1.0;
    truth.sticks.v_psi.resize(cfg.n_true);
    for (int k = 0; k < cfg.n_true; ++k) {
        truth.sticks.v_psi[k].resize(cfg.m_true);
        for (int j = 0; j + 1 < cfg.m_true; ++j) {
            truth.sticks.v_psi[k][j] = rng.beta_one(cfg.alpha_psi);
        }
        truth.sticks.v_psi[k][cfg.m_true - 1] = 1.0;
    }
    truth.weights = weights_from_sticks(truth.sticks, truth.levels);

    truth.atoms.sigma_theta = cfg.sigma;
    truth.atoms.sigma_psi = cfg.sigma;
    truth.atoms.theta_star.resize(cfg.n_true, cfg.d);
    truth.atoms.mu_psi.resize(cfg.n_true);
    for (int k = 0; k < cfg.n_true; ++k) {
        for (int l = 0; l < cfg.d; ++l) {
            truth.atoms.theta_star(k, l) =
                rng.normal(cfg.mu_theta_prior, cfg.sigma_theta_prior);
        }
        truth.atoms.mu_psi[k].resize(cfg.m_true, cfg.d);
        for (int j = 0; j < cfg.m_true; ++j) {
            for (int l = 0; l < cfg.d; ++l) {
                truth.atoms.mu_psi[k](j, l) =
                    rng.normal(cfg.mu_psi_prior, cfg.sigma_psi_prior);
            }
        }
    }

    std::vector<double> p_theta(truth.weights.p_theta.data(),
                                truth.weights.p_theta.data() + cfg.n_true);
    Dataset data;
    data.y.resize(cfg.n);
    data.x.resize(cfg.n, cfg.d);
    truth.assign.k.resize(cfg.n);
    truth.assign.j.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        const int k = rng.categorical(p_theta);
        const std::vector<double> p_row(truth.weights.p_psi[k].data(),
                                        truth.weights.p_psi[k].data() + cfg.m_true);
        const int j = rng.categorical(p_row);
        truth.assign.k[i] = k;
        truth.assign.j[i] = j;
        for (int l = 0; l < cfg.d; ++l) {
            data.x(i, l) = rng.normal(truth.atoms.mu_psi[k](j, l), cfg.sigma);
        }
        const Eigen::VectorXd x_row = data.x.row(i);
        const Eigen::VectorXd theta = truth.atoms.theta_star.row(k);
        data.y[i] = cfg.scenario == Scenario::gaussian
                        ? scenario2_draw_y(x_row, theta, cfg, rng)
                        : scenario1_draw_y(x_row, theta, cfg, rng);
    }
    return {std::move(data), std::move(truth)};
}

} // namespace edpm
