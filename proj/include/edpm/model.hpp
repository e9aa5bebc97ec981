#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/math.hpp"
#include "edpm/rng.hpp"
#include "edpm/sticks.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// One draw of the truncated enriched mixture prior: sticks, the induced
/// weights, and the component atoms with their noise scales.
struct EdpDraw {
    StickState sticks;
    WeightState weights;
    AtomState atoms;
};

/// Result of a mixture-regression prediction.
struct PredictResult {
    double value = 0.0;
    /// Set when every covariate density is zero, in which case value falls
    /// back to the weight-only mixture mean.
    bool underflow = false;
};

namespace detail {

/// Draw from N(mu0, sigma^2 c_y^{-1}) given the Cholesky factor of c_y.
inline Eigen::VectorXd sample_scaled_gaussian(
    const Eigen::VectorXd& mu0, const Eigen::LLT<Eigen::MatrixXd>& llt_cy,
    double sigma, Rng& rng) {
    Eigen::VectorXd z(mu0.size());
    for (int l = 0; l < z.size(); ++l) {
        z[l] = rng.normal();
    }
    // cov = sigma^2 (L L^T)^{-1}, so mu0 + sigma L^{-T} z has the right law.
    return mu0 + sigma * llt_cy.matrixU().solve(z);
}

} // namespace detail

/// Draw the truncated prior: noise precisions from their Gamma hyperpriors,
/// sticks from Beta(1, alpha) with the last stick of every row set to 1,
/// and atoms from the Gaussian base measures.
inline EdpDraw draw_truncated_edp(const TruncationLevels& levels,
                                  const Hyperparams& hyper, int d, Rng& rng) {
    levels.validate();
    hyper.validate(d, levels.n_theta);

    EdpDraw out;
    out.atoms.sigma_theta =
        1.0 / std::sqrt(rng.gamma(hyper.prec_prior_theta.shape,
                                  hyper.prec_prior_theta.rate));
    out.atoms.sigma_psi =
        1.0 / std::sqrt(rng.gamma(hyper.prec_prior_psi.shape,
                                  hyper.prec_prior_psi.rate));

    const int n_theta = levels.n_theta;
    out.sticks.v_theta.resize(n_theta);
    for (int k = 0; k + 1 < n_theta; ++k) {
        out.sticks.v_theta[k] = rng.beta_one(hyper.alpha_theta);
    }
    out.sticks.v_theta[n_theta - 1] = 1.0;

    out.sticks.v_psi.resize(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        const int m = levels.m_psi[k];
        out.sticks.v_psi[k].resize(m);
        for (int j = 0; j + 1 < m; ++j) {
            out.sticks.v_psi[k][j] = rng.beta_one(hyper.alpha_psi[k]);
        }
        out.sticks.v_psi[k][m - 1] = 1.0;
    }

    Eigen::LLT<Eigen::MatrixXd> llt_cy(hyper.c_y);
    out.atoms.theta_star.resize(n_theta, d);
    out.atoms.mu_psi.resize(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        out.atoms.theta_star.row(k) = detail::sample_scaled_gaussian(
            hyper.mu0, llt_cy, out.atoms.sigma_theta, rng);
        out.atoms.mu_psi[k].resize(levels.m_psi[k], d);
        for (int j = 0; j < levels.m_psi[k]; ++j) {
            for (int l = 0; l < d; ++l) {
                out.atoms.mu_psi[k](j, l) =
                    rng.normal(hyper.m[l], std::sqrt(hyper.c_x[l]));
            }
        }
    }

    out.weights = weights_from_sticks(out.sticks, levels);
    return out;
}

/// Regenerate a dataset from the likelihood of a given state: covariates
/// from the assigned covariate atoms, responses from the assigned
/// regressions.
inline Dataset draw_data(const AtomState& atoms, const Assignments& assign,
                         Rng& rng) {
    const int n = assign.n();
    const int d = static_cast<int>(atoms.theta_star.cols());
    Dataset data;
    data.y.resize(n);
    data.x.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int k = assign.k[i];
        const int j = assign.j[i];
        for (int l = 0; l < d; ++l) {
            data.x(i, l) = rng.normal(atoms.mu_psi[k](j, l), atoms.sigma_psi);
        }
        data.y[i] = rng.normal(data.x.row(i).dot(atoms.theta_star.row(k)),
                               atoms.sigma_theta);
    }
    return data;
}

/// Log density of a full configuration: free-stick Beta priors, atom base
/// measures, categorical assignment probabilities, and the Gaussian
/// likelihood of responses and covariates. Hyperprior terms of the
/// concentrations and precisions are not included.
inline double log_joint(const EdpDraw& state, const Assignments& assign,
                        const Dataset& data, const TruncationLevels& levels,
                        const Hyperparams& hyper) {
    data.validate();
    const int d = data.d();
    hyper.validate(d, levels.n_theta);
    state.sticks.validate(levels);
    state.weights.validate(levels);
    state.atoms.validate(levels);
    assign.validate(levels);
    if (assign.n() != data.n()) {
        throw validation_error("log_joint: assignments and data disagree in length");
    }

    double lp = 0.0;

    const int n_theta = levels.n_theta;
    for (int k = 0; k + 1 < n_theta; ++k) {
        lp += std::log(hyper.alpha_theta) +
              (hyper.alpha_theta - 1.0) * std::log1p(-state.sticks.v_theta[k]);
    }
    for (int k = 0; k < n_theta; ++k) {
        const double a = hyper.alpha_psi[k];
        for (int j = 0; j + 1 < levels.m_psi[k]; ++j) {
            lp += std::log(a) + (a - 1.0) * std::log1p(-state.sticks.v_psi[k][j]);
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt_cy(hyper.c_y);
    const double half_logdet_cy =
        Eigen::MatrixXd(llt_cy.matrixL()).diagonal().array().log().sum();
    const double sig2_th = state.atoms.sigma_theta * state.atoms.sigma_theta;
    for (int k = 0; k < n_theta; ++k) {
        const Eigen::VectorXd diff =
            state.atoms.theta_star.row(k).transpose() - hyper.mu0;
        lp += half_logdet_cy - 0.5 * d * std::log(2.0 * M_PI * sig2_th) -
              0.5 * diff.dot(hyper.c_y * diff) / sig2_th;
        for (int j = 0; j < levels.m_psi[k]; ++j) {
            for (int l = 0; l < d; ++l) {
                lp += log_normal_pdf(state.atoms.mu_psi[k](j, l), hyper.m[l],
                                     std::sqrt(hyper.c_x[l]));
            }
        }
    }

    for (int i = 0; i < assign.n(); ++i) {
        const int k = assign.k[i];
        const int j = assign.j[i];
        lp += std::log(state.weights.p_theta[k]) +
              std::log(state.weights.p_psi[k][j]);
        lp += log_normal_pdf(
            data.y[i], data.x.row(i).dot(state.atoms.theta_star.row(k)),
            state.atoms.sigma_theta);
        for (int l = 0; l < d; ++l) {
            lp += log_normal_pdf(data.x(i, l), state.atoms.mu_psi[k](j, l),
                                 state.atoms.sigma_psi);
        }
    }

    return lp;
}

/// Mixture-regression prediction E(Y | X = x): the covariate density tilts
/// the pair weights, which then average the per-cluster linear predictors.
/// All weight accumulation happens in the log domain.
inline PredictResult expected_y_given_x(const WeightState& weights,
                                        const AtomState& atoms,
                                        const Eigen::VectorXd& x) {
    const int n_theta = static_cast<int>(weights.p_theta.size());
    const int d = static_cast<int>(atoms.theta_star.cols());
    if (x.size() != d) {
        throw validation_error("expected_y_given_x: probe dimension disagrees");
    }

    std::vector<double> logw;
    std::vector<double> predictor;
    logw.reserve(n_theta);
    predictor.reserve(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        const double xt = x.dot(atoms.theta_star.row(k));
        const double log_pk = std::log(weights.p_theta[k]);
        for (int j = 0; j < weights.p_psi[k].size(); ++j) {
            double lw = log_pk + std::log(weights.p_psi[k][j]);
            for (int l = 0; l < d; ++l) {
                lw += log_normal_pdf(x[l], atoms.mu_psi[k](j, l),
                                     atoms.sigma_psi);
            }
            logw.push_back(lw);
            predictor.push_back(xt);
        }
    }

    PredictResult out;
    const double lse = log_sum_exp(logw);
    if (lse == neg_inf) {
        out.underflow = true;
        double mean = 0.0;
        for (int k = 0; k < n_theta; ++k) {
            mean += weights.p_theta[k] * x.dot(atoms.theta_star.row(k));
        }
        out.value = mean;
        return out;
    }
    double value = 0.0;
    for (std::size_t idx = 0; idx < logw.size(); ++idx) {
        value += std::exp(logw[idx] - lse) * predictor[idx];
    }
    out.value = value;
    return out;
}

} // namespace edpm
