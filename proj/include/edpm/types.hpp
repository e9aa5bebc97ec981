#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "edpm/errors.hpp"

namespace edpm {

/// Shape-rate parameter pair of a Gamma distribution.
struct GammaPair {
    double shape = 1.0;
    double rate = 1.0;

    double mean() const { return shape / rate; }
};

/// Parameter pair of a Beta distribution.
struct BetaPair {
    double a = 1.0;
    double b = 1.0;

    double mean() const { return a / (a + b); }
};

/// Regression dataset: responses y and covariate rows x.
struct Dataset {
    Eigen::VectorXd y;  // n responses
    Eigen::MatrixXd x;  // n x d covariates

    int n() const { return static_cast<int>(y.size()); }
    int d() const { return static_cast<int>(x.cols()); }

    void validate() const {
        if (y.size() < 1 || x.cols() < 1) {
            throw validation_error("Dataset: need n >= 1 and d >= 1");
        }
        if (x.rows() != y.size()) {
            throw validation_error("Dataset: y and x row counts disagree");
        }
        if (!y.allFinite() || !x.allFinite()) {
            throw validation_error("Dataset: entries must be finite");
        }
    }
};

/// Truncation levels: N response-side clusters, and M_k covariate-side
/// subclusters inside cluster k.
struct TruncationLevels {
    int n_theta = 0;            // N
    std::vector<int> m_psi;     // M_1..M_N

    int total_pairs() const {
        int t = 0;
        for (int m : m_psi) {
            t += m;
        }
        return t;
    }

    void validate() const {
        if (n_theta < 1) {
            throw validation_error("TruncationLevels: N must be >= 1");
        }
        if (static_cast<int>(m_psi.size()) != n_theta) {
            throw validation_error("TruncationLevels: need one M_k per cluster");
        }
        for (int m : m_psi) {
            if (m < 1) {
                throw validation_error("TruncationLevels: every M_k must be >= 1");
            }
        }
    }
};

/// Stick proportions. The last stick of the response row and of every
/// covariate row is stored as exactly 1 so the weights close to a simplex.
struct StickState {
    Eigen::VectorXd v_theta;                // length N, v_theta[N-1] == 1
    std::vector<Eigen::VectorXd> v_psi;     // row k: length M_k, last == 1

    void validate(const TruncationLevels& levels) const {
        levels.validate();
        auto check_row = [](const Eigen::VectorXd& v, const std::string& name) {
            for (int i = 0; i < v.size(); ++i) {
                if (!(v[i] >= 0.0) || !(v[i] <= 1.0)) {
                    throw validation_error("StickState: " + name +
                                           " entries must lie in [0, 1]");
                }
            }
            if (v[v.size() - 1] != 1.0) {
                throw validation_error("StickState: last stick of " + name +
                                       " must equal 1");
            }
        };
        if (v_theta.size() != levels.n_theta ||
            static_cast<int>(v_psi.size()) != levels.n_theta) {
            throw validation_error("StickState: row counts disagree with levels");
        }
        check_row(v_theta, "v_theta");
        for (int k = 0; k < levels.n_theta; ++k) {
            if (v_psi[k].size() != levels.m_psi[k]) {
                throw validation_error("StickState: v_psi row length disagrees");
            }
            check_row(v_psi[k], "v_psi[" + std::to_string(k) + "]");
        }
    }
};

/// Mixture weights induced by the sticks: p_theta over clusters and one
/// conditional row p_psi[k] over subclusters per cluster.
struct WeightState {
    Eigen::VectorXd p_theta;
    std::vector<Eigen::VectorXd> p_psi;

    void validate(const TruncationLevels& levels,
                  double tol = 1e-12) const {
        levels.validate();
        auto check_row = [tol](const Eigen::VectorXd& p, const std::string& name) {
            double sum = 0.0;
            for (int i = 0; i < p.size(); ++i) {
                if (!(p[i] >= 0.0)) {
                    throw validation_error("WeightState: " + name +
                                           " entries must be nonnegative");
                }
                sum += p[i];
            }
            if (std::abs(sum - 1.0) > tol) {
                throw validation_error("WeightState: " + name +
                                       " must sum to 1");
            }
        };
        if (p_theta.size() != levels.n_theta ||
            static_cast<int>(p_psi.size()) != levels.n_theta) {
            throw validation_error("WeightState: row counts disagree with levels");
        }
        check_row(p_theta, "p_theta");
        for (int k = 0; k < levels.n_theta; ++k) {
            if (p_psi[k].size() != levels.m_psi[k]) {
                throw validation_error("WeightState: p_psi row length disagrees");
            }
            check_row(p_psi[k], "p_psi[" + std::to_string(k) + "]");
        }
    }
};

/// Component parameters: one regression coefficient vector per cluster,
/// one covariate mean vector per (cluster, subcluster) pair, and the two
/// isotropic noise scales.
struct AtomState {
    Eigen::MatrixXd theta_star;             // N x d, row k = theta_k
    std::vector<Eigen::MatrixXd> mu_psi;    // row k: M_k x d
    double sigma_theta = 1.0;               // response noise SD
    double sigma_psi = 1.0;                 // covariate noise SD

    void validate(const TruncationLevels& levels) const {
        levels.validate();
        if (theta_star.rows() != levels.n_theta ||
            static_cast<int>(mu_psi.size()) != levels.n_theta) {
            throw validation_error("AtomState: row counts disagree with levels");
        }
        const auto d = theta_star.cols();
        if (d < 1) {
            throw validation_error("AtomState: need d >= 1");
        }
        for (int k = 0; k < levels.n_theta; ++k) {
            if (mu_psi[k].rows() != levels.m_psi[k] || mu_psi[k].cols() != d) {
                throw validation_error("AtomState: mu_psi shape disagrees");
            }
        }
        if (!(sigma_theta > 0.0) || !(sigma_psi > 0.0) ||
            !std::isfinite(sigma_theta) || !std::isfinite(sigma_psi)) {
            throw validation_error("AtomState: noise scales must be positive");
        }
        if (!theta_star.allFinite()) {
            throw validation_error("AtomState: theta_star must be finite");
        }
        for (const auto& row : mu_psi) {
            if (!row.allFinite()) {
                throw validation_error("AtomState: mu_psi must be finite");
            }
        }
    }
};

/// Per-observation component labels: cluster k_i and subcluster j_i.
struct Assignments {
    std::vector<int> k;
    std::vector<int> j;

    int n() const { return static_cast<int>(k.size()); }

    void validate(const TruncationLevels& levels) const {
        levels.validate();
        if (k.size() != j.size()) {
            throw validation_error("Assignments: label vectors disagree in length");
        }
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (k[i] < 0 || k[i] >= levels.n_theta) {
                throw validation_error("Assignments: cluster label out of range");
            }
            if (j[i] < 0 || j[i] >= levels.m_psi[k[i]]) {
                throw validation_error("Assignments: subcluster label out of range");
            }
        }
    }
};

/// Model hyperparameters. c_y is the precision-scale matrix of the
/// regression-atom prior N(mu0, sigma_theta^2 c_y^{-1}); c_x holds the
/// per-coordinate prior variances of the covariate-atom means N(m, c_x).
/// The Gamma pairs parametrize the hyperpriors on the two concentrations
/// and on the two noise precisions sigma^{-2}.
struct Hyperparams {
    double alpha_theta = 1.0;
    Eigen::VectorXd alpha_psi;          // length N

    Eigen::VectorXd mu0;                // length d
    Eigen::MatrixXd c_y;                // d x d, symmetric positive definite
    Eigen::VectorXd m;                  // length d
    Eigen::VectorXd c_x;                // length d, positive

    GammaPair conc_prior_theta{1.0, 1.0};
    GammaPair conc_prior_psi{1.0, 1.0};
    GammaPair prec_prior_theta{1.0, 1.0};
    GammaPair prec_prior_psi{1.0, 1.0};

    static Hyperparams defaults(int d, int n_theta) {
        Hyperparams h;
        h.alpha_theta = 1.0;
        h.alpha_psi = Eigen::VectorXd::Ones(n_theta);
        h.mu0 = Eigen::VectorXd::Zero(d);
        h.c_y = Eigen::MatrixXd::Identity(d, d);
        h.m = Eigen::VectorXd::Zero(d);
        h.c_x = Eigen::VectorXd::Ones(d);
        return h;
    }

    void validate(int d, int n_theta) const {
        if (!(alpha_theta > 0.0)) {
            throw validation_error("Hyperparams: alpha_theta must be positive");
        }
        if (alpha_psi.size() != n_theta) {
            throw validation_error("Hyperparams: alpha_psi must have one entry per cluster");
        }
        if ((alpha_psi.array() <= 0.0).any()) {
            throw validation_error("Hyperparams: alpha_psi entries must be positive");
        }
        if (mu0.size() != d || m.size() != d || c_x.size() != d) {
            throw validation_error("Hyperparams: base-measure sizes disagree with d");
        }
        if (c_y.rows() != d || c_y.cols() != d) {
            throw validation_error("Hyperparams: c_y must be d x d");
        }
        if (!c_y.isApprox(c_y.transpose(), 1e-10)) {
            throw validation_error("Hyperparams: c_y must be symmetric");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(c_y);
        if (llt.info() != Eigen::Success) {
            throw validation_error("Hyperparams: c_y must be positive definite");
        }
        if ((c_x.array() <= 0.0).any()) {
            throw validation_error("Hyperparams: c_x entries must be positive");
        }
        for (const GammaPair* g : {&conc_prior_theta, &conc_prior_psi,
                                   &prec_prior_theta, &prec_prior_psi}) {
            if (!(g->shape > 0.0) || !(g->rate > 0.0)) {
                throw validation_error("Hyperparams: Gamma hyperpriors must be positive");
            }
        }
    }
};

} // namespace edpm
