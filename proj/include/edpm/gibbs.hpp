#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/math.hpp"
#include "edpm/model.hpp"
#include "edpm/rng.hpp"
#include "edpm/sticks.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Full sampler state: mixture structure, component parameters, labels,
/// and the two concentration parameters being learned.
struct EDPMState {
    StickState sticks;
    WeightState weights;
    AtomState atoms;
    Assignments assign;
    double alpha_theta = 1.0;
    Eigen::VectorXd alpha_psi;

    void validate(const TruncationLevels& levels) const {
        sticks.validate(levels);
        weights.validate(levels);
        atoms.validate(levels);
        assign.validate(levels);
        if (!(alpha_theta > 0.0) || alpha_psi.size() != levels.n_theta ||
            (alpha_psi.array() <= 0.0).any()) {
            throw validation_error("EDPMState: concentrations must be positive");
        }
    }
};

/// Chain controls. Iterations counts kept sweeps after burn-in, recorded
/// every thin-th sweep. Probes are covariate points at which the mixture
/// regression prediction is recorded.
struct ChainConfig {
    int iterations = 2500;
    int burn_in = 500;
    int thin = 1;
    std::vector<Eigen::VectorXd> probes;
    bool update_concentrations = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 1 || burn_in < 0 || thin < 1) {
            throw validation_error(
                "ChainConfig: need iterations >= 1, burn_in >= 0, thin >= 1");
        }
    }
};

/// One recorded sweep.
struct ChainRecord {
    double alpha_theta = 0.0;
    Eigen::VectorXd alpha_psi;
    int occupied_theta = 0;
    int occupied_pairs = 0;
    Eigen::VectorXd ey_probe;
};

/// Recorded chain output plus the measured cost of the assignment block:
/// assignment_ops counts every scored (observation, pair) combination.
struct ChainTrace {
    std::vector<ChainRecord> records;
    long long assignment_ops = 0;
    int sweeps = 0;
};

/// Draw labels for every observation from the categorical conditional with
/// log weight log p_k + log p_jk + log f(y | x' theta_k) + log f(x | mu_jk).
/// op_count, when given, accumulates the number of scored pairs.
inline Assignments sample_assignments(const EDPMState& state,
                                      const Dataset& data, Rng& rng,
                                      long long* op_count = nullptr) {
    const int n = data.n();
    const int d = data.d();
    const int n_theta = static_cast<int>(state.weights.p_theta.size());

    std::vector<double> log_p_theta(n_theta);
    std::vector<std::vector<double>> log_p_psi(n_theta);
    int total_pairs = 0;
    for (int k = 0; k < n_theta; ++k) {
        log_p_theta[k] = std::log(state.weights.p_theta[k]);
        const auto& row = state.weights.p_psi[k];
        log_p_psi[k].resize(row.size());
        for (int j = 0; j < row.size(); ++j) {
            log_p_psi[k][j] = std::log(row[j]);
        }
        total_pairs += static_cast<int>(row.size());
    }

    Assignments out;
    out.k.resize(n);
    out.j.resize(n);
    std::vector<double> logw(total_pairs);
    std::vector<std::pair<int, int>> pair_of(total_pairs);
    const double log_sig_th = std::log(state.atoms.sigma_theta);
    const double inv_var_th =
        1.0 / (state.atoms.sigma_theta * state.atoms.sigma_theta);
    const double log_sig_ps = std::log(state.atoms.sigma_psi);
    const double inv_var_ps =
        1.0 / (state.atoms.sigma_psi * state.atoms.sigma_psi);

    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x_row = data.x.row(i);
        int idx = 0;
        for (int k = 0; k < n_theta; ++k) {
            const double resid = data.y[i] - x_row.dot(state.atoms.theta_star.row(k));
            const double log_lik_y =
                -0.5 * resid * resid * inv_var_th - log_sig_th;
            for (int j = 0; j < state.weights.p_psi[k].size(); ++j) {
                double ss = 0.0;
                for (int l = 0; l < d; ++l) {
                    const double r = data.x(i, l) - state.atoms.mu_psi[k](j, l);
                    ss += r * r;
                }
                logw[idx] = log_p_theta[k] + log_p_psi[k][j] + log_lik_y -
                            0.5 * ss * inv_var_ps - d * log_sig_ps;
                pair_of[idx] = {k, j};
                ++idx;
            }
        }
        if (op_count != nullptr) {
            *op_count += total_pairs;
        }
        int choice;
        try {
            choice = rng.categorical_from_logs(logw);
        } catch (const numerical_error&) {
            throw numerical_error(
                "sample_assignments: all pair weights underflow at row " +
                std::to_string(i));
        }
        out.k[i] = pair_of[choice].first;
        out.j[i] = pair_of[choice].second;
    }
    return out;
}

/// Draw one row of sticks from its Beta conditional given per-component
/// counts: V_j ~ Beta(n_j + 1, alpha + sum of later counts); the final
/// stick is pinned to 1.
inline Eigen::VectorXd sample_stick_row(const std::vector<int>& counts,
                                        double alpha, Rng& rng) {
    const int len = static_cast<int>(counts.size());
    if (len < 1) {
        throw validation_error("sample_stick_row: empty counts");
    }
    if (!(alpha > 0.0)) {
        throw validation_error("sample_stick_row: alpha must be positive");
    }
    Eigen::VectorXd v(len);
    long long tail = 0;
    for (int i = 0; i < len; ++i) {
        tail += counts[i];
    }
    for (int i = 0; i + 1 < len; ++i) {
        tail -= counts[i];
        v[i] = rng.beta(counts[i] + 1.0, alpha + static_cast<double>(tail));
    }
    v[len - 1] = 1.0;
    return v;
}

/// Draw all stick rows given the labels: the response row from cluster
/// counts, each covariate row from the subcluster counts inside its cluster.
inline StickState sample_sticks(const Assignments& assign,
                                const TruncationLevels& levels,
                                double alpha_theta,
                                const Eigen::VectorXd& alpha_psi, Rng& rng) {
    std::vector<int> counts_theta(levels.n_theta, 0);
    std::vector<std::vector<int>> counts_psi(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        counts_psi[k].assign(levels.m_psi[k], 0);
    }
    for (int i = 0; i < assign.n(); ++i) {
        ++counts_theta[assign.k[i]];
        ++counts_psi[assign.k[i]][assign.j[i]];
    }
    StickState sticks;
    sticks.v_theta = sample_stick_row(counts_theta, alpha_theta, rng);
    sticks.v_psi.resize(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        sticks.v_psi[k] = sample_stick_row(counts_psi[k], alpha_psi[k], rng);
    }
    return sticks;
}

/// Draw the concentrations from their Gamma conditionals built on the free
/// sticks: shape a + (#free sticks), rate b - sum log(1 - V). The pinned
/// final sticks do not contribute.
inline std::pair<double, Eigen::VectorXd> sample_alphas(
    const StickState& sticks, const TruncationLevels& levels,
    const Hyperparams& hyper, Rng& rng) {
    auto draw = [&rng](const Eigen::VectorXd& row, const GammaPair& prior) {
        double log_tail = 0.0;
        for (int i = 0; i + 1 < row.size(); ++i) {
            log_tail += std::log1p(-row[i]);
        }
        const double shape = prior.shape + static_cast<double>(row.size() - 1);
        const double rate = prior.rate - log_tail;
        if (!(shape > 0.0) || !std::isfinite(rate) || !(rate > 0.0)) {
            throw numerical_error(
                "sample_alphas: degenerate stick row saturates the conditional");
        }
        return rng.gamma(shape, rate);
    };
    const double alpha_theta = draw(sticks.v_theta, hyper.conc_prior_theta);
    Eigen::VectorXd alpha_psi(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        alpha_psi[k] = draw(sticks.v_psi[k], hyper.conc_prior_psi);
    }
    return {alpha_theta, alpha_psi};
}

/// Draw component parameters and then the noise precisions.
///
/// Regression atoms: theta_k ~ N(A^{-1}(X'Y + c_y mu0), sigma_theta^2 A^{-1})
/// with A = X'X + c_y over the rows assigned to cluster k; an empty cluster
/// reduces to the base measure. Covariate atoms: independent per coordinate
/// with precision n_kj / sigma_psi^2 + 1 / c_x.
///
/// Precisions: sigma_theta^{-2} picks up the n response residuals and, since
/// the regression-atom prior scales with sigma_theta, also the N atom
/// deviations; sigma_psi^{-2} picks up all n*d covariate residuals.
inline AtomState sample_atoms(const Dataset& data, const Assignments& assign,
                              const TruncationLevels& levels,
                              const Hyperparams& hyper,
                              const AtomState& current, Rng& rng) {
    const int n = data.n();
    const int d = data.d();
    const int n_theta = levels.n_theta;

    AtomState out;
    out.sigma_theta = current.sigma_theta;
    out.sigma_psi = current.sigma_psi;
    out.theta_star.resize(n_theta, d);
    out.mu_psi.resize(n_theta);

    // Per-cluster and per-pair sufficient statistics.
    std::vector<Eigen::MatrixXd> xtx(n_theta,
                                     Eigen::MatrixXd::Zero(d, d));
    std::vector<Eigen::VectorXd> xty(n_theta, Eigen::VectorXd::Zero(d));
    std::vector<std::vector<int>> pair_count(n_theta);
    std::vector<std::vector<Eigen::VectorXd>> pair_sum(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        pair_count[k].assign(levels.m_psi[k], 0);
        pair_sum[k].assign(levels.m_psi[k], Eigen::VectorXd::Zero(d));
    }
    for (int i = 0; i < n; ++i) {
        const int k = assign.k[i];
        const Eigen::VectorXd x_row = data.x.row(i);
        xtx[k].noalias() += x_row * x_row.transpose();
        xty[k].noalias() += x_row * data.y[i];
        ++pair_count[k][assign.j[i]];
        pair_sum[k][assign.j[i]] += x_row;
    }

    const Eigen::VectorXd cy_mu0 = hyper.c_y * hyper.mu0;
    for (int k = 0; k < n_theta; ++k) {
        const Eigen::MatrixXd a = xtx[k] + hyper.c_y;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) {
            throw numerical_error(
                "sample_atoms: singular regression system in cluster " +
                std::to_string(k));
        }
        const Eigen::VectorXd mean = llt.solve(xty[k] + cy_mu0);
        Eigen::VectorXd z(d);
        for (int l = 0; l < d; ++l) {
            z[l] = rng.normal();
        }
        out.theta_star.row(k) =
            (mean + current.sigma_theta * llt.matrixU().solve(z)).transpose();

        out.mu_psi[k].resize(levels.m_psi[k], d);
        const double inv_var_ps =
            1.0 / (current.sigma_psi * current.sigma_psi);
        for (int j = 0; j < levels.m_psi[k]; ++j) {
            for (int l = 0; l < d; ++l) {
                const double prec =
                    pair_count[k][j] * inv_var_ps + 1.0 / hyper.c_x[l];
                const double mean_jl =
                    (pair_sum[k][j][l] * inv_var_ps + hyper.m[l] / hyper.c_x[l]) /
                    prec;
                out.mu_psi[k](j, l) = rng.normal(mean_jl, 1.0 / std::sqrt(prec));
            }
        }
    }

    double sse_y = 0.0;
    double sse_x = 0.0;
    for (int i = 0; i < n; ++i) {
        const int k = assign.k[i];
        const int j = assign.j[i];
        const double r =
            data.y[i] - data.x.row(i).dot(out.theta_star.row(k));
        sse_y += r * r;
        for (int l = 0; l < d; ++l) {
            const double rx = data.x(i, l) - out.mu_psi[k](j, l);
            sse_x += rx * rx;
        }
    }
    double atom_quad = 0.0;
    for (int k = 0; k < n_theta; ++k) {
        const Eigen::VectorXd diff =
            out.theta_star.row(k).transpose() - hyper.mu0;
        atom_quad += diff.dot(hyper.c_y * diff);
    }

    const double prec_theta =
        rng.gamma(hyper.prec_prior_theta.shape + 0.5 * n + 0.5 * n_theta * d,
                  hyper.prec_prior_theta.rate + 0.5 * sse_y + 0.5 * atom_quad);
    const double prec_psi =
        rng.gamma(hyper.prec_prior_psi.shape + 0.5 * n * d,
                  hyper.prec_prior_psi.rate + 0.5 * sse_x);
    out.sigma_theta = 1.0 / std::sqrt(prec_theta);
    out.sigma_psi = 1.0 / std::sqrt(prec_psi);
    return out;
}

/// One blocked sweep in fixed order: labels, response sticks, covariate
/// sticks, atoms, precisions, concentrations. The weight cache is refreshed
/// right after the stick draws.
inline EDPMState gibbs_sweep(const EDPMState& state, const Dataset& data,
                             const TruncationLevels& levels,
                             const Hyperparams& hyper, Rng& rng,
                             bool update_concentrations = true,
                             long long* op_count = nullptr) {
    EDPMState next;
    next.alpha_theta = state.alpha_theta;
    next.alpha_psi = state.alpha_psi;

    next.assign = sample_assignments(state, data, rng, op_count);
    next.sticks = sample_sticks(next.assign, levels, state.alpha_theta,
                                state.alpha_psi, rng);
    next.weights = weights_from_sticks(next.sticks, levels);
    next.atoms =
        sample_atoms(data, next.assign, levels, hyper, state.atoms, rng);
    if (update_concentrations) {
        auto alphas = sample_alphas(next.sticks, levels, hyper, rng);
        next.alpha_theta = alphas.first;
        next.alpha_psi = std::move(alphas.second);
    }
    return next;
}

namespace detail {

inline void record_sweep(const EDPMState& state, const ChainConfig& config,
                         ChainTrace& trace) {
    ChainRecord rec;
    rec.alpha_theta = state.alpha_theta;
    rec.alpha_psi = state.alpha_psi;
    std::vector<char> seen_k(state.weights.p_theta.size(), 0);
    int pairs = 0;
    std::vector<std::vector<char>> seen_kj(state.weights.p_theta.size());
    for (std::size_t k = 0; k < seen_kj.size(); ++k) {
        seen_kj[k].assign(state.weights.p_psi[k].size(), 0);
    }
    for (int i = 0; i < state.assign.n(); ++i) {
        seen_k[state.assign.k[i]] = 1;
        auto& flag = seen_kj[state.assign.k[i]][state.assign.j[i]];
        if (flag == 0) {
            flag = 1;
            ++pairs;
        }
    }
    rec.occupied_theta = 0;
    for (char s : seen_k) {
        rec.occupied_theta += s;
    }
    rec.occupied_pairs = pairs;
    rec.ey_probe.resize(static_cast<int>(config.probes.size()));
    for (std::size_t p = 0; p < config.probes.size(); ++p) {
        rec.ey_probe[static_cast<int>(p)] =
            expected_y_given_x(state.weights, state.atoms, config.probes[p])
                .value;
    }
    trace.records.push_back(std::move(rec));
}

} // namespace detail

/// Run a chain from the given initial state. Records land in trace, which
/// is filled incrementally so a numerical abort still leaves the partial
/// trace available to the caller.
inline void run_chain(const Dataset& data, const TruncationLevels& levels,
                      const Hyperparams& hyper, const EDPMState& init,
                      const ChainConfig& config, ChainTrace& trace) {
    data.validate();
    config.validate();
    hyper.validate(data.d(), levels.n_theta);
    init.validate(levels);
    for (const auto& probe : config.probes) {
        if (probe.size() != data.d()) {
            throw validation_error("run_chain: probe dimension disagrees");
        }
    }

    Rng rng(config.seed);
    EDPMState state = init;
    trace.records.clear();
    trace.records.reserve(config.iterations / config.thin + 1);
    trace.assignment_ops = 0;
    trace.sweeps = 0;

    const int total = config.burn_in + config.iterations;
    for (int it = 0; it < total; ++it) {
        state = gibbs_sweep(state, data, levels, hyper, rng,
                            config.update_concentrations,
                            &trace.assignment_ops);
        ++trace.sweeps;
        const int kept = it - config.burn_in;
        if (kept >= 0 && kept % config.thin == 0) {
            detail::record_sweep(state, config, trace);
        }
    }
}

/// Draw a complete configuration from the prior and a dataset from its
/// likelihood: concentrations and precisions from their Gamma hyperpriors,
/// sticks and atoms from the truncated prior, labels from the weights, then
/// covariates and responses. Used to initialize chains and to validate the
/// sampler against the prior.
inline std::pair<EDPMState, Dataset> prior_joint_draw(
    const TruncationLevels& levels, const Hyperparams& hyper, int n, int d,
    Rng& rng) {
    levels.validate();
    hyper.validate(d, levels.n_theta);
    if (n < 1) {
        throw validation_error("prior_joint_draw: need n >= 1");
    }
    for (const GammaPair* g : {&hyper.conc_prior_theta, &hyper.conc_prior_psi}) {
        if (!(g->shape > 0.0) || !(g->rate > 0.0)) {
            throw validation_error(
                "prior_joint_draw: concentration hyperpriors must be proper");
        }
    }

    EDPMState state;
    state.alpha_theta =
        rng.gamma(hyper.conc_prior_theta.shape, hyper.conc_prior_theta.rate);
    state.alpha_psi.resize(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        state.alpha_psi[k] =
            rng.gamma(hyper.conc_prior_psi.shape, hyper.conc_prior_psi.rate);
    }
    Hyperparams local = hyper;
    local.alpha_theta = state.alpha_theta;
    local.alpha_psi = state.alpha_psi;
    EdpDraw draw = draw_truncated_edp(levels, local, d, rng);
    state.sticks = std::move(draw.sticks);
    state.weights = std::move(draw.weights);
    state.atoms = std::move(draw.atoms);

    state.assign.k.resize(n);
    state.assign.j.resize(n);
    std::vector<double> p_theta(state.weights.p_theta.data(),
                                state.weights.p_theta.data() + levels.n_theta);
    for (int i = 0; i < n; ++i) {
        const int k = rng.categorical(p_theta);
        std::vector<double> p_row(state.weights.p_psi[k].data(),
                                  state.weights.p_psi[k].data() +
                                      levels.m_psi[k]);
        state.assign.k[i] = k;
        state.assign.j[i] = rng.categorical(p_row);
    }

    Dataset data = draw_data(state.atoms, state.assign, rng);
    return {std::move(state), std::move(data)};
}

} // namespace edpm
