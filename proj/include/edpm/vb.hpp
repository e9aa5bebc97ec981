#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/gibbs.hpp"
#include "edpm/math.hpp"
#include "edpm/rng.hpp"
#include "edpm/sticks.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Initialization strategies for the variational state.
enum class InitStrategy {
    prior,        // every factor at its prior, uniform responsibilities
    kmeans_like,  // covariate-atom means seeded by farthest-point picks
    random_resp,  // uniform responsibilities perturbed by Dirichlet noise
};

inline InitStrategy init_strategy_from_string(const std::string& s) {
    if (s == "prior") {
        return InitStrategy::prior;
    }
    if (s == "kmeans_like") {
        return InitStrategy::kmeans_like;
    }
    if (s == "random_resp") {
        return InitStrategy::random_resp;
    }
    throw validation_error(
        "init strategy: expected 'prior', 'kmeans_like', or 'random_resp'");
}

/// Optimizer controls. With update_concentrations off the concentrations
/// stay fixed at the hyperparameter values; with update_precisions off the
/// noise scales stay fixed at the values below.
struct CaviOptions {
    int max_iters = 200;
    double rel_tol = 1e-8;
    InitStrategy strategy = InitStrategy::prior;
    std::uint64_t seed = 0;
    bool update_concentrations = true;
    bool update_precisions = true;
    double fixed_sigma_theta = 1.0;
    double fixed_sigma_psi = 1.0;

    void validate() const {
        if (max_iters < 1) {
            throw validation_error("CaviOptions: max_iters must be >= 1");
        }
        if (!(rel_tol > 0.0)) {
            throw validation_error("CaviOptions: rel_tol must be positive");
        }
        if (!(fixed_sigma_theta > 0.0) || !(fixed_sigma_psi > 0.0)) {
            throw validation_error("CaviOptions: fixed scales must be positive");
        }
    }
};

/// Mean-field state: Beta factors per free stick, a categorical factor per
/// observation over (cluster, subcluster) pair columns, diagonal Gaussian
/// factors per atom, and Gamma factors for precisions and concentrations.
struct VariationalState {
    TruncationLevels levels;
    int n = 0;
    int d = 0;

    std::vector<BetaPair> stick_theta;             // N-1 free sticks
    std::vector<std::vector<BetaPair>> stick_psi;  // row k: M_k - 1

    Eigen::MatrixXd resp;                          // n x total pair columns
    std::vector<int> pair_offset;                  // cluster k -> first column

    Eigen::MatrixXd atom_theta_mean;               // N x d
    Eigen::MatrixXd atom_theta_var;                // N x d
    std::vector<Eigen::MatrixXd> atom_psi_mean;    // row k: M_k x d
    std::vector<Eigen::MatrixXd> atom_psi_var;

    GammaPair prec_theta;
    GammaPair prec_psi;
    GammaPair conc_theta;
    std::vector<GammaPair> conc_psi;               // one per row

    bool conc_variational = true;
    bool prec_variational = true;
    double fixed_alpha_theta = 1.0;
    Eigen::VectorXd fixed_alpha_psi;
    double fixed_sigma_theta = 1.0;
    double fixed_sigma_psi = 1.0;

    int degenerate_resets = 0;

    int total_pairs() const { return static_cast<int>(resp.cols()); }
    int column(int k, int j) const { return pair_offset[k] + j; }

    double e_alpha_theta() const {
        return conc_variational ? conc_theta.mean() : fixed_alpha_theta;
    }
    double e_log_alpha_theta() const {
        return conc_variational ? digamma(conc_theta.shape) - std::log(conc_theta.rate)
                                : std::log(fixed_alpha_theta);
    }
    double e_alpha_psi(int k) const {
        return conc_variational ? conc_psi[k].mean() : fixed_alpha_psi[k];
    }
    double e_log_alpha_psi(int k) const {
        return conc_variational
                   ? digamma(conc_psi[k].shape) - std::log(conc_psi[k].rate)
                   : std::log(fixed_alpha_psi[k]);
    }
    double e_prec_theta() const {
        return prec_variational ? prec_theta.mean()
                                : 1.0 / (fixed_sigma_theta * fixed_sigma_theta);
    }
    double e_log_prec_theta() const {
        return prec_variational
                   ? digamma(prec_theta.shape) - std::log(prec_theta.rate)
                   : -2.0 * std::log(fixed_sigma_theta);
    }
    double e_prec_psi() const {
        return prec_variational ? prec_psi.mean()
                                : 1.0 / (fixed_sigma_psi * fixed_sigma_psi);
    }
    double e_log_prec_psi() const {
        return prec_variational
                   ? digamma(prec_psi.shape) - std::log(prec_psi.rate)
                   : -2.0 * std::log(fixed_sigma_psi);
    }
};

/// Optimizer output: the final state, the ELBO after every sweep, whether
/// the relative-change criterion fired, and the number of sweeps run.
struct CaviResult {
    VariationalState state;
    std::vector<double> elbo_trace;
    bool converged = false;
    int iterations = 0;
};

/// Concentration estimates read off the variational factors.
struct AlphaEstimates {
    double alpha_theta = 1.0;
    Eigen::VectorXd alpha_psi;
};

namespace detail {

inline double beta_e_log(const BetaPair& f) {
    return digamma(f.a) - digamma(f.a + f.b);
}

inline double beta_e_log1m(const BetaPair& f) {
    return digamma(f.b) - digamma(f.a + f.b);
}

/// E_q[log q] of a Beta factor.
inline double beta_e_log_q(const BetaPair& f) {
    return -log_beta(f.a, f.b) + (f.a - 1.0) * beta_e_log(f) +
           (f.b - 1.0) * beta_e_log1m(f);
}

/// E_q[log q] of a Gamma factor.
inline double gamma_e_log_q(const GammaPair& f) {
    return f.shape * std::log(f.rate) - std::lgamma(f.shape) +
           (f.shape - 1.0) * (digamma(f.shape) - std::log(f.rate)) - f.shape;
}

/// Expected log weights E[log p_k] down one stick row. free has one Beta
/// factor per free stick; the row has free.size() + 1 components.
inline std::vector<double> expected_log_weights(
    const std::vector<BetaPair>& free) {
    std::vector<double> out(free.size() + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < free.size(); ++k) {
        out[k] = acc + beta_e_log(free[k]);
        acc += beta_e_log1m(free[k]);
    }
    out[free.size()] = acc;
    return out;
}

/// Per-cluster responsibility mass summed over that cluster's columns.
inline Eigen::MatrixXd cluster_resp(const VariationalState& s) {
    Eigen::MatrixXd rbar(s.n, s.levels.n_theta);
    for (int k = 0; k < s.levels.n_theta; ++k) {
        rbar.col(k) = s.resp
                          .middleCols(s.pair_offset[k], s.levels.m_psi[k])
                          .rowwise()
                          .sum();
    }
    return rbar;
}

inline void update_responsibilities(VariationalState& s, const Dataset& data) {
    const int n = s.n;
    const int d = s.d;
    const int n_theta = s.levels.n_theta;
    const double e_prec_th = s.e_prec_theta();
    const double e_log_prec_th = s.e_log_prec_theta();
    const double e_prec_ps = s.e_prec_psi();
    const double e_log_prec_ps = s.e_log_prec_psi();

    const std::vector<double> elw_theta = expected_log_weights(s.stick_theta);
    std::vector<std::vector<double>> elw_psi(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        elw_psi[k] = expected_log_weights(s.stick_psi[k]);
    }

    std::vector<double> logw(s.total_pairs());
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x_row = data.x.row(i);
        const Eigen::VectorXd x_sq = x_row.array().square();
        for (int k = 0; k < n_theta; ++k) {
            const double resid = data.y[i] - x_row.dot(s.atom_theta_mean.row(k));
            const double ey_sq =
                resid * resid + x_sq.dot(s.atom_theta_var.row(k));
            const double log_lik_y = 0.5 * e_log_prec_th -
                                     0.5 * std::log(2.0 * M_PI) -
                                     0.5 * e_prec_th * ey_sq;
            for (int j = 0; j < s.levels.m_psi[k]; ++j) {
                double ex_sq = 0.0;
                for (int l = 0; l < d; ++l) {
                    const double rx = data.x(i, l) - s.atom_psi_mean[k](j, l);
                    ex_sq += rx * rx + s.atom_psi_var[k](j, l);
                }
                logw[s.column(k, j)] =
                    elw_theta[k] + elw_psi[k][j] + log_lik_y +
                    0.5 * d * e_log_prec_ps -
                    0.5 * d * std::log(2.0 * M_PI) -
                    0.5 * e_prec_ps * ex_sq;
            }
        }
        const double lse = log_sum_exp(logw);
        if (!std::isfinite(lse)) {
            throw numerical_error(
                "cavi: responsibility row underflows at observation " +
                std::to_string(i));
        }
        for (int c = 0; c < s.total_pairs(); ++c) {
            s.resp(i, c) = std::exp(logw[c] - lse);
        }
    }
}

inline void update_sticks(VariationalState& s) {
    const int n_theta = s.levels.n_theta;
    Eigen::VectorXd cluster_mass(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        cluster_mass[k] =
            s.resp.middleCols(s.pair_offset[k], s.levels.m_psi[k]).sum();
    }
    const double e_alpha_th = s.e_alpha_theta();
    double tail = cluster_mass.sum();
    for (int k = 0; k + 1 < n_theta; ++k) {
        tail -= cluster_mass[k];
        s.stick_theta[k].a = 1.0 + cluster_mass[k];
        s.stick_theta[k].b = e_alpha_th + tail;
    }
    for (int k = 0; k < n_theta; ++k) {
        const int m = s.levels.m_psi[k];
        Eigen::VectorXd col_mass(m);
        for (int j = 0; j < m; ++j) {
            col_mass[j] = s.resp.col(s.column(k, j)).sum();
        }
        const double e_alpha_ps = s.e_alpha_psi(k);
        double row_tail = col_mass.sum();
        for (int j = 0; j + 1 < m; ++j) {
            row_tail -= col_mass[j];
            s.stick_psi[k][j].a = 1.0 + col_mass[j];
            s.stick_psi[k][j].b = e_alpha_ps + row_tail;
        }
    }
}

inline void update_atoms_theta(VariationalState& s, const Dataset& data,
                               const Hyperparams& hyper,
                               const Eigen::MatrixXd& rbar) {
    const int d = s.d;
    const double e_prec_th = s.e_prec_theta();
    const Eigen::VectorXd cy_mu0 = hyper.c_y * hyper.mu0;
    for (int k = 0; k < s.levels.n_theta; ++k) {
        const double mass = rbar.col(k).sum();
        if (mass < 1e-12) {
            s.atom_theta_mean.row(k) = hyper.mu0.transpose();
            for (int l = 0; l < d; ++l) {
                s.atom_theta_var(k, l) = 1.0 / (e_prec_th * hyper.c_y(l, l));
            }
            ++s.degenerate_resets;
            continue;
        }
        const Eigen::MatrixXd xw = data.x.array().colwise() * rbar.col(k).array();
        const Eigen::MatrixXd g = data.x.transpose() * xw + hyper.c_y;
        const Eigen::VectorXd h = xw.transpose() * data.y + cy_mu0;
        // Coordinate-wise exact update of the diagonal Gaussian factor:
        // each coordinate solves its row of the natural system given the
        // current means of the others.
        Eigen::VectorXd mean = s.atom_theta_mean.row(k);
        for (int l = 0; l < d; ++l) {
            double cross = 0.0;
            for (int l2 = 0; l2 < d; ++l2) {
                if (l2 != l) {
                    cross += g(l, l2) * mean[l2];
                }
            }
            mean[l] = (h[l] - cross) / g(l, l);
            s.atom_theta_var(k, l) = 1.0 / (e_prec_th * g(l, l));
        }
        s.atom_theta_mean.row(k) = mean.transpose();
    }
}

inline void update_atoms_psi(VariationalState& s, const Dataset& data,
                             const Hyperparams& hyper) {
    const int d = s.d;
    const double e_prec_ps = s.e_prec_psi();
    for (int k = 0; k < s.levels.n_theta; ++k) {
        for (int j = 0; j < s.levels.m_psi[k]; ++j) {
            const auto col = s.resp.col(s.column(k, j));
            const double mass = col.sum();
            if (mass < 1e-12) {
                s.atom_psi_mean[k].row(j) = hyper.m.transpose();
                s.atom_psi_var[k].row(j) = hyper.c_x.transpose();
                ++s.degenerate_resets;
                continue;
            }
            const Eigen::VectorXd sx = data.x.transpose() * col;
            for (int l = 0; l < d; ++l) {
                const double prec = e_prec_ps * mass + 1.0 / hyper.c_x[l];
                s.atom_psi_mean[k](j, l) =
                    (e_prec_ps * sx[l] + hyper.m[l] / hyper.c_x[l]) / prec;
                s.atom_psi_var[k](j, l) = 1.0 / prec;
            }
        }
    }
}

inline void update_precisions(VariationalState& s, const Dataset& data,
                              const Hyperparams& hyper,
                              const Eigen::MatrixXd& rbar) {
    const int n = s.n;
    const int d = s.d;
    const int n_theta = s.levels.n_theta;

    double rate_th = hyper.prec_prior_theta.rate;
    for (int k = 0; k < n_theta; ++k) {
        const Eigen::VectorXd resid =
            data.y - data.x * s.atom_theta_mean.row(k).transpose();
        const Eigen::VectorXd xvar =
            data.x.array().square().matrix() *
            s.atom_theta_var.row(k).transpose();
        rate_th +=
            0.5 * (rbar.col(k).dot(resid.array().square().matrix()) +
                   rbar.col(k).dot(xvar));
        const Eigen::VectorXd diff =
            s.atom_theta_mean.row(k).transpose() - hyper.mu0;
        double trace_term = 0.0;
        for (int l = 0; l < d; ++l) {
            trace_term += hyper.c_y(l, l) * s.atom_theta_var(k, l);
        }
        rate_th += 0.5 * (diff.dot(hyper.c_y * diff) + trace_term);
    }
    s.prec_theta.shape =
        hyper.prec_prior_theta.shape + 0.5 * n + 0.5 * n_theta * d;
    s.prec_theta.rate = rate_th;

    double rate_ps = hyper.prec_prior_psi.rate;
    for (int k = 0; k < n_theta; ++k) {
        for (int j = 0; j < s.levels.m_psi[k]; ++j) {
            const auto col = s.resp.col(s.column(k, j));
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                if (col[i] == 0.0) {
                    continue;
                }
                double ex_sq = 0.0;
                for (int l = 0; l < d; ++l) {
                    const double rx = data.x(i, l) - s.atom_psi_mean[k](j, l);
                    ex_sq += rx * rx + s.atom_psi_var[k](j, l);
                }
                acc += col[i] * ex_sq;
            }
            rate_ps += 0.5 * acc;
        }
    }
    s.prec_psi.shape = hyper.prec_prior_psi.shape + 0.5 * n * d;
    s.prec_psi.rate = rate_ps;
}

inline void update_concentrations(VariationalState& s,
                                  const Hyperparams& hyper) {
    double sum_log1m = 0.0;
    for (const auto& f : s.stick_theta) {
        sum_log1m += beta_e_log1m(f);
    }
    s.conc_theta.shape = hyper.conc_prior_theta.shape +
                         static_cast<double>(s.stick_theta.size());
    s.conc_theta.rate = hyper.conc_prior_theta.rate - sum_log1m;
    for (int k = 0; k < s.levels.n_theta; ++k) {
        double row_log1m = 0.0;
        for (const auto& f : s.stick_psi[k]) {
            row_log1m += beta_e_log1m(f);
        }
        s.conc_psi[k].shape = hyper.conc_prior_psi.shape +
                              static_cast<double>(s.stick_psi[k].size());
        s.conc_psi[k].rate = hyper.conc_prior_psi.rate - row_log1m;
    }
}

} // namespace detail

/// Build an initial variational state with the requested strategy.
inline VariationalState init_variational(const Dataset& data,
                                         const TruncationLevels& levels,
                                         const Hyperparams& hyper,
                                         const CaviOptions& options) {
    data.validate();
    levels.validate();
    options.validate();
    hyper.validate(data.d(), levels.n_theta);

    VariationalState s;
    s.levels = levels;
    s.n = data.n();
    s.d = data.d();
    s.conc_variational = options.update_concentrations;
    s.prec_variational = options.update_precisions;
    s.fixed_alpha_theta = hyper.alpha_theta;
    s.fixed_alpha_psi = hyper.alpha_psi;
    s.fixed_sigma_theta = options.fixed_sigma_theta;
    s.fixed_sigma_psi = options.fixed_sigma_psi;

    s.pair_offset.resize(levels.n_theta);
    int offset = 0;
    for (int k = 0; k < levels.n_theta; ++k) {
        s.pair_offset[k] = offset;
        offset += levels.m_psi[k];
    }

    s.conc_theta = s.conc_variational
                       ? hyper.conc_prior_theta
                       : GammaPair{hyper.alpha_theta, 1.0};
    s.conc_psi.assign(levels.n_theta, hyper.conc_prior_psi);
    const double e_alpha_th = s.e_alpha_theta();
    s.stick_theta.assign(levels.n_theta - 1, BetaPair{1.0, e_alpha_th});
    s.stick_psi.resize(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        s.stick_psi[k].assign(levels.m_psi[k] - 1,
                              BetaPair{1.0, s.e_alpha_psi(k)});
    }

    s.prec_theta = hyper.prec_prior_theta;
    s.prec_psi = hyper.prec_prior_psi;

    const double e_prec_th = s.e_prec_theta();
    s.atom_theta_mean = hyper.mu0.transpose().replicate(levels.n_theta, 1);
    s.atom_theta_var.resize(levels.n_theta, s.d);
    for (int l = 0; l < s.d; ++l) {
        s.atom_theta_var.col(l).setConstant(1.0 /
                                            (e_prec_th * hyper.c_y(l, l)));
    }
    s.atom_psi_mean.resize(levels.n_theta);
    s.atom_psi_var.resize(levels.n_theta);
    for (int k = 0; k < levels.n_theta; ++k) {
        s.atom_psi_mean[k] = hyper.m.transpose().replicate(levels.m_psi[k], 1);
        s.atom_psi_var[k] = hyper.c_x.transpose().replicate(levels.m_psi[k], 1);
    }

    const int pairs = offset;
    s.resp = Eigen::MatrixXd::Constant(s.n, pairs, 1.0 / pairs);

    if (options.strategy == InitStrategy::kmeans_like) {
        // Greedy farthest-point picks over covariate rows seed the
        // covariate-atom means, cycling over pair columns.
        std::vector<int> picks;
        picks.reserve(pairs);
        const Eigen::VectorXd center = data.x.colwise().mean();
        int first = 0;
        double best = -1.0;
        for (int i = 0; i < s.n; ++i) {
            const double dist = (data.x.row(i).transpose() - center).squaredNorm();
            if (dist > best) {
                best = dist;
                first = i;
            }
        }
        picks.push_back(first);
        Eigen::VectorXd min_dist(s.n);
        for (int i = 0; i < s.n; ++i) {
            min_dist[i] = (data.x.row(i) - data.x.row(first)).squaredNorm();
        }
        while (static_cast<int>(picks.size()) < std::min(pairs, s.n)) {
            int next = 0;
            min_dist.maxCoeff(&next);
            picks.push_back(next);
            for (int i = 0; i < s.n; ++i) {
                min_dist[i] = std::min(
                    min_dist[i], (data.x.row(i) - data.x.row(next)).squaredNorm());
            }
        }
        int c = 0;
        for (int k = 0; k < levels.n_theta; ++k) {
            for (int j = 0; j < levels.m_psi[k]; ++j) {
                s.atom_psi_mean[k].row(j) =
                    data.x.row(picks[c % picks.size()]);
                ++c;
            }
        }
    } else if (options.strategy == InitStrategy::random_resp) {
        Rng rng(options.seed);
        for (int i = 0; i < s.n; ++i) {
            double total = 0.0;
            Eigen::VectorXd g(pairs);
            for (int c = 0; c < pairs; ++c) {
                g[c] = rng.gamma(1.0, 1.0);
                total += g[c];
            }
            for (int c = 0; c < pairs; ++c) {
                s.resp(i, c) = 0.5 / pairs + 0.5 * g[c] / total;
            }
        }
    }
    return s;
}

/// One full coordinate sweep in fixed order: responsibilities, response
/// sticks, covariate sticks, response atoms, covariate atoms, precisions,
/// concentrations.
inline void cavi_step(VariationalState& s, const Dataset& data,
                      const Hyperparams& hyper) {
    detail::update_responsibilities(s, data);
    detail::update_sticks(s);
    const Eigen::MatrixXd rbar = detail::cluster_resp(s);
    detail::update_atoms_theta(s, data, hyper, rbar);
    detail::update_atoms_psi(s, data, hyper);
    if (s.prec_variational) {
        detail::update_precisions(s, data, hyper, rbar);
    }
    if (s.conc_variational) {
        detail::update_concentrations(s, hyper);
    }
}

/// Evidence lower bound of the current state. Every factor contributes its
/// expected log prior minus its expected log density; the assignment factor
/// adds the expected log weights and its entropy.
inline double elbo(const VariationalState& s, const Dataset& data,
                   const Hyperparams& hyper) {
    const int n = s.n;
    const int d = s.d;
    const int n_theta = s.levels.n_theta;
    const double e_prec_th = s.e_prec_theta();
    const double e_log_prec_th = s.e_log_prec_theta();
    const double e_prec_ps = s.e_prec_psi();
    const double e_log_prec_ps = s.e_log_prec_psi();

    double bound = 0.0;

    // Stick priors minus stick factor densities.
    {
        const double e_log_a = s.e_log_alpha_theta();
        const double e_a = s.e_alpha_theta();
        for (const auto& f : s.stick_theta) {
            bound += e_log_a + (e_a - 1.0) * detail::beta_e_log1m(f) -
                     detail::beta_e_log_q(f);
        }
        for (int k = 0; k < n_theta; ++k) {
            const double e_log_ak = s.e_log_alpha_psi(k);
            const double e_ak = s.e_alpha_psi(k);
            for (const auto& f : s.stick_psi[k]) {
                bound += e_log_ak + (e_ak - 1.0) * detail::beta_e_log1m(f) -
                         detail::beta_e_log_q(f);
            }
        }
    }

    // Assignment factor: expected log weights plus entropy.
    {
        const std::vector<double> elw_theta =
            detail::expected_log_weights(s.stick_theta);
        for (int k = 0; k < n_theta; ++k) {
            const std::vector<double> elw_psi =
                detail::expected_log_weights(s.stick_psi[k]);
            for (int j = 0; j < s.levels.m_psi[k]; ++j) {
                const double mass = s.resp.col(s.column(k, j)).sum();
                bound += mass * (elw_theta[k] + elw_psi[j]);
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < s.total_pairs(); ++c) {
                const double r = s.resp(i, c);
                if (r > 0.0) {
                    bound -= r * std::log(r);
                }
            }
        }
    }

    // Likelihood terms.
    {
        const Eigen::MatrixXd rbar = detail::cluster_resp(s);
        for (int k = 0; k < n_theta; ++k) {
            const Eigen::VectorXd resid =
                data.y - data.x * s.atom_theta_mean.row(k).transpose();
            const Eigen::VectorXd xvar =
                data.x.array().square().matrix() *
                s.atom_theta_var.row(k).transpose();
            const double quad = rbar.col(k).dot(
                (resid.array().square() + xvar.array()).matrix());
            const double mass = rbar.col(k).sum();
            bound += mass * (0.5 * e_log_prec_th -
                             0.5 * std::log(2.0 * M_PI)) -
                     0.5 * e_prec_th * quad;
        }
        for (int k = 0; k < n_theta; ++k) {
            for (int j = 0; j < s.levels.m_psi[k]; ++j) {
                const auto col = s.resp.col(s.column(k, j));
                double quad = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (col[i] == 0.0) {
                        continue;
                    }
                    double ex_sq = 0.0;
                    for (int l = 0; l < d; ++l) {
                        const double rx =
                            data.x(i, l) - s.atom_psi_mean[k](j, l);
                        ex_sq += rx * rx + s.atom_psi_var[k](j, l);
                    }
                    quad += col[i] * ex_sq;
                }
                const double mass = col.sum();
                bound += mass * d *
                             (0.5 * e_log_prec_ps -
                              0.5 * std::log(2.0 * M_PI)) -
                         0.5 * e_prec_ps * quad;
            }
        }
    }

    // Atom priors minus atom factor densities.
    {
        Eigen::LLT<Eigen::MatrixXd> llt_cy(hyper.c_y);
        const double half_logdet_cy =
            Eigen::MatrixXd(llt_cy.matrixL()).diagonal().array().log().sum();
        for (int k = 0; k < n_theta; ++k) {
            const Eigen::VectorXd diff =
                s.atom_theta_mean.row(k).transpose() - hyper.mu0;
            double trace_term = 0.0;
            double entropy = 0.0;
            for (int l = 0; l < d; ++l) {
                trace_term += hyper.c_y(l, l) * s.atom_theta_var(k, l);
                entropy +=
                    0.5 * std::log(2.0 * M_PI * M_E * s.atom_theta_var(k, l));
            }
            bound += 0.5 * d * e_log_prec_th + half_logdet_cy -
                     0.5 * d * std::log(2.0 * M_PI) -
                     0.5 * e_prec_th *
                         (diff.dot(hyper.c_y * diff) + trace_term) +
                     entropy;
        }
        for (int k = 0; k < n_theta; ++k) {
            for (int j = 0; j < s.levels.m_psi[k]; ++j) {
                for (int l = 0; l < d; ++l) {
                    const double mean = s.atom_psi_mean[k](j, l);
                    const double var = s.atom_psi_var[k](j, l);
                    bound += -0.5 * std::log(2.0 * M_PI * hyper.c_x[l]) -
                             ((mean - hyper.m[l]) * (mean - hyper.m[l]) + var) /
                                 (2.0 * hyper.c_x[l]) +
                             0.5 * std::log(2.0 * M_PI * M_E * var);
                }
            }
        }
    }

    // Precision priors minus factor densities.
    if (s.prec_variational) {
        bound += hyper.prec_prior_theta.shape *
                     std::log(hyper.prec_prior_theta.rate) -
                 std::lgamma(hyper.prec_prior_theta.shape) +
                 (hyper.prec_prior_theta.shape - 1.0) * e_log_prec_th -
                 hyper.prec_prior_theta.rate * e_prec_th -
                 detail::gamma_e_log_q(s.prec_theta);
        bound += hyper.prec_prior_psi.shape *
                     std::log(hyper.prec_prior_psi.rate) -
                 std::lgamma(hyper.prec_prior_psi.shape) +
                 (hyper.prec_prior_psi.shape - 1.0) * e_log_prec_ps -
                 hyper.prec_prior_psi.rate * e_prec_ps -
                 detail::gamma_e_log_q(s.prec_psi);
    }

    // Concentration priors minus factor densities.
    if (s.conc_variational) {
        auto gamma_cross = [](const GammaPair& prior, const GammaPair& q) {
            const double e_log = digamma(q.shape) - std::log(q.rate);
            const double e_val = q.mean();
            return prior.shape * std::log(prior.rate) -
                   std::lgamma(prior.shape) + (prior.shape - 1.0) * e_log -
                   prior.rate * e_val - detail::gamma_e_log_q(q);
        };
        bound += gamma_cross(hyper.conc_prior_theta, s.conc_theta);
        for (int k = 0; k < n_theta; ++k) {
            bound += gamma_cross(hyper.conc_prior_psi, s.conc_psi[k]);
        }
    }

    if (!std::isfinite(bound)) {
        throw numerical_error("elbo: bound is not finite");
    }
    return bound;
}

/// Run coordinate ascent until the relative ELBO change drops below
/// rel_tol or max_iters sweeps have run.
inline CaviResult run_cavi(const Dataset& data, const TruncationLevels& levels,
                           const Hyperparams& hyper,
                           const CaviOptions& options) {
    CaviResult result;
    result.state = init_variational(data, levels, hyper, options);
    result.elbo_trace.reserve(options.max_iters);
    double prev = neg_inf;
    for (int it = 0; it < options.max_iters; ++it) {
        cavi_step(result.state, data, hyper);
        double bound;
        try {
            bound = elbo(result.state, data, hyper);
        } catch (const numerical_error&) {
            throw numerical_error("run_cavi: ELBO degenerate at sweep " +
                                  std::to_string(it + 1));
        }
        result.elbo_trace.push_back(bound);
        result.iterations = it + 1;
        if (it > 0 && std::abs(bound - prev) <=
                          options.rel_tol * (1.0 + std::abs(bound))) {
            result.converged = true;
            break;
        }
        prev = bound;
    }
    return result;
}

/// Concentration point estimates: means of the Gamma factors, or the fixed
/// values when concentrations are not variational.
inline AlphaEstimates estimate_alphas(const VariationalState& s) {
    AlphaEstimates out;
    out.alpha_theta = s.e_alpha_theta();
    out.alpha_psi.resize(s.levels.n_theta);
    for (int k = 0; k < s.levels.n_theta; ++k) {
        out.alpha_psi[k] = s.e_alpha_psi(k);
    }
    return out;
}

/// Collapse the variational state into a sampler state: stick and atom
/// means, precision means for the noise scales, concentration means, and
/// maximum-responsibility labels (ties take the smallest column).
inline EDPMState warm_start_gibbs(const VariationalState& s) {
    EDPMState state;
    state.alpha_theta = s.e_alpha_theta();
    state.alpha_psi.resize(s.levels.n_theta);
    for (int k = 0; k < s.levels.n_theta; ++k) {
        state.alpha_psi[k] = s.e_alpha_psi(k);
    }

    state.sticks.v_theta.resize(s.levels.n_theta);
    for (int k = 0; k + 1 < s.levels.n_theta; ++k) {
        state.sticks.v_theta[k] = s.stick_theta[k].mean();
    }
    state.sticks.v_theta[s.levels.n_theta - 1] = 1.0;
    state.sticks.v_psi.resize(s.levels.n_theta);
    for (int k = 0; k < s.levels.n_theta; ++k) {
        state.sticks.v_psi[k].resize(s.levels.m_psi[k]);
        for (int j = 0; j + 1 < s.levels.m_psi[k]; ++j) {
            state.sticks.v_psi[k][j] = s.stick_psi[k][j].mean();
        }
        state.sticks.v_psi[k][s.levels.m_psi[k] - 1] = 1.0;
    }
    state.weights = weights_from_sticks(state.sticks, s.levels);

    state.atoms.theta_star = s.atom_theta_mean;
    state.atoms.mu_psi = s.atom_psi_mean;
    state.atoms.sigma_theta = 1.0 / std::sqrt(s.e_prec_theta());
    state.atoms.sigma_psi = 1.0 / std::sqrt(s.e_prec_psi());

    state.assign.k.resize(s.n);
    state.assign.j.resize(s.n);
    for (int i = 0; i < s.n; ++i) {
        int best_c = 0;
        double best = -1.0;
        for (int c = 0; c < s.total_pairs(); ++c) {
            if (s.resp(i, c) > best) {
                best = s.resp(i, c);
                best_c = c;
            }
        }
        int k = s.levels.n_theta - 1;
        while (s.pair_offset[k] > best_c) {
            --k;
        }
        state.assign.k[i] = k;
        state.assign.j[i] = best_c - s.pair_offset[k];
    }
    return state;
}

} // namespace edpm
