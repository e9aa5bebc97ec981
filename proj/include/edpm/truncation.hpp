#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/rng.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Total-variation error budget for the truncation planner, split between
/// the response-side tail (eps_theta) and the overall target (eps).
struct ErrorBudget {
    double eps = 0.01;
    double eps_theta = 0.001;

    void validate() const {
        if (!(eps_theta > 0.0) || !(eps_theta < eps)) {
            throw validation_error("ErrorBudget: need 0 < eps_theta < eps");
        }
    }
};

/// Truncation error bound in total variation and L1.
struct ErrorBound {
    double bound_tv = 0.0;
    double bound_l1 = 0.0;
};

/// Monte Carlo estimate of the truncation mass with its standard error.
struct McMass {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Planner output: chosen levels, the pivot row index used to balance the
/// covariate-side levels, the error bound at those levels, and the size of
/// the flat-level alternative that covers the same budget.
struct PlanReport {
    TruncationLevels levels;
    int k_star = 0;
    double bound_tv = 0.0;
    double bound_l1 = 0.0;
    int sum_m = 0;     // total covariate-side levels
    int fixed_m = 0;   // single level that a flat plan would need per row
};

namespace detail {

/// Ceiling with a small relative nudge so values a float-rounding hair
/// below an integer do not get pushed to the next one.
inline long long nudged_ceil(double x) {
    return static_cast<long long>(
        std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
}

/// Shared log factor of the covariate-side level formulas.
inline double psi_log_factor(int n, const ErrorBudget& budget) {
    budget.validate();
    if (n < 1) {
        throw validation_error("truncation planner: need n >= 1");
    }
    const double num = static_cast<double>(n) - budget.eps_theta;
    const double den = budget.eps - budget.eps_theta;
    if (!(num > 0.0)) {
        throw validation_error("truncation planner: eps_theta must be below n");
    }
    return std::log(num / den);
}

} // namespace detail

/// Response-side truncation level N = 1 + ceil(alpha * ln(n / eps_theta)),
/// floored at 2 so at least one stick is free.
inline int theta_level(int n, double alpha_theta, const ErrorBudget& budget) {
    budget.validate();
    if (n < 1) {
        throw validation_error("theta_level: need n >= 1");
    }
    if (!(alpha_theta > 0.0)) {
        throw validation_error("theta_level: alpha_theta must be positive");
    }
    const double raw =
        alpha_theta * std::log(static_cast<double>(n) / budget.eps_theta);
    const long long level = 1 + detail::nudged_ceil(raw);
    return static_cast<int>(std::max<long long>(2, level));
}

namespace detail {

struct PsiPlan {
    std::vector<int> m;
    int k_star = 0;
};

inline PsiPlan plan_psi(int n, const Eigen::VectorXd& alpha_psi,
                        const ErrorBudget& budget) {
    const int rows = static_cast<int>(alpha_psi.size());
    if (rows < 1) {
        throw validation_error("psi_levels: need at least one row");
    }
    if ((alpha_psi.array() <= 0.0).any()) {
        throw validation_error("psi_levels: concentrations must be positive");
    }
    const double c = psi_log_factor(n, budget);

    // Per-row candidate levels, then the row whose candidate is relatively
    // cheapest (smallest (M-1)/alpha) anchors the rest. Ties take the
    // smallest index.
    std::vector<long long> candidate(rows);
    int k_star = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < rows; ++k) {
        candidate[k] = std::max<long long>(2, nudged_ceil(1.0 + alpha_psi[k] * c));
        const double ratio =
            static_cast<double>(candidate[k] - 1) / alpha_psi[k];
        if (ratio < best_ratio) {
            best_ratio = ratio;
            k_star = k;
        }
    }

    PsiPlan plan;
    plan.k_star = k_star;
    plan.m.resize(rows);
    const double anchor =
        static_cast<double>(candidate[k_star] - 1) / alpha_psi[k_star];
    for (int k = 0; k < rows; ++k) {
        long long level = (k == k_star)
                              ? candidate[k]
                              : nudged_ceil(1.0 + alpha_psi[k] * anchor);
        plan.m[k] = static_cast<int>(std::max<long long>(2, level));
    }
    return plan;
}

} // namespace detail

/// Covariate-side truncation levels, one per response cluster. The levels
/// are balanced so each row carries roughly the same share of the tail
/// budget; every row is floored at 2.
inline std::vector<int> psi_levels(int n, const Eigen::VectorXd& alpha_psi,
                                   const ErrorBudget& budget) {
    return detail::plan_psi(n, alpha_psi, budget).m;
}

/// Truncation error bound at the given levels:
///   bound_tv = 2n [ e_theta + e_psi (1 - e_theta) ]
/// with e_theta = exp(-(N-1)/alpha_theta) and
/// e_psi = exp(-min_k (M_k - 1)/alpha_psi_k); bound_l1 doubles it.
/// The exponential factors approximate the Beta stick moments and
/// understate them for small concentrations; see error_bound_exact_moments
/// for the version built from the exact moments.
inline ErrorBound error_bound(int n, double alpha_theta,
                              const Eigen::VectorXd& alpha_psi,
                              const TruncationLevels& levels) {
    levels.validate();
    if (n < 0) {
        throw validation_error("error_bound: need n >= 0");
    }
    if (!(alpha_theta > 0.0) || (alpha_psi.array() <= 0.0).any()) {
        throw validation_error("error_bound: concentrations must be positive");
    }
    if (alpha_psi.size() != levels.n_theta) {
        throw validation_error("error_bound: one concentration per row required");
    }
    const double e_theta =
        std::exp(-(levels.n_theta - 1) / alpha_theta);
    double min_ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < levels.n_theta; ++k) {
        min_ratio =
            std::min(min_ratio, (levels.m_psi[k] - 1) / alpha_psi[k]);
    }
    const double e_psi = std::exp(-min_ratio);
    ErrorBound out;
    out.bound_tv = 2.0 * n * (e_theta + e_psi * (1.0 - e_theta));
    out.bound_l1 = 2.0 * out.bound_tv;
    return out;
}

/// Same bound shape built from the exact Beta(1, alpha) stick moments:
/// E prod(1 - V) = (alpha/(1+alpha))^count. Unlike error_bound, this
/// version provably dominates the Monte Carlo truncation mass.
inline ErrorBound error_bound_exact_moments(int n, double alpha_theta,
                                            const Eigen::VectorXd& alpha_psi,
                                            const TruncationLevels& levels) {
    levels.validate();
    if (n < 0) {
        throw validation_error("error_bound_exact_moments: need n >= 0");
    }
    if (!(alpha_theta > 0.0) || (alpha_psi.array() <= 0.0).any()) {
        throw validation_error(
            "error_bound_exact_moments: concentrations must be positive");
    }
    if (alpha_psi.size() != levels.n_theta) {
        throw validation_error(
            "error_bound_exact_moments: one concentration per row required");
    }
    const double q_theta = std::pow(alpha_theta / (1.0 + alpha_theta),
                                    levels.n_theta - 1);
    double q_psi_max = 0.0;
    for (int k = 0; k < levels.n_theta; ++k) {
        const double a = alpha_psi[k];
        q_psi_max = std::max(
            q_psi_max, std::pow(a / (1.0 + a), levels.m_psi[k] - 1));
    }
    ErrorBound out;
    out.bound_tv = 2.0 * n * (q_theta + q_psi_max * (1.0 - q_theta));
    out.bound_l1 = 2.0 * out.bound_tv;
    return out;
}

/// Monte Carlo estimate of the truncation mass 2[1 - E(S^n)], where S is
/// the prior probability that one observation lands in the free region
/// (cluster below N, subcluster below M_k). S needs only the free sticks:
/// S = sum_{k<N} p_k (1 - prod_{j<M_k} (1 - V_jk)).
inline McMass mc_truncation_mass(const TruncationLevels& levels,
                                 double alpha_theta,
                                 const Eigen::VectorXd& alpha_psi, int n,
                                 int draws, Rng& rng) {
    levels.validate();
    if (draws < 1000) {
        throw validation_error("mc_truncation_mass: need draws >= 1000");
    }
    if (n < 0) {
        throw validation_error("mc_truncation_mass: need n >= 0");
    }
    if (!(alpha_theta > 0.0) || (alpha_psi.array() <= 0.0).any()) {
        throw validation_error(
            "mc_truncation_mass: concentrations must be positive");
    }
    if (alpha_psi.size() != levels.n_theta) {
        throw validation_error(
            "mc_truncation_mass: one concentration per row required");
    }
    if (n == 0) {
        return {0.0, 0.0};
    }

    double mean = 0.0;
    double m2 = 0.0;
    for (int t = 0; t < draws; ++t) {
        double remaining = 1.0;
        double s = 0.0;
        for (int k = 0; k + 1 < levels.n_theta; ++k) {
            const double v = rng.beta_one(alpha_theta);
            const double p_k = v * remaining;
            remaining *= 1.0 - v;
            double row_tail = 1.0;
            for (int j = 0; j + 1 < levels.m_psi[k]; ++j) {
                row_tail *= 1.0 - rng.beta_one(alpha_psi[k]);
            }
            s += p_k * (1.0 - row_tail);
        }
        const double sn = std::pow(s, n);
        const double delta = sn - mean;
        mean += delta / (t + 1);
        m2 += delta * (sn - mean);
    }
    const double var = m2 / (draws - 1);
    McMass out;
    out.estimate = 2.0 * (1.0 - mean);
    out.std_error = 2.0 * std::sqrt(var / draws);
    return out;
}

/// Cycle a covariate-side concentration pattern to one value per row.
inline Eigen::VectorXd cycle_alpha_pattern(const Eigen::VectorXd& pattern,
                                           int rows) {
    if (pattern.size() < 1) {
        throw validation_error("cycle_alpha_pattern: empty pattern");
    }
    if (rows < 1) {
        throw validation_error("cycle_alpha_pattern: need rows >= 1");
    }
    Eigen::VectorXd out(rows);
    for (int k = 0; k < rows; ++k) {
        out[k] = pattern[k % pattern.size()];
    }
    return out;
}

/// Full planner: response level, balanced covariate levels, the error
/// bound at the result, and the flat-level alternative a single shared M
/// would need (driven by the largest row concentration). The concentration
/// pattern is cycled to cover all planned rows, so callers may pass either
/// a short repeating pattern or one value per row.
inline PlanReport compare_fixed(int n, double alpha_theta,
                                const Eigen::VectorXd& alpha_psi_pattern,
                                const ErrorBudget& budget) {
    const int n_theta = theta_level(n, alpha_theta, budget);
    const Eigen::VectorXd alpha_psi =
        cycle_alpha_pattern(alpha_psi_pattern, n_theta);
    const auto psi = detail::plan_psi(n, alpha_psi, budget);

    PlanReport report;
    report.levels.n_theta = n_theta;
    report.levels.m_psi = psi.m;
    report.k_star = psi.k_star;
    const ErrorBound bound =
        error_bound(n, alpha_theta, alpha_psi, report.levels);
    report.bound_tv = bound.bound_tv;
    report.bound_l1 = bound.bound_l1;
    report.sum_m = report.levels.total_pairs();
    const double c = detail::psi_log_factor(n, budget);
    const double alpha_max = alpha_psi.maxCoeff();
    report.fixed_m = static_cast<int>(
        std::max<long long>(2, detail::nudged_ceil(1.0 + alpha_max * c)));
    return report;
}

} // namespace edpm
