#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "edpm/errors.hpp"

namespace edpm {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Digamma function for x > 0. Shifts the argument above 10 with the
/// recurrence psi(x) = psi(x+1) - 1/x, then applies the asymptotic series;
/// absolute error is below 1e-13 over the positive axis.
inline double digamma(double x) {
    if (!(x > 0.0)) {
        throw validation_error("digamma: argument must be positive");
    }
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        1.0 / 12.0 -
        inv2 * (1.0 / 120.0 -
                inv2 * (1.0 / 252.0 -
                        inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0))));
    return acc + std::log(x) - 0.5 * inv - inv2 * series;
}

/// log Beta(a, b) via lgamma.
inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Numerically stable log(sum_i exp(v_i)). Returns -inf for an empty range
/// or when every entry is -inf.
inline double log_sum_exp(const double* v, std::size_t n) {
    double m = neg_inf;
    for (std::size_t i = 0; i < n; ++i) {
        m = std::max(m, v[i]);
    }
    if (m == neg_inf) {
        return neg_inf;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += std::exp(v[i] - m);
    }
    return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& v) {
    return log_sum_exp(v.data(), v.size());
}

/// log of the normal density with standard deviation sd > 0.
inline double log_normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

/// log of the Beta(a, b) density at v in (0, 1).
inline double log_beta_pdf(double v, double a, double b) {
    return (a - 1.0) * std::log(v) + (b - 1.0) * std::log1p(-v) - log_beta(a, b);
}

/// log of the Gamma(shape, rate) density at t > 0.
inline double log_gamma_pdf(double t, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) +
           (shape - 1.0) * std::log(t) - rate * t;
}

} // namespace edpm
