#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Turn one row of stick proportions into mixture weights:
/// p_1 = v_1, p_k = v_k * prod_{h<k} (1 - v_h). Requires the last stick to
/// equal 1, which makes the weights sum to 1 up to rounding.
inline Eigen::VectorXd stick_row_to_weights(const Eigen::VectorXd& v) {
    const int len = static_cast<int>(v.size());
    if (len < 1) {
        throw validation_error("stick_row_to_weights: empty stick row");
    }
    for (int i = 0; i < len; ++i) {
        if (!(v[i] >= 0.0) || !(v[i] <= 1.0)) {
            throw validation_error("stick_row_to_weights: sticks must lie in [0, 1]");
        }
    }
    if (v[len - 1] != 1.0) {
        throw validation_error("stick_row_to_weights: last stick must equal 1");
    }
    Eigen::VectorXd p(len);
    double remaining = 1.0;
    for (int i = 0; i < len; ++i) {
        p[i] = v[i] * remaining;
        remaining *= 1.0 - v[i];
    }
    return p;
}

/// Invert stick_row_to_weights: v_k = p_k / (1 - sum_{h<k} p_h), with the
/// last stick set to exactly 1. Throws when a prefix of the weights already
/// exhausts the total mass, leaving a zero denominator.
inline Eigen::VectorXd weights_to_stick_row(const Eigen::VectorXd& p,
                                            double tol = 1e-12) {
    const int len = static_cast<int>(p.size());
    if (len < 1) {
        throw validation_error("weights_to_stick_row: empty weight row");
    }
    double sum = 0.0;
    for (int i = 0; i < len; ++i) {
        if (!(p[i] >= 0.0)) {
            throw validation_error("weights_to_stick_row: weights must be nonnegative");
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > tol) {
        throw validation_error("weights_to_stick_row: weights must sum to 1");
    }
    Eigen::VectorXd v(len);
    double remaining = 1.0;
    for (int i = 0; i + 1 < len; ++i) {
        if (!(remaining > 0.0)) {
            throw validation_error(
                "weights_to_stick_row: degenerate weights exhaust mass early");
        }
        v[i] = std::min(1.0, p[i] / remaining);
        remaining -= p[i];
    }
    v[len - 1] = 1.0;
    return v;
}

/// Convert a full stick state (response row plus one covariate row per
/// cluster) into the corresponding weights.
inline WeightState weights_from_sticks(const StickState& sticks,
                                       const TruncationLevels& levels) {
    sticks.validate(levels);
    WeightState w;
    w.p_theta = stick_row_to_weights(sticks.v_theta);
    w.p_psi.reserve(sticks.v_psi.size());
    for (const auto& row : sticks.v_psi) {
        w.p_psi.push_back(stick_row_to_weights(row));
    }
    return w;
}

/// Convert weights back into sticks, row by row.
inline StickState sticks_from_weights(const WeightState& weights,
                                      const TruncationLevels& levels) {
    weights.validate(levels);
    StickState s;
    s.v_theta = weights_to_stick_row(weights.p_theta);
    s.v_psi.reserve(weights.p_psi.size());
    for (const auto& row : weights.p_psi) {
        s.v_psi.push_back(weights_to_stick_row(row));
    }
    return s;
}

} // namespace edpm
