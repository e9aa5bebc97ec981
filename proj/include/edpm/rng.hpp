#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "edpm/errors.hpp"
#include "edpm/math.hpp"

namespace edpm {

/// Seeded random source wrapping std::mt19937_64. All stochastic routines
/// in the library draw through this class, so a fixed seed reproduces a run
/// bit for bit. Independent streams are derived from one master seed with
/// a splitmix64 hash of (seed, stream index).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Hash a (seed, stream) pair into a stream seed.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Independent generator for the given stream index.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix(seed, stream));
    }

    /// Uniform draw on the open interval (0, 1).
    double uniform() {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        double u = dist(gen_);
        while (u <= 0.0) {
            u = dist(gen_);
        }
        return u;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (!(sd > 0.0)) {
            throw validation_error("Rng::normal: sd must be positive");
        }
        std::normal_distribution<double> dist(mean, sd);
        return dist(gen_);
    }

    /// Gamma draw in the shape-rate convention.
    double gamma(double shape, double rate) {
        if (!(shape > 0.0) || !(rate > 0.0)) {
            throw validation_error("Rng::gamma: shape and rate must be positive");
        }
        std::gamma_distribution<double> dist(shape, 1.0 / rate);
        double g = dist(gen_);
        while (!(g > 0.0)) {
            g = dist(gen_);
        }
        return g;
    }

    /// Beta draw kept inside the representable open interval (0, 1): with a
    /// small second shape the two-gamma ratio can round to exactly 1, which
    /// would blow up downstream log(1 - v) terms.
    double beta(double a, double b) {
        const double g1 = gamma(a, 1.0);
        const double g2 = gamma(b, 1.0);
        return clamp_open_unit(g1 / (g1 + g2));
    }

    /// Beta(1, b) draw by inversion; exact and cheap, used for stick priors.
    double beta_one(double b) {
        if (!(b > 0.0)) {
            throw validation_error("Rng::beta_one: parameter must be positive");
        }
        return clamp_open_unit(-std::expm1(std::log(uniform()) / b));
    }

    double student_t(double dof) {
        if (!(dof > 0.0)) {
            throw validation_error("Rng::student_t: dof must be positive");
        }
        std::student_t_distribution<double> dist(dof);
        return dist(gen_);
    }

    /// Index draw from unnormalized log weights, normalized internally with
    /// log-sum-exp. Throws numerical_error when all weights underflow.
    int categorical_from_logs(const std::vector<double>& logw) {
        if (logw.empty()) {
            throw validation_error("Rng::categorical_from_logs: empty weights");
        }
        const double lse = log_sum_exp(logw);
        if (!std::isfinite(lse)) {
            throw numerical_error(
                "Rng::categorical_from_logs: all weights underflow");
        }
        const double u = uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i < logw.size(); ++i) {
            cum += std::exp(logw[i] - lse);
            if (u <= cum) {
                return static_cast<int>(i);
            }
        }
        return static_cast<int>(logw.size()) - 1;
    }

    /// Index draw from nonnegative weights that sum to something positive.
    int categorical(const std::vector<double>& w) {
        double total = 0.0;
        for (double wi : w) {
            if (!(wi >= 0.0)) {
                throw validation_error("Rng::categorical: negative weight");
            }
            total += wi;
        }
        if (!(total > 0.0)) {
            throw numerical_error("Rng::categorical: zero total weight");
        }
        const double u = uniform() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            cum += w[i];
            if (u <= cum) {
                return static_cast<int>(i);
            }
        }
        return static_cast<int>(w.size()) - 1;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    static double clamp_open_unit(double v) {
        const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
        return std::min(std::max(v, std::numeric_limits<double>::min()), hi);
    }

    std::mt19937_64 gen_;
};

} // namespace edpm
