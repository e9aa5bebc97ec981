#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "edpm/errors.hpp"

namespace edpm {

/// Quantile with linear interpolation between order statistics: the value
/// at fractional position 1 + q (len - 1) of the sorted sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw validation_error("quantile: empty sample");
    }
    if (!(q >= 0.0) || !(q <= 1.0)) {
        throw validation_error("quantile: q must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * (static_cast<double>(values.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

/// Per-batch values of one summary statistic together with its cross-batch
/// mean and standard deviation (denominator B - 1).
struct BatchStat {
    std::vector<double> per_batch;
    double mean = 0.0;
    double sd = 0.0;
};

/// Batch-means summary of a scalar trace: the trace is cut into b
/// consecutive batches of length l, and the lower quartile, mean, and upper
/// quartile of each batch are summarized across batches.
struct BatchSummary {
    int batches = 0;
    int batch_size = 0;
    BatchStat q25;
    BatchStat mean;
    BatchStat q75;
};

namespace detail {

inline void finish_batch_stat(BatchStat& s) {
    const auto b = static_cast<double>(s.per_batch.size());
    double sum = 0.0;
    for (double v : s.per_batch) {
        sum += v;
    }
    s.mean = sum / b;
    double ss = 0.0;
    for (double v : s.per_batch) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.sd = std::sqrt(ss / (b - 1.0));
}

} // namespace detail

inline BatchSummary batch_summaries(const std::vector<double>& trace, int b,
                                    int l) {
    if (b < 2 || l < 1) {
        throw validation_error("batch_summaries: need b >= 2 and l >= 1");
    }
    if (static_cast<int>(trace.size()) < b * l) {
        throw validation_error("batch_summaries: trace shorter than b * l");
    }
    BatchSummary out;
    out.batches = b;
    out.batch_size = l;
    out.q25.per_batch.reserve(b);
    out.mean.per_batch.reserve(b);
    out.q75.per_batch.reserve(b);
    for (int i = 0; i < b; ++i) {
        std::vector<double> batch(trace.begin() + static_cast<long>(i) * l,
                                  trace.begin() + static_cast<long>(i + 1) * l);
        double sum = 0.0;
        for (double v : batch) {
            sum += v;
        }
        out.q25.per_batch.push_back(quantile(batch, 0.25));
        out.mean.per_batch.push_back(sum / l);
        out.q75.per_batch.push_back(quantile(batch, 0.75));
    }
    detail::finish_batch_stat(out.q25);
    detail::finish_batch_stat(out.mean);
    detail::finish_batch_stat(out.q75);
    return out;
}

} // namespace edpm
