#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "edpm/diagnostics.hpp"
#include "edpm/errors.hpp"
#include "edpm/rng.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("quantile interpolates between order statistics") {
    const std::vector<double> odd{1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(edpm::quantile(odd, 0.5) == 3.0);
    CHECK(edpm::quantile(odd, 0.25) == 2.0);

    const std::vector<double> even{1.0, 2.0, 3.0, 4.0};
    CHECK_THAT(edpm::quantile(even, 0.25), WithinAbs(1.75, 1e-15));
    CHECK_THAT(edpm::quantile(even, 0.5), WithinAbs(2.5, 1e-15));

    const std::vector<double> pair{10.0, 20.0};
    CHECK_THAT(edpm::quantile(pair, 0.3), WithinAbs(13.0, 1e-12));
}

TEST_CASE("quantile endpoints and singletons") {
    const std::vector<double> vals{4.0, -2.0, 9.0, 0.5};
    CHECK(edpm::quantile(vals, 0.0) == -2.0);
    CHECK(edpm::quantile(vals, 1.0) == 9.0);
    CHECK(edpm::quantile({7.25}, 0.4) == 7.25);
}

TEST_CASE("quantile rejects bad input") {
    CHECK_THROWS_AS(edpm::quantile({}, 0.5), edpm::validation_error);
    CHECK_THROWS_AS(edpm::quantile({1.0, 2.0}, -0.1), edpm::validation_error);
    CHECK_THROWS_AS(edpm::quantile({1.0, 2.0}, 1.1), edpm::validation_error);
    CHECK_THROWS_AS(edpm::quantile({1.0}, std::nan("")),
                    edpm::validation_error);
}

TEST_CASE("batch summaries on a constant trace have zero spread") {
    const std::vector<double> trace(40, 2.5);
    const auto s = edpm::batch_summaries(trace, 4, 10);
    CHECK(s.batches == 4);
    CHECK(s.batch_size == 10);
    for (const auto* stat : {&s.q25, &s.mean, &s.q75}) {
        REQUIRE(stat->per_batch.size() == 4);
        for (double v : stat->per_batch) {
            CHECK(v == 2.5);
        }
        CHECK(stat->mean == 2.5);
        CHECK(stat->sd == 0.0);
    }
}

TEST_CASE("batch summaries on a hand-built two-batch trace") {
    // Batches (1,2,3,4) and (5,6,7,8): per-batch q25 are 1.75 and 5.75,
    // means 2.5 and 6.5, q75 are 3.25 and 7.25.  Each cross-batch sd is
    // |a - b| / sqrt(2) = 4 / sqrt(2) = 2 sqrt(2).
    const std::vector<double> trace{1, 2, 3, 4, 5, 6, 7, 8};
    const auto s = edpm::batch_summaries(trace, 2, 4);

    CHECK_THAT(s.q25.per_batch[0], WithinAbs(1.75, 1e-15));
    CHECK_THAT(s.q25.per_batch[1], WithinAbs(5.75, 1e-15));
    CHECK_THAT(s.q25.mean, WithinAbs(3.75, 1e-15));
    CHECK_THAT(s.q25.sd, WithinAbs(2.8284271247461903, 1e-14));

    CHECK_THAT(s.mean.per_batch[0], WithinAbs(2.5, 1e-15));
    CHECK_THAT(s.mean.per_batch[1], WithinAbs(6.5, 1e-15));
    CHECK_THAT(s.mean.mean, WithinAbs(4.5, 1e-15));
    CHECK_THAT(s.mean.sd, WithinAbs(2.8284271247461903, 1e-14));

    CHECK_THAT(s.q75.per_batch[0], WithinAbs(3.25, 1e-15));
    CHECK_THAT(s.q75.per_batch[1], WithinAbs(7.25, 1e-15));
    CHECK_THAT(s.q75.mean, WithinAbs(5.25, 1e-15));
    CHECK_THAT(s.q75.sd, WithinAbs(2.8284271247461903, 1e-14));
}

TEST_CASE("mean of batch means equals the grand mean of the used prefix") {
    edpm::Rng rng(421);
    std::vector<double> trace;
    trace.reserve(130);
    for (int i = 0; i < 130; ++i) {
        trace.push_back(rng.normal(1.0, 3.0));
    }
    const int b = 5;
    const int l = 24;
    const auto s = edpm::batch_summaries(trace, b, l);

    double grand = 0.0;
    for (int i = 0; i < b * l; ++i) {
        grand += trace[i];
    }
    grand /= b * l;
    CHECK_THAT(s.mean.mean, WithinRel(grand, 1e-13));
}

TEST_CASE("batch summaries ignore trace values past b * l") {
    edpm::Rng rng(77);
    std::vector<double> trace;
    for (int i = 0; i < 60; ++i) {
        trace.push_back(rng.normal(0.0, 1.0));
    }
    const auto base = edpm::batch_summaries(trace, 6, 10);

    auto longer = trace;
    longer.push_back(1e9);
    longer.push_back(-1e9);
    const auto padded = edpm::batch_summaries(longer, 6, 10);

    CHECK(padded.q25.per_batch == base.q25.per_batch);
    CHECK(padded.mean.per_batch == base.mean.per_batch);
    CHECK(padded.q75.per_batch == base.q75.per_batch);
    CHECK(padded.mean.sd == base.mean.sd);
}

TEST_CASE("batch summaries reject short traces and bad shapes") {
    const std::vector<double> trace(19, 0.0);
    CHECK_THROWS_AS(edpm::batch_summaries(trace, 4, 5), edpm::validation_error);
    CHECK_THROWS_AS(edpm::batch_summaries(trace, 1, 5), edpm::validation_error);
    CHECK_THROWS_AS(edpm::batch_summaries(trace, 2, 0), edpm::validation_error);
}

TEST_CASE("batch-means sd matches the independence scaling on iid noise") {
    // For iid N(0, 1) samples cut into batches of length 100, each batch
    // mean has standard deviation 0.1.  With 400 batches the sample sd
    // estimates this within a few percent.
    edpm::Rng rng(20260814);
    const int b = 400;
    const int l = 100;
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(b) * l);
    for (int i = 0; i < b * l; ++i) {
        trace.push_back(rng.normal(0.0, 1.0));
    }
    const auto s = edpm::batch_summaries(trace, b, l);
    CHECK_THAT(s.mean.sd, WithinAbs(0.1, 0.01));
}
