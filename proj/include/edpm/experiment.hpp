#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "edpm/diagnostics.hpp"
#include "edpm/errors.hpp"
#include "edpm/gibbs.hpp"
#include "edpm/io.hpp"
#include "edpm/rng.hpp"
#include "edpm/simulate.hpp"
#include "edpm/truncation.hpp"
#include "edpm/types.hpp"
#include "edpm/vb.hpp"

namespace edpm {

/// Truncation policies compared by the harness: levels from the planner at
/// estimated concentrations, the same levels scaled up, and a flat plan
/// with one shared covariate-side level.
enum class Policy { planner, large, fixed_m };

inline std::string policy_to_string(Policy p) {
    switch (p) {
        case Policy::planner: return "planner";
        case Policy::large: return "large";
        case Policy::fixed_m: return "fixed_m";
    }
    throw validation_error("policy_to_string: bad enum value");
}

inline Policy policy_from_string(const std::string& s) {
    if (s == "planner") {
        return Policy::planner;
    }
    if (s == "large") {
        return Policy::large;
    }
    if (s == "fixed_m") {
        return Policy::fixed_m;
    }
    throw validation_error(
        "policy: expected 'planner', 'large', or 'fixed_m', got '" + s + "'");
}

/// Replication-harness controls. The chain runs at least
/// burn_in + batches * batch_size * thin sweeps so the kept trace covers
/// every batch.
struct ExperimentConfig {
    SimConfig sim;
    ErrorBudget budget;
    std::vector<Policy> policies = {Policy::planner, Policy::large,
                                    Policy::fixed_m};
    ChainConfig chain;
    CaviOptions vb;
    int batches = 50;
    int batch_size = 50;
    int replications = 10;
    int probe_count = 3;
    double large_multiplier = 2.0;
    std::uint64_t seed = 0;
    std::string out_dir;

    void validate() const {
        sim.validate();
        budget.validate();
        vb.validate();
        if (policies.empty()) {
            throw validation_error("ExperimentConfig: no policies selected");
        }
        if (batches < 2 || batch_size < 1) {
            throw validation_error(
                "ExperimentConfig: need batches >= 2 and batch_size >= 1");
        }
        if (replications < 1) {
            throw validation_error("ExperimentConfig: replications must be >= 1");
        }
        if (probe_count < 1 || probe_count > sim.n) {
            throw validation_error(
                "ExperimentConfig: probe_count must be in [1, sim n]");
        }
        if (!(large_multiplier >= 1.0)) {
            throw validation_error(
                "ExperimentConfig: large_multiplier must be >= 1");
        }
        if (chain.burn_in < 0 || chain.thin < 1) {
            throw validation_error(
                "ExperimentConfig: chain burn_in/thin out of range");
        }
    }
};

/// Per-policy outcome within one replication.
struct PolicyOutcome {
    Policy policy = Policy::planner;
    TruncationLevels levels;
    double ops_per_sweep = 0.0;
    double predicted_ops = 0.0;           // n * total covariate levels
    std::vector<BatchSummary> probe_summaries;
    double batch_mean = 0.0;              // mean-of-batch-means over probes
    double batch_sd = 0.0;                // cross-batch SD over probes
};

struct ReplicationResult {
    int rep = 0;
    bool success = false;
    std::string message;
    double alpha_theta_hat = 0.0;
    Eigen::VectorXd alpha_psi_hat;
    std::vector<PolicyOutcome> outcomes;
};

/// Cross-replication aggregate for one policy.
struct PolicyAggregate {
    Policy policy = Policy::planner;
    double mean_batch_mean = 0.0;
    double se_batch_mean = 0.0;    // standard error across replications
    double mean_batch_sd = 0.0;
    double mean_ops_per_sweep = 0.0;
    double mean_predicted_ops = 0.0;
    double mean_total_levels = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ReplicationResult> replications;
    int completed = 0;
    std::vector<PolicyAggregate> aggregates;
    std::string table;
};

namespace detail {

/// Seed scheme: every random stage draws from a stream derived from the
/// master seed by (replication, slot). Slots: 0 data, 1 concentration fit,
/// 10+p warm-start fit for policy p, 20+p chain for policy p.
inline std::uint64_t stage_seed(std::uint64_t master, int rep, int slot) {
    return Rng::mix(Rng::mix(master, static_cast<std::uint64_t>(rep) + 1),
                    static_cast<std::uint64_t>(slot));
}

inline TruncationLevels scale_levels(const TruncationLevels& base,
                                     double multiplier) {
    TruncationLevels out;
    out.n_theta = std::max(
        2, static_cast<int>(std::ceil(base.n_theta * multiplier)));
    out.m_psi.resize(out.n_theta);
    for (int k = 0; k < out.n_theta; ++k) {
        const int src = base.m_psi[k % base.m_psi.size()];
        out.m_psi[k] =
            std::max(2, static_cast<int>(std::ceil(src * multiplier)));
    }
    return out;
}

inline Hyperparams experiment_hyper(const SimConfig& sim, int n_theta,
                                    double alpha_theta,
                                    const Eigen::VectorXd& alpha_psi) {
    Hyperparams hyper = Hyperparams::defaults(sim.d, n_theta);
    hyper.alpha_theta = alpha_theta;
    hyper.alpha_psi = cycle_alpha_pattern(alpha_psi, n_theta);
    hyper.mu0 = Eigen::VectorXd::Constant(sim.d, sim.mu_theta_prior);
    hyper.m = Eigen::VectorXd::Constant(sim.d, sim.mu_psi_prior);
    hyper.c_x = Eigen::VectorXd::Constant(
        sim.d, sim.sigma_psi_prior * sim.sigma_psi_prior);
    return hyper;
}

inline std::vector<Eigen::VectorXd> pick_probes(const Dataset& data,
                                                int probe_count) {
    std::vector<Eigen::VectorXd> probes(probe_count);
    for (int p = 0; p < probe_count; ++p) {
        const int idx = static_cast<int>(
            (static_cast<long long>(p) * data.n()) / probe_count);
        probes[p] = data.x.row(idx);
    }
    return probes;
}

inline PolicyOutcome run_policy(const ExperimentConfig& cfg, Policy policy,
                                const Dataset& data,
                                const std::vector<Eigen::VectorXd>& probes,
                                const AlphaEstimates& est,
                                const PlanReport& plan, int rep,
                                int policy_index) {
    PolicyOutcome out;
    out.policy = policy;
    switch (policy) {
        case Policy::planner:
            out.levels = plan.levels;
            break;
        case Policy::large:
            out.levels = scale_levels(plan.levels, cfg.large_multiplier);
            break;
        case Policy::fixed_m:
            out.levels.n_theta = plan.levels.n_theta;
            out.levels.m_psi.assign(plan.levels.n_theta, plan.fixed_m);
            break;
    }
    const Hyperparams hyper = experiment_hyper(
        cfg.sim, out.levels.n_theta, est.alpha_theta, est.alpha_psi);

    CaviOptions warm_options = cfg.vb;
    warm_options.seed = stage_seed(cfg.seed, rep, 10 + policy_index);
    const CaviResult warm =
        run_cavi(data, out.levels, hyper, warm_options);
    EDPMState init = warm_start_gibbs(warm.state);

    ChainConfig chain = cfg.chain;
    chain.probes = probes;
    chain.seed = stage_seed(cfg.seed, rep, 20 + policy_index);
    // Kept records are iterations / thin; make sure they cover the batches.
    const long long need =
        static_cast<long long>(cfg.batches) * cfg.batch_size * chain.thin;
    if (chain.iterations < need) {
        chain.iterations = static_cast<int>(need);
    }

    ChainTrace trace;
    run_chain(data, out.levels, hyper, init, chain, trace);

    out.ops_per_sweep =
        static_cast<double>(trace.assignment_ops) / trace.sweeps;
    out.predicted_ops =
        static_cast<double>(data.n()) * out.levels.total_pairs();

    const int n_probe = static_cast<int>(probes.size());
    out.probe_summaries.reserve(n_probe);
    for (int p = 0; p < n_probe; ++p) {
        std::vector<double> series;
        series.reserve(trace.records.size());
        for (const ChainRecord& rec : trace.records) {
            series.push_back(rec.ey_probe[p]);
        }
        out.probe_summaries.push_back(
            batch_summaries(series, cfg.batches, cfg.batch_size));
        out.batch_mean += out.probe_summaries.back().mean.mean;
        out.batch_sd += out.probe_summaries.back().mean.sd;
    }
    out.batch_mean /= n_probe;
    out.batch_sd /= n_probe;

    if (!cfg.out_dir.empty()) {
        const std::string path = cfg.out_dir + "/rep" + std::to_string(rep) +
                                 "_" + policy_to_string(policy) +
                                 "_trace.csv";
        store_trace(trace, path);
    }
    return out;
}

} // namespace detail

/// Mean of v and the standard error of that mean (denominator n-1).
inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
    if (v.empty()) {
        throw validation_error("mean_and_se: empty input");
    }
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= v.size();
    if (v.size() == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / (v.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

/// Paired cross-replication difference of mean batch means between two
/// policies: returns (mean difference, standard error of the difference).
inline std::pair<double, double> paired_batch_mean_diff(
    const ExperimentResult& result, Policy a, Policy b) {
    std::vector<double> diffs;
    for (const ReplicationResult& rep : result.replications) {
        if (!rep.success) {
            continue;
        }
        double va = 0.0;
        double vb = 0.0;
        for (const PolicyOutcome& out : rep.outcomes) {
            if (out.policy == a) {
                va = out.batch_mean;
            }
            if (out.policy == b) {
                vb = out.batch_mean;
            }
        }
        diffs.push_back(va - vb);
    }
    return mean_and_se(diffs);
}

/// Number of successful replications where policy a's cross-batch SD is at
/// most policy b's.
inline int count_sd_wins(const ExperimentResult& result, Policy a, Policy b) {
    int wins = 0;
    for (const ReplicationResult& rep : result.replications) {
        if (!rep.success) {
            continue;
        }
        double sa = 0.0;
        double sb = 0.0;
        for (const PolicyOutcome& out : rep.outcomes) {
            if (out.policy == a) {
                sa = out.batch_sd;
            }
            if (out.policy == b) {
                sb = out.batch_sd;
            }
        }
        if (sa <= sb) {
            ++wins;
        }
    }
    return wins;
}

/// Replication harness. Each replication simulates a dataset, fits the
/// variational optimizer to estimate concentrations, plans levels per
/// policy, warm-starts and runs a chain per policy, and batch-summarizes
/// the conditional-mean trace at shared probe points. Failed replications
/// are recorded and skipped; fewer than 80% successes aborts the run.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
    }

    ExperimentResult result;
    result.config = config;
    result.replications.reserve(config.replications);

    for (int rep = 0; rep < config.replications; ++rep) {
        ReplicationResult rr;
        rr.rep = rep;
        try {
            SimConfig sim = config.sim;
            sim.seed = detail::stage_seed(config.seed, rep, 0);
            auto [data, truth] = generate_dataset(sim);
            if (!config.out_dir.empty()) {
                store_dataset(data, config.out_dir + "/rep" +
                                        std::to_string(rep) + "_data.csv");
            }
            const std::vector<Eigen::VectorXd> probes =
                detail::pick_probes(data, config.probe_count);

            // Concentration estimates: fit at levels planned from the
            // hyperprior means, then read off the factor means.
            const Eigen::VectorXd unit_pattern = Eigen::VectorXd::Ones(1);
            const PlanReport prior_plan =
                compare_fixed(sim.n, 1.0, unit_pattern, config.budget);
            const Hyperparams hyper0 = detail::experiment_hyper(
                sim, prior_plan.levels.n_theta, 1.0, unit_pattern);
            CaviOptions fit_options = config.vb;
            fit_options.seed = detail::stage_seed(config.seed, rep, 1);
            const CaviResult fit =
                run_cavi(data, prior_plan.levels, hyper0, fit_options);
            const AlphaEstimates est = estimate_alphas(fit.state);
            rr.alpha_theta_hat = est.alpha_theta;
            rr.alpha_psi_hat = est.alpha_psi;

            const PlanReport plan = compare_fixed(
                sim.n, est.alpha_theta, est.alpha_psi, config.budget);

            for (std::size_t p = 0; p < config.policies.size(); ++p) {
                rr.outcomes.push_back(detail::run_policy(
                    config, config.policies[p], data, probes, est, plan,
                    rep, static_cast<int>(p)));
            }
            rr.success = true;
        } catch (const error& e) {
            rr.success = false;
            rr.message = e.what();
        }
        if (rr.success) {
            ++result.completed;
        }
        result.replications.push_back(std::move(rr));
    }

    if (result.completed * 5 < config.replications * 4) {
        throw numerical_error(
            "run_experiment: only " + std::to_string(result.completed) +
            " of " + std::to_string(config.replications) +
            " replications succeeded (need 80%)");
    }

    // Aggregates and the summary table.
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"policy", "levels", "total_levels", "ops_per_sweep",
                    "batch_mean", "se", "batch_sd"});
    for (Policy policy : config.policies) {
        PolicyAggregate agg;
        agg.policy = policy;
        std::vector<double> means;
        std::vector<double> sds;
        std::vector<double> ops;
        std::vector<double> predicted;
        std::vector<double> totals;
        std::string levels_text;
        for (const ReplicationResult& rr : result.replications) {
            if (!rr.success) {
                continue;
            }
            for (const PolicyOutcome& out : rr.outcomes) {
                if (out.policy != policy) {
                    continue;
                }
                means.push_back(out.batch_mean);
                sds.push_back(out.batch_sd);
                ops.push_back(out.ops_per_sweep);
                predicted.push_back(out.predicted_ops);
                totals.push_back(
                    static_cast<double>(out.levels.total_pairs()));
                if (levels_text.empty()) {
                    levels_text =
                        "N=" + std::to_string(out.levels.n_theta);
                }
            }
        }
        const auto [mean_mean, se_mean] = mean_and_se(means);
        agg.mean_batch_mean = mean_mean;
        agg.se_batch_mean = se_mean;
        agg.mean_batch_sd = mean_and_se(sds).first;
        agg.mean_ops_per_sweep = mean_and_se(ops).first;
        agg.mean_predicted_ops = mean_and_se(predicted).first;
        agg.mean_total_levels = mean_and_se(totals).first;
        result.aggregates.push_back(agg);

        char buf[64];
        auto fmt = [&buf](double v) {
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            return std::string(buf);
        };
        rows.push_back({policy_to_string(policy), levels_text,
                        fmt(agg.mean_total_levels),
                        fmt(agg.mean_ops_per_sweep),
                        fmt(agg.mean_batch_mean), fmt(agg.se_batch_mean),
                        fmt(agg.mean_batch_sd)});
    }
    result.table = format_aligned_table(rows);

    if (!config.out_dir.empty()) {
        std::ofstream out(config.out_dir + "/summary_table.txt");
        out << result.table;
        std::vector<std::pair<std::string, std::string>> records;
        records.emplace_back("replications",
                             std::to_string(config.replications));
        records.emplace_back("completed", std::to_string(result.completed));
        for (const PolicyAggregate& agg : result.aggregates) {
            const std::string p = policy_to_string(agg.policy);
            records.emplace_back(p + "_batch_mean",
                                 fmt17(agg.mean_batch_mean));
            records.emplace_back(p + "_batch_mean_se",
                                 fmt17(agg.se_batch_mean));
            records.emplace_back(p + "_batch_sd", fmt17(agg.mean_batch_sd));
            records.emplace_back(p + "_ops_per_sweep",
                                 fmt17(agg.mean_ops_per_sweep));
            records.emplace_back(p + "_predicted_ops",
                                 fmt17(agg.mean_predicted_ops));
        }
        store_records(records, config.out_dir + "/summary_records.txt");
    }
    return result;
}

/// One grid row for the planning table: a response-side concentration and
/// a covariate-side concentration pattern.
struct PlanGridRow {
    double alpha_theta = 1.0;
    std::vector<double> alpha_psi;
};

/// Render a planning table over a concentration grid and sample sizes.
/// Each cell reports the planned response level and the first three
/// covariate-side levels.
inline std::string plan_table(const std::vector<PlanGridRow>& grid,
                              const ErrorBudget& budget,
                              const std::vector<int>& ns) {
    if (grid.empty() || ns.empty()) {
        throw validation_error("plan_table: empty grid");
    }
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"alpha_theta", "alpha_psi"};
    for (int n : ns) {
        header.push_back("n=" + std::to_string(n));
    }
    rows.push_back(header);
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    for (const PlanGridRow& row : grid) {
        std::vector<std::string> cells;
        cells.push_back(fmt(row.alpha_theta));
        std::string pattern;
        for (std::size_t i = 0; i < row.alpha_psi.size(); ++i) {
            pattern += (i ? "," : "") + fmt(row.alpha_psi[i]);
        }
        cells.push_back("(" + pattern + ",...)");
        Eigen::VectorXd alpha_psi(row.alpha_psi.size());
        for (std::size_t i = 0; i < row.alpha_psi.size(); ++i) {
            alpha_psi[i] = row.alpha_psi[i];
        }
        for (int n : ns) {
            const PlanReport plan =
                compare_fixed(n, row.alpha_theta, alpha_psi, budget);
            std::string cell = "N=" + std::to_string(plan.levels.n_theta) +
                               " M=(";
            const int shown =
                std::min(3, static_cast<int>(plan.levels.m_psi.size()));
            for (int k = 0; k < shown; ++k) {
                cell += (k ? "," : "") +
                        std::to_string(plan.levels.m_psi[k]);
            }
            cell += ",...)";
            cells.push_back(cell);
        }
        rows.push_back(cells);
    }
    return format_aligned_table(rows);
}

/// The concentration grid of the planning study: constant and increasing
/// covariate-side patterns at three response-side concentrations.
inline std::vector<PlanGridRow> default_plan_grid() {
    return {{0.5, {0.5, 0.5, 0.5}},
            {0.5, {0.5, 1.0, 1.5}},
            {1.0, {0.5, 1.5, 3.0}},
            {3.0, {0.5, 1.5, 3.0}}};
}

} // namespace edpm
