// Command-line front end: planning, simulation, variational fits, chain
// runs, and the replication harness, all driven by flat key-value config
// files. Exit codes: 0 success, 2 validation or parse error, 3 numerical
// degeneracy.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edpm/edpm.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path,
                    "Path to a key-value config file");
    cmd->add_option("--out", args.out_dir, "Output directory")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "Master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_given = true; });
}

edpm::Config load_config(const CommonArgs& args) {
    if (args.config_path.empty()) {
        return edpm::Config();
    }
    return edpm::Config::from_file(args.config_path);
}

std::uint64_t resolve_seed(const CommonArgs& args, const edpm::Config& cfg) {
    if (args.seed_given) {
        return args.seed;
    }
    return static_cast<std::uint64_t>(cfg.get_int("seed", 0));
}

edpm::SimConfig sim_from_config(const edpm::Config& cfg) {
    edpm::SimConfig sim;
    sim.scenario = edpm::scenario_from_string(
        cfg.get_string("sim_scenario", edpm::to_string(sim.scenario)));
    sim.n = static_cast<int>(cfg.get_int("sim_n", sim.n));
    sim.d = static_cast<int>(cfg.get_int("sim_d", sim.d));
    sim.n_true = static_cast<int>(cfg.get_int("sim_n_true", sim.n_true));
    sim.m_true = static_cast<int>(cfg.get_int("sim_m_true", sim.m_true));
    sim.alpha_theta = cfg.get_double("sim_alpha_theta", sim.alpha_theta);
    sim.alpha_psi = cfg.get_double("sim_alpha_psi", sim.alpha_psi);
    sim.sigma = cfg.get_double("sim_sigma", sim.sigma);
    sim.mu_theta_prior =
        cfg.get_double("sim_mu_theta_prior", sim.mu_theta_prior);
    sim.sigma_theta_prior =
        cfg.get_double("sim_sigma_theta_prior", sim.sigma_theta_prior);
    sim.mu_psi_prior = cfg.get_double("sim_mu_psi_prior", sim.mu_psi_prior);
    sim.sigma_psi_prior =
        cfg.get_double("sim_sigma_psi_prior", sim.sigma_psi_prior);
    sim.omega1 = cfg.get_double("sim_omega1", sim.omega1);
    sim.omega2 = cfg.get_double("sim_omega2", sim.omega2);
    sim.mu1 = cfg.get_double("sim_mu1", sim.mu1);
    sim.mu2 = cfg.get_double("sim_mu2", sim.mu2);
    sim.nu_min = cfg.get_double("sim_nu_min", sim.nu_min);
    sim.t_centered_at_mean =
        cfg.get_bool("sim_t_centered_at_mean", sim.t_centered_at_mean);
    return sim;
}

edpm::ErrorBudget budget_from_config(const edpm::Config& cfg) {
    edpm::ErrorBudget budget;
    budget.eps = cfg.get_double("budget_eps", budget.eps);
    budget.eps_theta = cfg.get_double("budget_eps_theta", budget.eps_theta);
    budget.validate();
    return budget;
}

edpm::ChainConfig chain_from_config(const edpm::Config& cfg) {
    edpm::ChainConfig chain;
    chain.iterations =
        static_cast<int>(cfg.get_int("chain_iterations", chain.iterations));
    chain.burn_in =
        static_cast<int>(cfg.get_int("chain_burn_in", chain.burn_in));
    chain.thin = static_cast<int>(cfg.get_int("chain_thin", chain.thin));
    chain.update_concentrations = cfg.get_bool("chain_update_concentrations",
                                               chain.update_concentrations);
    return chain;
}

edpm::CaviOptions vb_from_config(const edpm::Config& cfg) {
    edpm::CaviOptions vb;
    vb.max_iters = static_cast<int>(cfg.get_int("vb_max_iters", vb.max_iters));
    vb.rel_tol = cfg.get_double("vb_rel_tol", vb.rel_tol);
    vb.strategy =
        edpm::init_strategy_from_string(cfg.get_string("vb_init", "prior"));
    vb.update_concentrations =
        cfg.get_bool("vb_update_concentrations", vb.update_concentrations);
    vb.update_precisions =
        cfg.get_bool("vb_update_precisions", vb.update_precisions);
    vb.fixed_sigma_theta =
        cfg.get_double("vb_fixed_sigma_theta", vb.fixed_sigma_theta);
    vb.fixed_sigma_psi =
        cfg.get_double("vb_fixed_sigma_psi", vb.fixed_sigma_psi);
    return vb;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i];
    }
    return out;
}

std::string join_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + edpm::fmt17(v[i]);
    }
    return out;
}

std::string join_levels(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

/// Dataset for vb/gibbs: loaded from the 'data' key when present, otherwise
/// simulated from the sim_* keys with the resolved seed.
edpm::Dataset fit_dataset(const edpm::Config& cfg, std::uint64_t seed) {
    const std::string data_path = cfg.get_string("data", "");
    if (!data_path.empty()) {
        return edpm::load_dataset(data_path);
    }
    edpm::SimConfig sim = sim_from_config(cfg);
    sim.seed = edpm::Rng::mix(seed, 0);
    return edpm::generate_dataset(sim).first;
}

/// Truncation levels for vb/gibbs: explicit n_theta/m_psi keys win,
/// otherwise the planner runs on the alpha_theta/alpha_psi keys.
edpm::TruncationLevels fit_levels(const edpm::Config& cfg, int n,
                                  const edpm::ErrorBudget& budget) {
    edpm::TruncationLevels levels;
    if (cfg.has("n_theta")) {
        levels.n_theta = static_cast<int>(cfg.get_int("n_theta", 2));
        const std::vector<int> pattern =
            cfg.get_int_list("m_psi", std::vector<int>{2});
        levels.m_psi.resize(levels.n_theta);
        for (int k = 0; k < levels.n_theta; ++k) {
            levels.m_psi[k] = pattern[k % pattern.size()];
        }
    } else {
        const double alpha_theta = cfg.get_double("alpha_theta", 1.0);
        const Eigen::VectorXd alpha_psi = to_vector(
            cfg.get_double_list("alpha_psi", std::vector<double>{1.0}));
        levels =
            edpm::compare_fixed(n, alpha_theta, alpha_psi, budget).levels;
    }
    levels.validate();
    return levels;
}

edpm::Hyperparams hyper_from_config(const edpm::Config& cfg, int d,
                                    int n_theta) {
    edpm::Hyperparams hyper = edpm::Hyperparams::defaults(d, n_theta);
    hyper.alpha_theta = cfg.get_double("alpha_theta", 1.0);
    hyper.alpha_psi = edpm::cycle_alpha_pattern(
        to_vector(cfg.get_double_list("alpha_psi", std::vector<double>{1.0})),
        n_theta);
    hyper.mu0.setConstant(cfg.get_double("hyper_mu_theta", 0.0));
    hyper.m.setConstant(cfg.get_double("hyper_mu_psi", 0.0));
    hyper.c_x.setConstant(cfg.get_double("hyper_c_x", 4.0));
    hyper.conc_prior_theta.shape = cfg.get_double("hyper_conc_shape", 1.0);
    hyper.conc_prior_theta.rate = cfg.get_double("hyper_conc_rate", 1.0);
    hyper.conc_prior_psi = hyper.conc_prior_theta;
    hyper.prec_prior_theta.shape = cfg.get_double("hyper_prec_shape", 1.0);
    hyper.prec_prior_theta.rate = cfg.get_double("hyper_prec_rate", 1.0);
    hyper.prec_prior_psi = hyper.prec_prior_theta;
    return hyper;
}

edpm::ExperimentConfig experiment_from_config(const edpm::Config& cfg) {
    edpm::ExperimentConfig exp;
    exp.sim = sim_from_config(cfg);
    exp.budget = budget_from_config(cfg);
    exp.chain = chain_from_config(cfg);
    exp.vb = vb_from_config(cfg);
    exp.batches = static_cast<int>(cfg.get_int("batches", exp.batches));
    exp.batch_size =
        static_cast<int>(cfg.get_int("batch_size", exp.batch_size));
    exp.replications =
        static_cast<int>(cfg.get_int("replications", exp.replications));
    exp.probe_count =
        static_cast<int>(cfg.get_int("probe_count", exp.probe_count));
    exp.large_multiplier =
        cfg.get_double("large_multiplier", exp.large_multiplier);
    const std::string policies = cfg.get_string("policies", "");
    if (!policies.empty()) {
        exp.policies.clear();
        std::stringstream ss(policies);
        std::string token;
        while (std::getline(ss, token, ',')) {
            exp.policies.push_back(edpm::policy_from_string(token));
        }
    }
    return exp;
}

int cmd_plan(const CommonArgs& args) {
    const edpm::Config cfg = load_config(args);
    const edpm::ErrorBudget budget = budget_from_config(cfg);
    std::filesystem::create_directories(args.out_dir);

    std::vector<edpm::PlanGridRow> grid;
    const bool single = cfg.has("alpha_theta");
    if (single) {
        edpm::PlanGridRow row;
        row.alpha_theta = cfg.get_double("alpha_theta", 1.0);
        row.alpha_psi = cfg.get_double_list("alpha_psi", {1.0});
        grid.push_back(row);
    } else {
        grid = edpm::default_plan_grid();
    }
    std::vector<int> ns;
    for (long long n : cfg.get_int_list("n", std::vector<int>{200, 1000})) {
        ns.push_back(static_cast<int>(n));
    }
    cfg.reject_unknown_keys();

    const std::string table = edpm::plan_table(grid, budget, ns);
    std::ofstream(args.out_dir + "/plan_table.txt") << table;
    std::cout << table;

    if (single) {
        std::vector<std::pair<std::string, std::string>> records;
        for (int n : ns) {
            const edpm::PlanReport plan = edpm::compare_fixed(
                n, grid[0].alpha_theta, to_vector(grid[0].alpha_psi), budget);
            const std::string p = "n" + std::to_string(n) + "_";
            records.emplace_back(p + "n_theta",
                                 std::to_string(plan.levels.n_theta));
            records.emplace_back(p + "m_psi", join_levels(plan.levels.m_psi));
            records.emplace_back(p + "k_star", std::to_string(plan.k_star));
            records.emplace_back(p + "bound_tv", edpm::fmt17(plan.bound_tv));
            records.emplace_back(p + "bound_l1", edpm::fmt17(plan.bound_l1));
            records.emplace_back(p + "sum_m", std::to_string(plan.sum_m));
            records.emplace_back(p + "fixed_m", std::to_string(plan.fixed_m));
        }
        edpm::store_records(records, args.out_dir + "/plan_records.txt");
    }
    return 0;
}

int cmd_simulate(const CommonArgs& args) {
    const edpm::Config cfg = load_config(args);
    edpm::SimConfig sim = sim_from_config(cfg);
    sim.seed = resolve_seed(args, cfg);
    cfg.reject_unknown_keys();
    std::filesystem::create_directories(args.out_dir);

    const auto [data, truth] = edpm::generate_dataset(sim);
    edpm::store_dataset(data, args.out_dir + "/dataset.csv");

    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("sim_scenario", edpm::to_string(sim.scenario));
    meta.emplace_back("sim_n", std::to_string(sim.n));
    meta.emplace_back("sim_d", std::to_string(sim.d));
    meta.emplace_back("sim_n_true", std::to_string(sim.n_true));
    meta.emplace_back("sim_m_true", std::to_string(sim.m_true));
    meta.emplace_back("sim_alpha_theta", edpm::fmt17(sim.alpha_theta));
    meta.emplace_back("sim_alpha_psi", edpm::fmt17(sim.alpha_psi));
    meta.emplace_back("sim_sigma", edpm::fmt17(sim.sigma));
    meta.emplace_back("sim_mu_theta_prior", edpm::fmt17(sim.mu_theta_prior));
    meta.emplace_back("sim_sigma_theta_prior",
                      edpm::fmt17(sim.sigma_theta_prior));
    meta.emplace_back("sim_mu_psi_prior", edpm::fmt17(sim.mu_psi_prior));
    meta.emplace_back("sim_sigma_psi_prior",
                      edpm::fmt17(sim.sigma_psi_prior));
    meta.emplace_back("sim_omega1", edpm::fmt17(sim.omega1));
    meta.emplace_back("sim_omega2", edpm::fmt17(sim.omega2));
    meta.emplace_back("sim_mu1", edpm::fmt17(sim.mu1));
    meta.emplace_back("sim_mu2", edpm::fmt17(sim.mu2));
    meta.emplace_back("sim_nu_min", edpm::fmt17(sim.nu_min));
    meta.emplace_back("sim_t_centered_at_mean",
                      sim.t_centered_at_mean ? "true" : "false");
    meta.emplace_back("seed", std::to_string(sim.seed));
    edpm::store_records(meta, args.out_dir + "/meta.txt");

    std::vector<std::pair<std::string, std::string>> rec;
    rec.emplace_back("n_theta", std::to_string(truth.levels.n_theta));
    rec.emplace_back("m_psi", join_levels(truth.levels.m_psi));
    rec.emplace_back("p_theta", join_vector(truth.weights.p_theta));
    for (int k = 0; k < truth.levels.n_theta; ++k) {
        const std::string p = "k" + std::to_string(k) + "_";
        rec.emplace_back(p + "p_psi", join_vector(truth.weights.p_psi[k]));
        rec.emplace_back(p + "theta_star",
                         join_vector(truth.atoms.theta_star.row(k)));
        for (int j = 0; j < truth.levels.m_psi[k]; ++j) {
            rec.emplace_back(p + "j" + std::to_string(j) + "_mu_psi",
                             join_vector(truth.atoms.mu_psi[k].row(j)));
        }
    }
    rec.emplace_back("sigma_theta", edpm::fmt17(truth.atoms.sigma_theta));
    rec.emplace_back("sigma_psi", edpm::fmt17(truth.atoms.sigma_psi));
    std::string ks;
    std::string js;
    for (int i = 0; i < sim.n; ++i) {
        ks += (i ? "," : "") + std::to_string(truth.assign.k[i]);
        js += (i ? "," : "") + std::to_string(truth.assign.j[i]);
    }
    rec.emplace_back("assign_k", ks);
    rec.emplace_back("assign_j", js);
    edpm::store_records(rec, args.out_dir + "/truth.txt");

    std::cout << "simulate: wrote " << sim.n << " observations (d=" << sim.d
              << ", scenario=" << edpm::to_string(sim.scenario) << ") to "
              << args.out_dir << "/dataset.csv\n";
    return 0;
}

int cmd_vb(const CommonArgs& args) {
    const edpm::Config cfg = load_config(args);
    const std::uint64_t seed = resolve_seed(args, cfg);
    const edpm::ErrorBudget budget = budget_from_config(cfg);
    const edpm::Dataset data = fit_dataset(cfg, seed);
    const edpm::TruncationLevels levels = fit_levels(cfg, data.n(), budget);
    const edpm::Hyperparams hyper =
        hyper_from_config(cfg, data.d(), levels.n_theta);
    edpm::CaviOptions options = vb_from_config(cfg);
    options.seed = edpm::Rng::mix(seed, 1);
    cfg.reject_unknown_keys();
    std::filesystem::create_directories(args.out_dir);

    const edpm::CaviResult result =
        edpm::run_cavi(data, levels, hyper, options);

    std::ofstream trace(args.out_dir + "/elbo_trace.csv");
    trace << "iter,elbo\n";
    for (std::size_t i = 0; i < result.elbo_trace.size(); ++i) {
        trace << (i + 1) << "," << edpm::fmt17(result.elbo_trace[i]) << "\n";
    }

    const edpm::AlphaEstimates est = edpm::estimate_alphas(result.state);
    std::vector<std::pair<std::string, std::string>> rec;
    rec.emplace_back("converged", result.converged ? "true" : "false");
    rec.emplace_back("iterations", std::to_string(result.iterations));
    rec.emplace_back("elbo", edpm::fmt17(result.elbo_trace.back()));
    rec.emplace_back("n_theta", std::to_string(levels.n_theta));
    rec.emplace_back("m_psi", join_levels(levels.m_psi));
    rec.emplace_back("alpha_theta_hat", edpm::fmt17(est.alpha_theta));
    rec.emplace_back("alpha_psi_hat", join_vector(est.alpha_psi));
    rec.emplace_back("degenerate_resets",
                     std::to_string(result.state.degenerate_resets));
    edpm::store_records(rec, args.out_dir + "/vb_summary.txt");

    std::cout << "vb: " << (result.converged ? "converged" : "stopped")
              << " after " << result.iterations
              << " sweeps, elbo=" << result.elbo_trace.back()
              << ", alpha_theta_hat=" << est.alpha_theta << "\n";
    return 0;
}

int cmd_gibbs(const CommonArgs& args) {
    const edpm::Config cfg = load_config(args);
    const std::uint64_t seed = resolve_seed(args, cfg);
    const edpm::ErrorBudget budget = budget_from_config(cfg);
    const edpm::Dataset data = fit_dataset(cfg, seed);
    const edpm::TruncationLevels levels = fit_levels(cfg, data.n(), budget);
    const edpm::Hyperparams hyper =
        hyper_from_config(cfg, data.d(), levels.n_theta);

    edpm::ChainConfig chain = chain_from_config(cfg);
    chain.seed = edpm::Rng::mix(seed, 2);
    const int probe_count =
        static_cast<int>(cfg.get_int("probe_count", 3));
    if (probe_count < 1 || probe_count > data.n()) {
        throw edpm::validation_error("gibbs: probe_count out of range");
    }
    for (int p = 0; p < probe_count; ++p) {
        const int idx = static_cast<int>(
            (static_cast<long long>(p) * data.n()) / probe_count);
        chain.probes.push_back(data.x.row(idx));
    }

    const std::string init_mode = cfg.get_string("init", "vb");
    edpm::EDPMState init;
    if (init_mode == "vb") {
        edpm::CaviOptions options = vb_from_config(cfg);
        options.seed = edpm::Rng::mix(seed, 1);
        const edpm::CaviResult fit =
            edpm::run_cavi(data, levels, hyper, options);
        init = edpm::warm_start_gibbs(fit.state);
    } else if (init_mode == "prior") {
        vb_from_config(cfg);  // mark vb_* keys as read
        edpm::Rng rng(edpm::Rng::mix(seed, 1));
        const edpm::EdpDraw draw =
            edpm::draw_truncated_edp(levels, hyper, data.d(), rng);
        init.sticks = draw.sticks;
        init.weights = draw.weights;
        init.atoms = draw.atoms;
        init.alpha_theta = hyper.alpha_theta;
        init.alpha_psi = hyper.alpha_psi;
        init.assign.k.resize(data.n());
        init.assign.j.resize(data.n());
        auto to_std = [](const Eigen::VectorXd& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        const std::vector<double> p_theta = to_std(init.weights.p_theta);
        for (int i = 0; i < data.n(); ++i) {
            init.assign.k[i] = rng.categorical(p_theta);
            init.assign.j[i] =
                rng.categorical(to_std(init.weights.p_psi[init.assign.k[i]]));
        }
    } else {
        throw edpm::validation_error("gibbs: init must be 'vb' or 'prior'");
    }
    const int batches = static_cast<int>(cfg.get_int("batches", 0));
    const int batch_size = static_cast<int>(cfg.get_int("batch_size", 0));
    cfg.reject_unknown_keys();
    std::filesystem::create_directories(args.out_dir);

    edpm::ChainTrace trace;
    try {
        edpm::run_chain(data, levels, hyper, init, chain, trace);
    } catch (const edpm::numerical_error&) {
        // Flush whatever was recorded before the abort, then propagate.
        edpm::store_trace(trace, args.out_dir + "/trace.csv");
        throw;
    }
    edpm::store_trace(trace, args.out_dir + "/trace.csv");

    std::vector<std::pair<std::string, std::string>> rec;
    rec.emplace_back("sweeps", std::to_string(trace.sweeps));
    rec.emplace_back("kept", std::to_string(trace.records.size()));
    rec.emplace_back("assignment_ops", std::to_string(trace.assignment_ops));
    rec.emplace_back(
        "ops_per_sweep",
        edpm::fmt17(static_cast<double>(trace.assignment_ops) / trace.sweeps));
    rec.emplace_back("n_theta", std::to_string(levels.n_theta));
    rec.emplace_back("m_psi", join_levels(levels.m_psi));

    if (batches > 0 && batch_size > 0 && !chain.probes.empty()) {
        std::vector<double> series;
        for (const edpm::ChainRecord& r : trace.records) {
            series.push_back(r.ey_probe[0]);
        }
        const edpm::BatchSummary summary =
            edpm::batch_summaries(series, batches, batch_size);
        rec.emplace_back("probe1_batch_mean", edpm::fmt17(summary.mean.mean));
        rec.emplace_back("probe1_batch_sd", edpm::fmt17(summary.mean.sd));
    }
    edpm::store_records(rec, args.out_dir + "/gibbs_summary.txt");

    std::cout << "gibbs: ran " << trace.sweeps << " sweeps, kept "
              << trace.records.size() << " records, trace in " << args.out_dir
              << "/trace.csv\n";
    return 0;
}

int cmd_experiment(const CommonArgs& args) {
    const edpm::Config cfg = load_config(args);
    edpm::ExperimentConfig exp = experiment_from_config(cfg);
    exp.seed = resolve_seed(args, cfg);
    exp.out_dir = args.out_dir;
    cfg.reject_unknown_keys();

    const edpm::ExperimentResult result = edpm::run_experiment(exp);
    std::cout << result.table;
    std::cout << "experiment: " << result.completed << "/"
              << exp.replications << " replications succeeded, outputs in "
              << args.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Enriched Dirichlet process mixture toolkit"};
    app.require_subcommand(1);

    CommonArgs plan_args;
    CLI::App* plan = app.add_subcommand(
        "plan", "Plan truncation levels over a concentration grid");
    add_common(plan, plan_args);

    CommonArgs sim_args;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Generate a synthetic dataset with ground truth");
    add_common(simulate, sim_args);

    CommonArgs vb_args;
    CLI::App* vb = app.add_subcommand(
        "vb", "Fit the mean-field variational approximation");
    add_common(vb, vb_args);

    CommonArgs gibbs_args;
    CLI::App* gibbs = app.add_subcommand(
        "gibbs", "Run the blocked Gibbs sampler");
    add_common(gibbs, gibbs_args);

    CommonArgs exp_args;
    CLI::App* experiment = app.add_subcommand(
        "experiment", "Run the truncation-policy replication harness");
    add_common(experiment, exp_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (plan->parsed()) {
            return cmd_plan(plan_args);
        }
        if (simulate->parsed()) {
            return cmd_simulate(sim_args);
        }
        if (vb->parsed()) {
            return cmd_vb(vb_args);
        }
        if (gibbs->parsed()) {
            return cmd_gibbs(gibbs_args);
        }
        if (experiment->parsed()) {
            return cmd_experiment(exp_args);
        }
    } catch (const edpm::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const edpm::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const edpm::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
