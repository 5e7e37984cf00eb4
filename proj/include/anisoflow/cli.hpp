#pragma once

// Command-line front end. Subcommands:
//   simulate    one trajectory, per-step norms, optional field snapshots
//   clt-rate    coupled convergence rate of u_eps toward the base flow
//   clt-limit   coupled gap between the scaled deviation and its limit
//   mdp-tail    exploratory tail probabilities on the deviation scale
//   rate-min    rate-function minimization toward a target field
//   invariants  identity, energy, and moment-boundedness battery
// Flags --seed/--samples/--threads override the config; --out (or the
// ANISOFLOW_OUT_DIR environment variable) overrides the output directory.

#include <anisoflow/cli_version.hpp>
#include <anisoflow/experiments.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace aniso {

namespace detail {

inline void print_summary(const ExperimentReport& r, std::ostream& os) {
    os << "[" << r.kind << "] config " << r.config_hash << ", seed " << r.master_seed
       << ", samples " << r.samples << "\n";
    if (!r.rows.empty()) {
        os << "  eps          ok  failed";
        for (const auto& [k, v] : r.rows.front().stats) os << "  " << k;
        os << "\n";
        char buf[64];
        for (const auto& row : r.rows) {
            std::snprintf(buf, sizeof buf, "  %-11.4g %3d  %5d", row.eps, row.ok, row.failed);
            os << buf;
            for (const auto& [k, v] : row.stats) {
                std::snprintf(buf, sizeof buf, "  %.6g", v);
                os << buf;
            }
            os << "\n";
        }
    }
    for (const auto& [name, fit] : r.fits) {
        os << "  fit " << name << ": ";
        if (fit.degenerate)
            os << "degenerate\n";
        else
            os << fit.slope << " (ci95 " << fit.ci_lo << " .. " << fit.ci_hi << ")\n";
    }
    if (r.extra.contains("all_pass"))
        os << "  all_pass: " << (r.extra["all_pass"].get<bool>() ? "yes" : "NO") << "\n";
    if (r.extra.contains("monotone_decreasing"))
        os << "  monotone_decreasing: "
           << (r.extra["monotone_decreasing"].get<bool>() ? "yes" : "NO") << "\n";
    for (const auto& n : r.notes) os << "  note: " << n << "\n";
}

} // namespace detail

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"anisoflow: pseudo-spectral toolkit for 2D stochastic flow "
                 "with horizontal-only dissipation"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, target_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> samples, threads;
    app.add_option("--config", config_path, "JSON config file (defaults used when omitted)");
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--samples", samples, "Monte Carlo sample count override");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--threads", threads, "worker thread count override (0 = hardware)");

    auto* sim = app.add_subcommand("simulate", "integrate one trajectory");
    auto* rate = app.add_subcommand("clt-rate", "convergence rate across the eps ladder");
    auto* limit = app.add_subcommand("clt-limit", "scaled deviation vs its limit");
    auto* mdp = app.add_subcommand("mdp-tail", "tail probabilities on the deviation scale");
    auto* ratemin = app.add_subcommand("rate-min", "minimize control energy toward a target");
    auto* invar = app.add_subcommand("invariants", "identity and moment battery");
    ratemin->add_option("--target", target_path, "terminal target field (.bin)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg =
            config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) cfg.master_seed = *seed;
        if (samples) cfg.samples = *samples;
        if (threads) cfg.threads = *threads;
        cfg.validate();
        const std::string dir = resolve_output_dir(cfg.output_dir, out_dir);

        if (ratemin->parsed()) {
            const Grid g = cfg.grid();
            const NoiseModel noise = NoiseModel::make(g, cfg.noise);
            const SpectralField u0 = initial_field(cfg);
            const TrajectoryRecord feed = deterministic_feed(u0, cfg.integrator());
            const SpectralField target = load_field_binary(target_path);
            SkeletonProblem prob{feed, noise, cfg.integrator(), cfg.eps2};
            RateOptions opts;
            opts.tolerance = cfg.rate_tolerance;
            opts.max_stages = cfg.rate_max_stages;
            const RateResult res = rate_function(prob, RateTarget::terminal_field(target), opts);
            std::filesystem::create_directories(dir.empty() ? "." : dir);
            const auto path = std::filesystem::path(dir.empty() ? "." : dir) / "rate_result.json";
            std::ofstream out(path, std::ios::binary);
            out << rate_result_to_json(res).dump(2) << "\n";
            std::cout << "[rate-min] feasible=" << (res.feasible ? "yes" : "no")
                      << " value=" << (res.feasible ? std::to_string(res.value) : "inf")
                      << " residual=" << res.target_residual << " iterations="
                      << res.iterations << "\n  wrote " << path.string() << "\n";
            return 0;
        }

        ExperimentReport rep;
        if (sim->parsed())
            rep = run_simulate(cfg, dir);
        else if (rate->parsed())
            rep = run_clt_rate(cfg);
        else if (limit->parsed())
            rep = run_clt_limit(cfg);
        else if (mdp->parsed())
            rep = run_mdp_tail(cfg);
        else if (invar->parsed())
            rep = run_invariant_suite(cfg);
        write_report(rep, dir);
        detail::print_summary(rep, std::cout);
        std::cout << "  wrote " << (dir.empty() ? "." : dir) << "/report.json ("
                  << rep.runtime_seconds << " s)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace aniso
