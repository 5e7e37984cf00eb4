#pragma once

// Monte Carlo harness: configuration, seeded parallel sampling, the four
// experiment drivers (CLT rate, CLT limit, MDP tail probe, invariant
// battery), and report persistence.
//
// Reproducibility contract: a report is a pure function of (config, master
// seed). Sample i draws everything it needs from derive_seed(master, i),
// workers share only immutable state, and aggregation is a sequential
// reduction in sample-index order, so report.json is byte-identical across
// runs and across worker counts. Wall-clock timing goes to a sidecar file
// (meta.txt), never into report.json.

#include <anisoflow/integrators.hpp>
#include <anisoflow/random_fields.hpp>
#include <anisoflow/ratefn.hpp>
#include <anisoflow/serialize.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace aniso {

using nlohmann::json;

// --- configuration ---------------------------------------------------------

struct ExperimentConfig {
    // [grid]
    int n_h = 16, n_v = 16;
    double dealias_fraction = 2.0 / 3.0;
    // [integrator]
    double dt = 1e-3;
    double T = 0.5;
    int record_every = 1;
    double eps2 = 0.0;
    double sim_eps = 0.0; // noise amplitude for the `simulate` subcommand
    // [noise]
    NoiseSpec noise;
    // [ladder]
    std::vector<double> eps_ladder{1e-1, 1e-2, 1e-3, 1e-4};
    double scale_exponent = 0.25; // a in lambda(eps) = eps^{-a}
    // [mc]
    int samples = 64;
    std::uint64_t master_seed = 12345;
    int threads = 1; // 0 = hardware concurrency
    // [output]
    std::string output_dir = "out";
    bool write_fields = false;
    // [initial]
    std::string initial_kind = "shear"; // zero | shear | random
    double initial_amplitude = 1.0;
    std::uint64_t initial_seed = 7;
    double initial_decay = 2.0;
    // [mdp]
    std::vector<double> mdp_deltas{0.25, 0.5, 1.0, 2.0};
    bool mdp_rate_bound = false;
    int mdp_rate_probes = 8;
    // [invariants]
    double weight_k = 1.0;
    int identity_instances = 100;
    double level_set_radius = 1.0;
    // [rate]
    double rate_tolerance = 1e-6;
    int rate_max_stages = 14;

    Grid grid() const { return Grid{n_h, n_v, dealias_fraction}; }
    IntegratorConfig integrator() const {
        IntegratorConfig c;
        c.dt = dt;
        c.T = T;
        c.record_every = record_every;
        c.eps2 = eps2;
        return c;
    }
    void validate() const {
        grid();        // Grid constructor enforces its own invariants
        integrator().steps();
        if (samples < 2) throw std::invalid_argument("config: mc.samples must be >= 2");
        if (threads < 0) throw std::invalid_argument("config: mc.threads must be >= 0");
        if (eps_ladder.empty())
            throw std::invalid_argument("config: ladder.eps must be nonempty");
        for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
            if (!(eps_ladder[i] > 0.0))
                throw std::invalid_argument("config: ladder.eps entries must be positive");
            if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
                throw std::invalid_argument("config: ladder.eps must be strictly decreasing");
        }
        if (!(scale_exponent > 0.0) || !(scale_exponent < 0.5))
            throw std::invalid_argument("config: ladder.a must lie in (0,1/2)");
        for (double d : mdp_deltas)
            if (d < 0.0) throw std::invalid_argument("config: mdp.deltas must be nonnegative");
        if (initial_kind != "zero" && initial_kind != "shear" && initial_kind != "random")
            throw std::invalid_argument("config: initial.kind must be zero | shear | random");
        NoiseModel::make(grid(), noise); // validates the noise section
    }
};

namespace detail {

inline void require_keys(const json& j, const char* section,
                         std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw std::invalid_argument(std::string("config: unknown key \"") + it.key() +
                                        "\" in section " + section);
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

} // namespace detail

inline std::string noise_kind_name(NoiseKind k) {
    return k == NoiseKind::additive ? "additive" : "diagonal-multiplicative";
}
inline std::string decay_kind_name(DecayKind k) {
    return k == DecayKind::geometric ? "geometric" : "power";
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["grid"] = {{"n_h", c.n_h}, {"n_v", c.n_v}, {"dealias_fraction", c.dealias_fraction}};
    j["integrator"] = {{"dt", c.dt},
                       {"T", c.T},
                       {"record_every", c.record_every},
                       {"eps2", c.eps2},
                       {"eps", c.sim_eps}};
    j["noise"] = {{"kind", noise_kind_name(c.noise.kind)},
                  {"J", c.noise.J},
                  {"decay", decay_kind_name(c.noise.decay)},
                  {"rate", c.noise.rate},
                  {"coupling", c.noise.coupling}};
    j["ladder"] = {{"eps", c.eps_ladder}, {"a", c.scale_exponent}};
    j["mc"] = {{"samples", c.samples}, {"seed", c.master_seed}, {"threads", c.threads}};
    j["output"] = {{"dir", c.output_dir}, {"write_fields", c.write_fields}};
    j["initial"] = {{"kind", c.initial_kind},
                    {"amplitude", c.initial_amplitude},
                    {"seed", c.initial_seed},
                    {"decay", c.initial_decay}};
    j["mdp"] = {{"deltas", c.mdp_deltas},
                {"rate_bound", c.mdp_rate_bound},
                {"rate_probes", c.mdp_rate_probes}};
    j["invariants"] = {{"weight_k", c.weight_k},
                       {"identity_instances", c.identity_instances},
                       {"level_set_radius", c.level_set_radius}};
    j["rate"] = {{"tolerance", c.rate_tolerance}, {"max_stages", c.rate_max_stages}};
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    detail::require_keys(j, "(top level)",
                         {"grid", "integrator", "noise", "ladder", "mc", "output", "initial",
                          "mdp", "invariants", "rate"});
    if (j.contains("grid")) {
        const json& s = j.at("grid");
        detail::require_keys(s, "grid", {"n_h", "n_v", "dealias_fraction"});
        detail::read_into(s, "n_h", c.n_h);
        detail::read_into(s, "n_v", c.n_v);
        detail::read_into(s, "dealias_fraction", c.dealias_fraction);
    }
    if (j.contains("integrator")) {
        const json& s = j.at("integrator");
        detail::require_keys(s, "integrator", {"dt", "T", "record_every", "eps2", "eps"});
        detail::read_into(s, "dt", c.dt);
        detail::read_into(s, "T", c.T);
        detail::read_into(s, "record_every", c.record_every);
        detail::read_into(s, "eps2", c.eps2);
        detail::read_into(s, "eps", c.sim_eps);
    }
    if (j.contains("noise")) {
        const json& s = j.at("noise");
        detail::require_keys(s, "noise", {"kind", "J", "decay", "rate", "coupling"});
        if (s.contains("kind")) {
            const std::string k = s.at("kind").get<std::string>();
            if (k == "additive")
                c.noise.kind = NoiseKind::additive;
            else if (k == "diagonal-multiplicative")
                c.noise.kind = NoiseKind::diagonal_multiplicative;
            else
                throw std::invalid_argument("config: noise.kind must be additive | "
                                            "diagonal-multiplicative");
        }
        detail::read_into(s, "J", c.noise.J);
        if (s.contains("decay")) {
            const std::string d = s.at("decay").get<std::string>();
            if (d == "geometric")
                c.noise.decay = DecayKind::geometric;
            else if (d == "power")
                c.noise.decay = DecayKind::power;
            else
                throw std::invalid_argument("config: noise.decay must be geometric | power");
        }
        detail::read_into(s, "rate", c.noise.rate);
        detail::read_into(s, "coupling", c.noise.coupling);
    }
    if (j.contains("ladder")) {
        const json& s = j.at("ladder");
        detail::require_keys(s, "ladder", {"eps", "a"});
        detail::read_into(s, "eps", c.eps_ladder);
        detail::read_into(s, "a", c.scale_exponent);
    }
    if (j.contains("mc")) {
        const json& s = j.at("mc");
        detail::require_keys(s, "mc", {"samples", "seed", "threads"});
        detail::read_into(s, "samples", c.samples);
        detail::read_into(s, "seed", c.master_seed);
        detail::read_into(s, "threads", c.threads);
    }
    if (j.contains("output")) {
        const json& s = j.at("output");
        detail::require_keys(s, "output", {"dir", "write_fields"});
        detail::read_into(s, "dir", c.output_dir);
        detail::read_into(s, "write_fields", c.write_fields);
    }
    if (j.contains("initial")) {
        const json& s = j.at("initial");
        detail::require_keys(s, "initial", {"kind", "amplitude", "seed", "decay"});
        detail::read_into(s, "kind", c.initial_kind);
        detail::read_into(s, "amplitude", c.initial_amplitude);
        detail::read_into(s, "seed", c.initial_seed);
        detail::read_into(s, "decay", c.initial_decay);
    }
    if (j.contains("mdp")) {
        const json& s = j.at("mdp");
        detail::require_keys(s, "mdp", {"deltas", "rate_bound", "rate_probes"});
        detail::read_into(s, "deltas", c.mdp_deltas);
        detail::read_into(s, "rate_bound", c.mdp_rate_bound);
        detail::read_into(s, "rate_probes", c.mdp_rate_probes);
    }
    if (j.contains("invariants")) {
        const json& s = j.at("invariants");
        detail::require_keys(s, "invariants",
                             {"weight_k", "identity_instances", "level_set_radius"});
        detail::read_into(s, "weight_k", c.weight_k);
        detail::read_into(s, "identity_instances", c.identity_instances);
        detail::read_into(s, "level_set_radius", c.level_set_radius);
    }
    if (j.contains("rate")) {
        const json& s = j.at("rate");
        detail::require_keys(s, "rate", {"tolerance", "max_stages"});
        detail::read_into(s, "tolerance", c.rate_tolerance);
        detail::read_into(s, "max_stages", c.rate_max_stages);
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// Hash of the statistically relevant configuration. Execution details
// (worker count, output location) are excluded so reports from different
// thread counts or output directories remain byte-identical.
inline std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j["mc"].erase("threads");
    j.erase("output");
    const std::string s = j.dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) h = (h ^ ch) * 0x100000001B3ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline SpectralField initial_field(const ExperimentConfig& c) {
    const Grid g = c.grid();
    SpectralField u(g);
    if (c.initial_kind == "zero") return u;
    if (c.initial_kind == "shear") {
        // (amp sin x2, 0): a steady state of the anisotropic flow
        u.set_mode(0, 0, 1, cplx(0.0, -0.5 * c.initial_amplitude));
        return u;
    }
    return random_field(g, c.initial_seed, c.initial_decay, c.initial_amplitude);
}

// --- deterministic parallel sampling ----------------------------------------

// results[i] = worker(i), dispatched over a pool by an atomic counter.
// Workers must be pure functions of their index (plus shared immutable
// state); the output vector is then independent of the thread count.
template <typename T, typename F>
std::vector<T> parallel_samples(int count, int threads, F&& worker) {
    std::vector<T> results(static_cast<std::size_t>(count));
    int n = threads <= 0 ? int(std::thread::hardware_concurrency()) : threads;
    n = std::max(1, std::min(n, count));
    if (n == 1) {
        for (int i = 0; i < count; ++i) results[std::size_t(i)] = worker(i);
        return results;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(n));
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    results[std::size_t(i)] = worker(i);
                } catch (...) {
                    errors[std::size_t(i)] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e); // first by index: deterministic
    return results;
}

// --- statistics ------------------------------------------------------------

struct MeanSE {
    double mean = 0.0, se = 0.0;
    int n = 0;
};

inline MeanSE mean_se(const std::vector<double>& xs) {
    MeanSE r;
    double sum = 0.0;
    for (double x : xs)
        if (std::isfinite(x)) {
            sum += x;
            ++r.n;
        }
    if (r.n == 0) return r;
    r.mean = sum / r.n;
    if (r.n > 1) {
        double ss = 0.0;
        for (double x : xs)
            if (std::isfinite(x)) ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(ss / (double(r.n) * (r.n - 1)));
    }
    return r;
}

struct SlopeFit {
    double slope = 0.0, stderr_ = 0.0, ci_lo = 0.0, ci_hi = 0.0;
    int points = 0;
    bool degenerate = false;
};

// OLS fit of log(y) against log(x); nonpositive y marks the fit degenerate
// (the zero-noise case) rather than feeding log(0) downstream.
inline SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    SlopeFit f;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i])) {
            f.degenerate = true;
            continue;
        }
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    f.points = int(lx.size());
    if (f.points < 2) {
        f.degenerate = true;
        return f;
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < f.points; ++i) {
        mx += lx[std::size_t(i)];
        my += ly[std::size_t(i)];
    }
    mx /= f.points;
    my /= f.points;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < f.points; ++i) {
        sxx += (lx[std::size_t(i)] - mx) * (lx[std::size_t(i)] - mx);
        sxy += (lx[std::size_t(i)] - mx) * (ly[std::size_t(i)] - my);
    }
    if (sxx == 0.0) {
        f.degenerate = true;
        return f;
    }
    f.slope = sxy / sxx;
    if (f.points > 2) {
        const double intercept = my - f.slope * mx;
        double rss = 0.0;
        for (int i = 0; i < f.points; ++i) {
            const double r = ly[std::size_t(i)] - intercept - f.slope * lx[std::size_t(i)];
            rss += r * r;
        }
        f.stderr_ = std::sqrt(rss / (f.points - 2) / sxx);
    }
    f.ci_lo = f.slope - 2.0 * f.stderr_;
    f.ci_hi = f.slope + 2.0 * f.stderr_;
    return f;
}

inline json slope_to_json(const SlopeFit& f) {
    json j;
    j["slope"] = f.degenerate ? json() : json(f.slope);
    j["stderr"] = f.stderr_;
    j["ci95"] = {f.ci_lo, f.ci_hi};
    j["points"] = f.points;
    j["degenerate"] = f.degenerate;
    return j;
}

// --- report ------------------------------------------------------------------

struct EpsRow {
    double eps = 0.0;
    int ok = 0, failed = 0;
    std::map<std::string, double> stats; // ordered keys: deterministic JSON/CSV
};

struct ExperimentReport {
    std::string kind;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    int samples = 0;
    std::vector<std::uint64_t> sample_seeds;
    std::vector<EpsRow> rows;
    std::map<std::string, SlopeFit> fits;
    std::vector<std::string> notes;
    json extra = json::object();
    double runtime_seconds = 0.0; // sidecar only, never in report.json
    std::string csv_override;     // when set, replaces the eps-row summary.csv
};

inline json report_to_json(const ExperimentReport& r) {
    json j;
    j["kind"] = r.kind;
    j["config_hash"] = r.config_hash;
    j["master_seed"] = r.master_seed;
    j["samples"] = r.samples;
    j["sample_seeds"] = r.sample_seeds;
    j["rows"] = json::array();
    for (const auto& row : r.rows) {
        json jr;
        jr["eps"] = row.eps;
        jr["ok"] = row.ok;
        jr["failed"] = row.failed;
        for (const auto& [k, v] : row.stats) jr[k] = std::isfinite(v) ? json(v) : json();
        j["rows"].push_back(jr);
    }
    j["fits"] = json::object();
    for (const auto& [k, f] : r.fits) j["fits"][k] = slope_to_json(f);
    j["notes"] = r.notes;
    j["extra"] = r.extra;
    return j;
}

inline std::string report_csv(const ExperimentReport& r) {
    std::map<std::string, bool> keys;
    for (const auto& row : r.rows)
        for (const auto& [k, v] : row.stats) keys[k] = true;
    std::string out = "eps,ok,failed";
    for (const auto& [k, unused] : keys) out += "," + k;
    out += "\n";
    char buf[64];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%d", row.eps, row.ok, row.failed);
        out += buf;
        for (const auto& [k, unused] : keys) {
            auto it = row.stats.find(k);
            if (it == row.stats.end() || !std::isfinite(it->second)) {
                out += ",";
            } else {
                std::snprintf(buf, sizeof buf, ",%.17g", it->second);
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

// Output directory precedence: explicit CLI value, then the
// ANISOFLOW_OUT_DIR environment variable, then the config.
inline std::string resolve_output_dir(const std::string& cfg_dir, const std::string& cli_dir) {
    if (!cli_dir.empty()) return cli_dir;
    if (const char* env = std::getenv("ANISOFLOW_OUT_DIR"); env && *env) return env;
    return cfg_dir;
}

inline void write_report(const ExperimentReport& r, const std::string& dir_in) {
    namespace fs = std::filesystem;
    const std::string dir = dir_in.empty() ? "." : dir_in;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "report.json", std::ios::binary);
        if (!out) throw std::runtime_error("write_report: cannot write to " + dir);
        out << report_to_json(r).dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "summary.csv", std::ios::binary);
        out << (r.csv_override.empty() ? report_csv(r) : r.csv_override);
    }
    {
        std::ofstream out(fs::path(dir) / "meta.txt", std::ios::binary);
        out << "kind " << r.kind << "\nruntime_seconds " << r.runtime_seconds << "\n";
    }
}

// --- shared experiment state -------------------------------------------------

namespace detail {

struct ExperimentContext {
    Grid grid;
    NoiseModel noise;
    SpectralField u0;
    TrajectoryRecord u0_traj; // base flow, fields at every step
    IntegratorConfig cfg;

    explicit ExperimentContext(const ExperimentConfig& c)
        : grid(c.grid()),
          noise(NoiseModel::make(grid, c.noise)),
          u0(initial_field(c)),
          u0_traj(deterministic_feed(u0, c.integrator())),
          cfg(c.integrator()) {}
};

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

inline std::vector<std::uint64_t> seed_table(std::uint64_t master, int count) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) s[std::size_t(i)] = derive_seed(master, std::uint64_t(i));
    return s;
}

} // namespace detail

// --- CLT rate ----------------------------------------------------------------

// Coupled estimate of E[sup_t ||u_eps - u0||_H^2] (and the composite with
// the integral of the horizontal-gradient norm) across the eps ladder,
// with one Wiener path per sample shared by every eps level.
inline ExperimentReport run_clt_rate(const ExperimentConfig& c) {
    c.validate();
    detail::Timer timer;
    detail::ExperimentContext ctx(c);
    const int E = int(c.eps_ladder.size());
    const int steps = ctx.cfg.steps();

    struct Sample {
        std::vector<double> sup_sq, int_h10;
        std::vector<std::string> diags;
    };
    const auto samples = parallel_samples<Sample>(c.samples, c.threads, [&](int i) {
        Sample s;
        s.sup_sq.assign(std::size_t(E), std::numeric_limits<double>::quiet_NaN());
        s.int_h10.assign(std::size_t(E), std::numeric_limits<double>::quiet_NaN());
        const WienerPath path(derive_seed(c.master_seed, std::uint64_t(i)), ctx.cfg.dt, steps,
                              ctx.noise.J());
        for (int e = 0; e < E; ++e) {
            const double eps = c.eps_ladder[std::size_t(e)];
            try {
                const TrajectoryRecord v =
                    integrate_scaled(ctx.u0, eps, ScaleKind::clt, std::nullopt, ctx.noise, path,
                                     ctx.cfg, ScaledRoute::difference, &ctx.u0_traj);
                s.sup_sq[std::size_t(e)] = eps * sup_of(v, &StepNorms::h2);
                s.int_h10[std::size_t(e)] = eps * integral_of(v, &StepNorms::h10);
            } catch (const BlowUpError& ex) {
                s.diags.push_back("sample " + std::to_string(i) + " eps " +
                                  std::to_string(eps) + ": " + ex.what());
            }
        }
        return s;
    });

    ExperimentReport rep;
    rep.kind = "clt-rate";
    rep.config_hash = config_hash(c);
    rep.master_seed = c.master_seed;
    rep.samples = c.samples;
    rep.sample_seeds = detail::seed_table(c.master_seed, c.samples);

    std::vector<double> eps_col, sup_col, full_col;
    for (int e = 0; e < E; ++e) {
        std::vector<double> sup, full;
        int failed = 0;
        for (const auto& s : samples) {
            const double a = s.sup_sq[std::size_t(e)], b = s.int_h10[std::size_t(e)];
            if (std::isfinite(a) && std::isfinite(b)) {
                sup.push_back(a);
                full.push_back(a + b);
            } else {
                ++failed;
            }
        }
        const MeanSE ms = mean_se(sup), mf = mean_se(full);
        EpsRow row;
        row.eps = c.eps_ladder[std::size_t(e)];
        row.ok = ms.n;
        row.failed = failed;
        row.stats["sup_sq_mean"] = ms.mean;
        row.stats["sup_sq_se"] = ms.se;
        row.stats["full_mean"] = mf.mean;
        row.stats["full_se"] = mf.se;
        rep.rows.push_back(row);
        if (failed > 0)
            rep.notes.push_back("eps " + std::to_string(row.eps) + ": " +
                                std::to_string(failed) + " sample(s) hit the blow-up guard");
        eps_col.push_back(row.eps);
        sup_col.push_back(ms.mean);
        full_col.push_back(mf.mean);
    }
    for (const auto& s : samples)
        for (const auto& d : s.diags) rep.notes.push_back(d);
    rep.fits["sup_sq_vs_eps"] = fit_loglog(eps_col, sup_col);
    rep.fits["full_vs_eps"] = fit_loglog(eps_col, full_col);
    if (rep.fits["sup_sq_vs_eps"].degenerate)
        rep.notes.push_back("slope degenerate: statistic vanishes (zero noise?)");
    rep.runtime_seconds = timer.seconds();
    return rep;
}

// --- CLT limit ----------------------------------------------------------------

// Coupled gap between the scaled deviation V_eps = (u_eps - u0)/sqrt(eps)
// and the CLT limit V0 driven by the same Wiener path:
// E[sup_t ||V_eps - V0||_H^2 + int ||V_eps - V0||_{H^{1,0}}^2 dt].
inline ExperimentReport run_clt_limit(const ExperimentConfig& c) {
    c.validate();
    detail::Timer timer;
    detail::ExperimentContext ctx(c);
    const int E = int(c.eps_ladder.size());
    const int steps = ctx.cfg.steps();

    IntegratorConfig dense = ctx.cfg;
    dense.record_fields = true;
    dense.record_every = 1;

    struct Sample {
        std::vector<double> sup, gap;
        std::vector<std::string> diags;
    };
    const auto samples = parallel_samples<Sample>(c.samples, c.threads, [&](int i) {
        Sample s;
        s.sup.assign(std::size_t(E), std::numeric_limits<double>::quiet_NaN());
        s.gap.assign(std::size_t(E), std::numeric_limits<double>::quiet_NaN());
        const WienerPath path(derive_seed(c.master_seed, std::uint64_t(i)), ctx.cfg.dt, steps,
                              ctx.noise.J());
        const TrajectoryRecord v0 = integrate_clt_limit(ctx.u0_traj, ctx.noise, path, dense);
        for (int e = 0; e < E; ++e) {
            const double eps = c.eps_ladder[std::size_t(e)];
            try {
                const TrajectoryRecord ve =
                    integrate_scaled(ctx.u0, eps, ScaleKind::clt, std::nullopt, ctx.noise, path,
                                     dense, ScaledRoute::difference, &ctx.u0_traj);
                double sup_sq = 0.0, int_h10 = 0.0;
                for (int n = 0; n <= steps; ++n) {
                    SpectralField d = ve.fields[std::size_t(n)];
                    d -= v0.fields[std::size_t(n)];
                    sup_sq = std::max(sup_sq, aniso_norm_sq(d, 0.0, 0.0));
                    const double w = (n == 0 || n == steps) ? 0.5 : 1.0;
                    int_h10 += w * ctx.cfg.dt * aniso_norm_sq(d, 1.0, 0.0);
                }
                s.sup[std::size_t(e)] = sup_sq;
                s.gap[std::size_t(e)] = sup_sq + int_h10;
            } catch (const BlowUpError& ex) {
                s.diags.push_back("sample " + std::to_string(i) + " eps " +
                                  std::to_string(eps) + ": " + ex.what());
            }
        }
        return s;
    });

    ExperimentReport rep;
    rep.kind = "clt-limit";
    rep.config_hash = config_hash(c);
    rep.master_seed = c.master_seed;
    rep.samples = c.samples;
    rep.sample_seeds = detail::seed_table(c.master_seed, c.samples);

    std::vector<double> sqrt_eps_col, sup_col, gap_col;
    for (int e = 0; e < E; ++e) {
        std::vector<double> sup, gap;
        int failed = 0;
        for (const auto& s : samples) {
            const double a = s.sup[std::size_t(e)], v = s.gap[std::size_t(e)];
            if (std::isfinite(v)) {
                sup.push_back(a);
                gap.push_back(v);
            } else {
                ++failed;
            }
        }
        const MeanSE ms = mean_se(sup), m = mean_se(gap);
        EpsRow row;
        row.eps = c.eps_ladder[std::size_t(e)];
        row.ok = m.n;
        row.failed = failed;
        row.stats["sup_mean"] = ms.mean;
        row.stats["sup_se"] = ms.se;
        row.stats["gap_mean"] = m.mean;
        row.stats["gap_se"] = m.se;
        rep.rows.push_back(row);
        sqrt_eps_col.push_back(std::sqrt(row.eps));
        sup_col.push_back(ms.mean);
        gap_col.push_back(m.mean);
    }
    for (const auto& s : samples)
        for (const auto& d : s.diags) rep.notes.push_back(d);

    bool monotone = true;
    for (std::size_t e = 1; e < sup_col.size(); ++e)
        if (!(sup_col[e] < sup_col[e - 1])) monotone = false;
    rep.extra["monotone_decreasing"] = monotone;
    if (!sup_col.empty() && sup_col.back() > 0.0)
        rep.extra["first_over_last"] = sup_col.front() / sup_col.back();
    rep.fits["sup_vs_sqrt_eps"] = fit_loglog(sqrt_eps_col, sup_col);
    rep.fits["gap_vs_sqrt_eps"] = fit_loglog(sqrt_eps_col, gap_col);
    rep.runtime_seconds = timer.seconds();
    return rep;
}

// --- MDP tail probe -------------------------------------------------------------

// Estimates P(sup_t ||u_eps - u0||_H >= delta sqrt(eps) lambda(eps)) per
// (eps, delta) cell and reports -lambda^{-2} log p alongside a Chebyshev
// cross-check from the same samples. Exploratory: naive MC cannot resolve
// genuinely rare cells; zero-hit cells carry a +inf sentinel (JSON null
// with zero_hits flag), never log(0).
inline ExperimentReport run_mdp_tail(const ExperimentConfig& c) {
    c.validate();
    detail::Timer timer;
    detail::ExperimentContext ctx(c);
    const int E = int(c.eps_ladder.size());
    const int steps = ctx.cfg.steps();

    struct Sample {
        std::vector<double> sup_sq_z; // sup_t ||Z_eps||_H^2 per eps
        std::vector<std::string> diags;
    };
    const auto samples = parallel_samples<Sample>(c.samples, c.threads, [&](int i) {
        Sample s;
        s.sup_sq_z.assign(std::size_t(E), std::numeric_limits<double>::quiet_NaN());
        const WienerPath path(derive_seed(c.master_seed, std::uint64_t(i)), ctx.cfg.dt, steps,
                              ctx.noise.J());
        for (int e = 0; e < E; ++e) {
            const double eps = c.eps_ladder[std::size_t(e)];
            const DeviationScale scale(eps, c.scale_exponent);
            try {
                const TrajectoryRecord z =
                    integrate_scaled(ctx.u0, eps, ScaleKind::mdp, scale, ctx.noise, path,
                                     ctx.cfg, ScaledRoute::difference, &ctx.u0_traj);
                s.sup_sq_z[std::size_t(e)] = sup_of(z, &StepNorms::h2);
            } catch (const BlowUpError& ex) {
                s.diags.push_back("sample " + std::to_string(i) + " eps " +
                                  std::to_string(eps) + ": " + ex.what());
            }
        }
        return s;
    });

    ExperimentReport rep;
    rep.kind = "mdp-tail";
    rep.config_hash = config_hash(c);
    rep.master_seed = c.master_seed;
    rep.samples = c.samples;
    rep.sample_seeds = detail::seed_table(c.master_seed, c.samples);
    rep.extra["cells"] = json::array();

    for (int e = 0; e < E; ++e) {
        const double eps = c.eps_ladder[std::size_t(e)];
        const DeviationScale scale(eps, c.scale_exponent);
        const double lambda = scale.lambda();
        std::vector<double> sup_sq;
        int failed = 0;
        for (const auto& s : samples) {
            const double v = s.sup_sq_z[std::size_t(e)];
            if (std::isfinite(v))
                sup_sq.push_back(v);
            else
                ++failed;
        }
        const MeanSE m = mean_se(sup_sq);
        EpsRow row;
        row.eps = eps;
        row.ok = m.n;
        row.failed = failed;
        row.stats["sup_sq_z_mean"] = m.mean;
        row.stats["sup_sq_z_se"] = m.se;
        rep.rows.push_back(row);

        for (double delta : c.mdp_deltas) {
            int hits = 0;
            for (double v : sup_sq)
                if (std::sqrt(v) >= delta) ++hits;
            const int n = int(sup_sq.size());
            const double p = n > 0 ? double(hits) / n : 0.0;
            const double p_se = n > 0 ? std::sqrt(std::max(p * (1.0 - p), 0.0) / n) : 0.0;
            json cell;
            cell["eps"] = eps;
            cell["lambda"] = lambda;
            cell["delta"] = delta;
            cell["hits"] = hits;
            cell["p_hat"] = p;
            cell["p_se"] = p_se;
            cell["zero_hits"] = (hits == 0);
            // -lambda^{-2} log p; +inf sentinel (null) on zero hits
            cell["transformed"] =
                hits == 0 ? json() : json(-std::log(p) / (lambda * lambda));
            const double cheb =
                delta > 0.0 ? std::min(1.0, m.mean / (delta * delta)) : 1.0;
            cell["chebyshev_bound"] = cheb;
            cell["within_chebyshev"] = (p <= cheb + 3.0 * p_se);
            rep.extra["cells"].push_back(cell);
        }
    }
    for (const auto& s : samples)
        for (const auto& d : s.diags) rep.notes.push_back(d);

    // Optional feasible-control bound on the closed-set infimum: scale
    // random unit-cost controls until their skeleton trajectory reaches the
    // delta sphere; min over probes upper-bounds inf I on the set.
    if (c.mdp_rate_bound) {
        SkeletonProblem prob{ctx.u0_traj, ctx.noise, ctx.cfg, 0.0};
        json bounds = json::object();
        std::vector<double> probe_sup;
        for (int k = 0; k < c.mdp_rate_probes; ++k) {
            std::mt19937_64 rng(derive_seed(c.master_seed ^ 0x9E3779B97F4A7C15ULL,
                                            std::uint64_t(k)));
            std::normal_distribution<double> gauss(0.0, 1.0);
            ControlPath phi(ctx.noise.J(), ctx.cfg.dt, ctx.cfg.T);
            for (double& v : phi.values) v = gauss(rng);
            const double cost = control_cost(phi);
            if (!(cost > 0.0)) continue;
            const double unit = 1.0 / std::sqrt(cost);
            for (double& v : phi.values) v *= unit; // cost(phi) = 1
            const TrajectoryRecord x = skeleton_forward(prob, phi);
            probe_sup.push_back(std::sqrt(sup_of(x, &StepNorms::h2)));
        }
        for (double delta : c.mdp_deltas) {
            double best = std::numeric_limits<double>::infinity();
            for (double s : probe_sup)
                if (s > 0.0) best = std::min(best, (delta / s) * (delta / s));
            bounds[std::to_string(delta)] =
                std::isfinite(best) ? json(best) : json();
        }
        rep.extra["rate_upper_bounds"] = bounds;
        rep.notes.push_back(
            "rate_upper_bounds: feasible-control upper bounds on the closed-set infimum");
    }
    rep.runtime_seconds = timer.seconds();
    return rep;
}

// --- invariant and moment battery -----------------------------------------------

struct PropertyResult {
    std::string name;
    double value = 0.0;     // worst observed defect or monitored quantity
    double threshold = 0.0; // pass when value <= threshold
    bool pass = false;
    int instances = 0;
};

// Structural identities on random masked fields. These hold to rounding by
// construction; the battery exists to catch regressions in the operators.
inline std::vector<PropertyResult> identity_battery(const Grid& g, int instances,
                                                    std::uint64_t seed) {
    TransformWorkspace ws(g);
    auto rel = [](double err, double scale) { return err / std::max(scale, 1e-300); };
    PropertyResult idem{"leray_idempotent", 0, 1e-10, false, instances};
    PropertyResult orth{"leray_orthogonal", 0, 1e-10, false, instances};
    PropertyResult divfree{"leray_divergence", 0, 1e-10, false, instances};
    PropertyResult cancel{"trilinear_cancellation", 0, 1e-10, false, instances};
    PropertyResult antisym{"trilinear_antisymmetry", 0, 1e-10, false, instances};
    PropertyResult reality{"reality_preserved", 0, 1e-12, false, instances};
    PropertyResult skel_lin{"skeleton_linearity", 0, 1e-10, false, instances};
    PropertyResult cost_sc{"cost_scaling", 0, 0.0, false, instances};

    for (int i = 0; i < instances; ++i) {
        const std::uint64_t s = derive_seed(seed, std::uint64_t(i));
        SpectralField raw = random_unprojected_field(g, s);
        SpectralField u = random_field(g, s ^ 1);
        SpectralField v = random_field(g, s ^ 2);
        SpectralField w = random_field(g, s ^ 3);

        SpectralField p = project_leray(raw);
        SpectralField pp = project_leray(p);
        pp -= p;
        idem.value = std::max(idem.value, rel(pp.max_abs(), p.max_abs()));
        divfree.value = std::max(divfree.value, rel(p.max_divergence(), norm_h(p)));
        SpectralField residual = raw;
        residual -= p;
        orth.value = std::max(
            orth.value, rel(std::abs(inner_product(residual, p)), norm_h(raw) * norm_h(p)));

        const double buvv = inner_product(nonlinear_term(u, v, ws), v);
        const double scale_uvv = aniso_norm(u, 1, 0) * aniso_norm(v, 1, 1) * norm_h(v);
        cancel.value = std::max(cancel.value, rel(std::abs(buvv), scale_uvv));
        const double buvw = inner_product(nonlinear_term(u, v, ws), w);
        const double buwv = inner_product(nonlinear_term(u, w, ws), v);
        antisym.value = std::max(antisym.value,
                                 rel(std::abs(buvw + buwv), std::abs(buvw) + std::abs(buwv)));
        reality.value = std::max(reality.value, nonlinear_term(u, v, ws).reality_defect());
    }

    // Skeleton linearity and cost scaling on a small frozen problem.
    {
        Grid sg{8, 8, 1.0};
        NoiseSpec nspec;
        nspec.J = 4;
        NoiseModel nm = NoiseModel::make(sg, nspec);
        IntegratorConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 0.1;
        SpectralField u0(sg);
        u0.set_mode(0, 0, 1, cplx(0.0, -0.5));
        TrajectoryRecord feed = deterministic_feed(u0, cfg);
        const int inst = std::max(1, instances / 10);
        skel_lin.instances = cost_sc.instances = inst;
        for (int i = 0; i < inst; ++i) {
            std::mt19937_64 rng(derive_seed(seed ^ 0xABCDEF, std::uint64_t(i)));
            std::normal_distribution<double> gauss(0.0, 1.0);
            ControlPath a(4, cfg.dt, cfg.T), b(4, cfg.dt, cfg.T), apb(4, cfg.dt, cfg.T);
            for (std::size_t k = 0; k < a.values.size(); ++k) {
                a.values[k] = gauss(rng);
                b.values[k] = gauss(rng);
                apb.values[k] = a.values[k] + b.values[k];
            }
            SkeletonProblem prob{feed, nm, cfg, 0.0};
            const auto xa = skeleton_forward(prob, a);
            const auto xb = skeleton_forward(prob, b);
            const auto xab = skeleton_forward(prob, apb);
            SpectralField lin = xa.fields.back();
            lin += xb.fields.back();
            lin -= xab.fields.back();
            skel_lin.value = std::max(
                skel_lin.value, rel(lin.max_abs(), xab.fields.back().max_abs() + 1e-30));

            // power-of-two factor: scaling and summation commute exactly in
            // floating point, so the quadratic law holds at zero tolerance
            const double cc = control_cost(a);
            const ControlPath scaled = [&] {
                ControlPath t = a;
                for (double& x : t.values) x *= 4.0;
                return t;
            }();
            cost_sc.value =
                std::max(cost_sc.value, std::abs(control_cost(scaled) - 16.0 * cc));
        }
    }

    std::vector<PropertyResult> out{idem,    orth,    divfree, cancel,
                                    antisym, reality, skel_lin, cost_sc};
    for (auto& r : out) r.pass = (r.value <= r.threshold);
    return out;
}

// Full battery: structural identities, energy balance order, and the
// moment families (primal horizontal/vertical, scaled-difference quartic,
// controlled weighted) monitored for boundedness across the eps ladder.
inline ExperimentReport run_invariant_suite(const ExperimentConfig& c) {
    c.validate();
    detail::Timer timer;
    detail::ExperimentContext ctx(c);
    const int E = int(c.eps_ladder.size());
    const int steps = ctx.cfg.steps();

    ExperimentReport rep;
    rep.kind = "invariants";
    rep.config_hash = config_hash(c);
    rep.master_seed = c.master_seed;
    rep.samples = c.samples;
    rep.sample_seeds = detail::seed_table(c.master_seed, c.samples);

    bool all_pass = true;
    rep.extra["identities"] = json::array();
    for (const auto& r :
         identity_battery(ctx.grid, c.identity_instances, c.master_seed ^ 0x1D)) {
        json jr;
        jr["name"] = r.name;
        jr["max_defect"] = r.value;
        jr["threshold"] = r.threshold;
        jr["pass"] = r.pass;
        jr["instances"] = r.instances;
        rep.extra["identities"].push_back(jr);
        all_pass = all_pass && r.pass;
    }

    // Energy balance: residual of the discrete dissipation identity is
    // O(dt), checked by halving dt.
    {
        SpectralField u = random_field(ctx.grid, c.master_seed ^ 0x2E, 2.0, 0.5);
        IntegratorConfig e1 = ctx.cfg;
        e1.record_fields = false;
        IntegratorConfig e2 = e1;
        e2.dt = e1.dt / 2.0;
        const double r1 = energy_report(integrate_deterministic(u, e1)).max_residual;
        const double r2 = energy_report(integrate_deterministic(u, e2)).max_residual;
        const bool pass = r2 <= 0.75 * r1 || r1 < 1e-12;
        json je;
        je["residual_dt"] = r1;
        je["residual_half_dt"] = r2;
        je["pass"] = pass;
        rep.extra["energy_balance"] = je;
        all_pass = all_pass && pass;
    }

    // Moment families per eps. Each is the composite quantity its energy
    // estimate actually bounds (sup plus the matching dissipation integral);
    // the pieces are not monitored separately because a component the base
    // flow does not excite scales like eps alone and the max/min criterion
    // would then measure the ladder span instead of boundedness.
    enum Family {
        f_energy_h,
        f_energy_v1,
        f_energy_v2,
        f_quartic,
        f_weighted,
        FAMILIES
    };
    static const char* family_names[FAMILIES] = {
        "primal_h_energy", "primal_v1_energy", "primal_v2_energy", "scaled_quartic_mixed",
        "controlled_weighted_energy"};

    struct Sample {
        std::vector<double> vals; // FAMILIES x E
        std::vector<std::string> diags;
    };
    const auto samples = parallel_samples<Sample>(c.samples, c.threads, [&](int i) {
        Sample s;
        s.vals.assign(std::size_t(FAMILIES) * E, std::numeric_limits<double>::quiet_NaN());
        const std::uint64_t si = derive_seed(c.master_seed, std::uint64_t(i));
        const WienerPath path(si, ctx.cfg.dt, steps, ctx.noise.J());

        // One control per sample from the boundary of S_N, constant in time:
        // a coherent direction draws an O(1) response from the controlled
        // equation, whereas a white-in-time draw only contributes O(dt)
        // energy and the family would track the vanishing noise term.
        std::mt19937_64 rng(si ^ 0x51);
        std::normal_distribution<double> gauss(0.0, 1.0);
        ControlPath v(ctx.noise.J(), ctx.cfg.dt, ctx.cfg.T);
        const int J = ctx.noise.J();
        std::vector<double> dir(std::size_t(J), 0.0);
        for (double& x : dir) x = gauss(rng);
        for (int n = 0; n < steps; ++n)
            for (int j = 0; j < J; ++j) v.values[std::size_t(n) * J + j] = dir[std::size_t(j)];
        const double mem = control_membership(v);
        if (mem > 0.0)
            for (double& x : v.values) x *= std::sqrt(c.level_set_radius / mem);

        for (int e = 0; e < E; ++e) {
            const double eps = c.eps_ladder[std::size_t(e)];
            const DeviationScale scale(eps, c.scale_exponent);
            auto put = [&](Family f, double x) { s.vals[std::size_t(f) * E + e] = x; };
            try {
                const TrajectoryRecord u = integrate_primal(ctx.u0, eps, ctx.noise, path, ctx.cfg);
                put(f_energy_h,
                    sup_of(u, &StepNorms::h2) + integral_of(u, &StepNorms::d1h2));
                put(f_energy_v1,
                    sup_of(u, &StepNorms::h01) + integral_of(u, &StepNorms::h11));
                put(f_energy_v2,
                    sup_of(u, &StepNorms::h02) + integral_of(u, &StepNorms::h12));
                const TrajectoryRecord vz =
                    integrate_scaled(ctx.u0, eps, ScaleKind::clt, std::nullopt, ctx.noise, path,
                                     ctx.cfg, ScaledRoute::difference, &ctx.u0_traj);
                put(f_quartic, integral_h2_h10(vz));
                const TrajectoryRecord xc =
                    integrate_controlled(v, scale, ctx.u0_traj, ctx.noise, path, ctx.cfg);
                put(f_weighted, weighted_sup_h01(xc, c.weight_k) +
                                    weighted_integral_h11(xc, c.weight_k));
            } catch (const BlowUpError& ex) {
                s.diags.push_back("sample " + std::to_string(i) + " eps " +
                                  std::to_string(eps) + ": " + ex.what());
            }
        }
        return s;
    });

    rep.extra["moment_families"] = json::object();
    for (int f = 0; f < FAMILIES; ++f) {
        std::vector<double> means;
        for (int e = 0; e < E; ++e) {
            std::vector<double> xs;
            int failed = 0;
            for (const auto& s : samples) {
                const double x = s.vals[std::size_t(f) * E + e];
                if (std::isfinite(x))
                    xs.push_back(x);
                else
                    ++failed;
            }
            const MeanSE m = mean_se(xs);
            means.push_back(m.mean);
            if (f == 0) {
                EpsRow row;
                row.eps = c.eps_ladder[std::size_t(e)];
                row.ok = m.n;
                row.failed = failed;
                rep.rows.push_back(row);
            }
            rep.rows[std::size_t(e)].stats[family_names[f]] = m.mean;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        bool finite = true;
        for (double m : means) {
            if (!std::isfinite(m)) finite = false;
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        const double ratio = (lo > 0.0) ? hi / lo : (hi == 0.0 ? 1.0 : INFINITY);
        const bool pass = finite && ratio < 10.0;
        json jf;
        jf["means"] = means;
        jf["max_over_min"] = std::isfinite(ratio) ? json(ratio) : json();
        jf["pass"] = pass;
        rep.extra["moment_families"][family_names[f]] = jf;
        all_pass = all_pass && pass;
    }
    for (const auto& s : samples)
        for (const auto& d : s.diags) rep.notes.push_back(d);
    rep.extra["all_pass"] = all_pass;
    rep.runtime_seconds = timer.seconds();
    return rep;
}

// RateResult JSON, minimizer path included so the certificate is fully
// reproducible. An infeasible value serializes as null with feasible=false.
inline json rate_result_to_json(const RateResult& r) {
    json j;
    j["value"] = r.feasible ? json(r.value) : json();
    j["feasible"] = r.feasible;
    j["target_residual"] = r.target_residual;
    j["misfit"] = r.misfit;
    j["iterations"] = r.iterations;
    j["stages"] = r.stages;
    j["final_penalty"] = r.final_penalty;
    j["minimizer"] = {{"J", r.minimizer.J},
                      {"dt", r.minimizer.dt},
                      {"T", r.minimizer.T},
                      {"values", r.minimizer.values}};
    return j;
}

// --- single-trajectory simulation (CLI `simulate`) -------------------------------

inline ExperimentReport run_simulate(const ExperimentConfig& c, const std::string& out_dir) {
    c.validate();
    detail::Timer timer;
    const Grid g = c.grid();
    const NoiseModel noise = NoiseModel::make(g, c.noise);
    const SpectralField u0 = initial_field(c);
    IntegratorConfig cfg = c.integrator();
    cfg.record_fields = c.write_fields;

    TrajectoryRecord traj;
    if (c.sim_eps > 0.0) {
        const WienerPath path(c.master_seed, cfg.dt, cfg.steps(), noise.J());
        traj = integrate_primal(u0, c.sim_eps, noise, path, cfg);
    } else {
        traj = integrate_deterministic(u0, cfg);
    }
    const EnergyReport er = energy_report(traj, c.weight_k);

    ExperimentReport rep;
    rep.kind = "simulate";
    rep.config_hash = config_hash(c);
    rep.master_seed = c.master_seed;
    rep.samples = 1;
    EpsRow row;
    row.eps = c.sim_eps;
    row.ok = 1;
    row.stats["final_h2"] = traj.norms.back().h2;
    row.stats["sup_h2"] = sup_of(traj, &StepNorms::h2);
    row.stats["int_d1h2"] = integral_of(traj, &StepNorms::d1h2);
    row.stats["energy_residual"] = er.max_residual;
    rep.rows.push_back(row);
    rep.extra["steps"] = traj.steps;

    if (c.write_fields) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(out_dir) / "fields");
        for (std::size_t k = 0; k < traj.fields.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof name, "step_%06d.bin",
                          int(std::lround(traj.field_times[k] / traj.dt)));
            save_field_binary(traj.fields[k], (fs::path(out_dir) / "fields" / name).string());
        }
        rep.notes.push_back("fields: " + std::to_string(traj.fields.size()) + " snapshots");
    }

    // per-step norm table replaces the eps ladder table in summary.csv
    std::string csv = "t,h2,d1h2,h10,h01,h11,h02,h12\n";
    char buf[256];
    for (std::size_t n = 0; n < traj.norms.size(); ++n) {
        const StepNorms& s = traj.norms[n];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      traj.times[n], s.h2, s.d1h2, s.h10, s.h01, s.h11, s.h02, s.h12);
        csv += buf;
    }
    rep.csv_override = csv;
    rep.runtime_seconds = timer.seconds();
    return rep;
}

} // namespace aniso
