#include <catch2/catch_amalgamated.hpp>

#include <anisoflow/cli.hpp>
#include <anisoflow/experiments.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace aniso;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

// Small, fast configuration shared by the experiment-driver tests.
ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.n_h = 8;
    c.n_v = 8;
    c.dt = 0.01;
    c.T = 0.05;
    c.noise.J = 4;
    c.eps_ladder = {1e-1, 1e-2};
    c.samples = 4;
    c.threads = 1;
    c.identity_instances = 10;
    c.initial_kind = "shear";
    return c;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() /
               ("anisoflow_test_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// cli_main prints summary tables; keep them out of the test log.
int run_cli(std::initializer_list<const char*> args) {
    std::vector<const char*> argv(args);
    std::ostringstream sink;
    auto* old_out = std::cout.rdbuf(sink.rdbuf());
    auto* old_err = std::cerr.rdbuf(sink.rdbuf());
    const int rc = cli_main(int(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return rc;
}

} // namespace

TEST_CASE("config json round trip is lossless", "[experiments]") {
    SECTION("defaults") {
        const ExperimentConfig c;
        const ExperimentConfig back = config_from_json(config_to_json(c));
        CHECK(config_to_json(back).dump() == config_to_json(c).dump());
    }

    SECTION("every field set away from its default") {
        ExperimentConfig c;
        c.n_h = 8;
        c.n_v = 4;
        c.dealias_fraction = 0.5;
        c.dt = 0.005;
        c.T = 0.05;
        c.record_every = 2;
        c.eps2 = 0.01;
        c.sim_eps = 0.3;
        c.noise.kind = NoiseKind::diagonal_multiplicative;
        c.noise.J = 3;
        c.noise.decay = DecayKind::power;
        c.noise.rate = 1.5;
        c.noise.coupling = 0.4;
        c.eps_ladder = {0.5, 0.05};
        c.scale_exponent = 0.3;
        c.samples = 5;
        c.master_seed = 999;
        c.threads = 2;
        c.output_dir = "custom_out";
        c.write_fields = true;
        c.initial_kind = "random";
        c.initial_amplitude = 0.7;
        c.initial_seed = 3;
        c.initial_decay = 1.8;
        c.mdp_deltas = {0.1, 0.4};
        c.mdp_rate_bound = true;
        c.mdp_rate_probes = 3;
        c.weight_k = 2.5;
        c.identity_instances = 7;
        c.level_set_radius = 0.5;
        c.rate_tolerance = 1e-5;
        c.rate_max_stages = 9;

        const ExperimentConfig back = config_from_json(config_to_json(c));
        CHECK(config_to_json(back).dump() == config_to_json(c).dump());
        CHECK(back.noise.kind == NoiseKind::diagonal_multiplicative);
        CHECK(back.noise.decay == DecayKind::power);
        CHECK(back.master_seed == 999);
    }
}

TEST_CASE("config json rejects unknown keys with their location", "[experiments]") {
    CHECK_THROWS_WITH(config_from_json(json{{"grids", json::object()}}),
                      ContainsSubstring("unknown key \"grids\""));
    CHECK_THROWS_WITH(config_from_json(json{{"mc", {{"samples", 4}, {"seedd", 1}}}}),
                      ContainsSubstring("in section mc"));
    CHECK_THROWS_WITH(config_from_json(json{{"noise", {{"amplitude", 1.0}}}}),
                      ContainsSubstring("in section noise"));
}

TEST_CASE("config validation rejects bad ladders and ranges", "[experiments]") {
    auto with = [](const char* mutation) {
        json j = config_to_json(ExperimentConfig{});
        j.merge_patch(json::parse(mutation));
        return j;
    };
    // ladder must be strictly decreasing and positive
    CHECK_THROWS_WITH(config_from_json(with(R"({"ladder":{"eps":[1e-3,1e-2]}})")),
                      ContainsSubstring("strictly decreasing"));
    CHECK_THROWS_WITH(config_from_json(with(R"({"ladder":{"eps":[]}})")),
                      ContainsSubstring("nonempty"));
    CHECK_THROWS_AS(config_from_json(with(R"({"ladder":{"eps":[0.1,0.0]}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"ladder":{"a":0.5}})")), std::invalid_argument);
    // Monte Carlo and integrator ranges
    CHECK_THROWS_AS(config_from_json(with(R"({"mc":{"samples":1}})")), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"mc":{"threads":-1}})")), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"integrator":{"dt":-1.0}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"integrator":{"dt":0.01,"T":0.055}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"integrator":{"record_every":0}})")),
                    std::invalid_argument);
    // enums and the rest
    CHECK_THROWS_AS(config_from_json(with(R"({"initial":{"kind":"vortex"}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"noise":{"kind":"white"}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"noise":{"decay":"linear"}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(with(R"({"mdp":{"deltas":[-0.5]}})")),
                    std::invalid_argument);
}

TEST_CASE("load_config distinguishes missing files from bad JSON", "[experiments]") {
    TempDir tmp("load_config");
    CHECK_THROWS_WITH(load_config((tmp.path / "nope.json").string()),
                      ContainsSubstring("cannot open"));
    const fs::path bad = tmp.path / "bad.json";
    std::ofstream(bad) << "{ this is not json";
    CHECK_THROWS_WITH(load_config(bad.string()), ContainsSubstring("not valid JSON"));
}

TEST_CASE("config hash tracks statistics and ignores execution details", "[experiments]") {
    const ExperimentConfig base;
    const std::string h = config_hash(base);
    CHECK(h.size() == 16);

    ExperimentConfig c = base;
    c.threads = 7;
    CHECK(config_hash(c) == h);
    c = base;
    c.output_dir = "elsewhere";
    c.write_fields = true;
    CHECK(config_hash(c) == h);

    c = base;
    c.dt = 2e-3;
    CHECK(config_hash(c) != h);
    c = base;
    c.master_seed += 1;
    CHECK(config_hash(c) != h);
    c = base;
    c.samples += 1;
    CHECK(config_hash(c) != h);
}

TEST_CASE("initial field kinds", "[experiments]") {
    ExperimentConfig c = tiny_config();

    c.initial_kind = "zero";
    CHECK(norm_h_sq(initial_field(c)) == 0.0);

    c.initial_kind = "shear";
    c.initial_amplitude = 2.0;
    const SpectralField shear = initial_field(c);
    CHECK(norm_h_sq(shear) == Approx(2.0).epsilon(1e-13)); // amp^2 / 2
    CHECK(shear.max_divergence() == 0.0);

    c.initial_kind = "random";
    c.initial_seed = 31;
    c.initial_decay = 1.5;
    c.initial_amplitude = 0.8;
    const SpectralField r = initial_field(c);
    const SpectralField expected = random_field(c.grid(), 31, 1.5, 0.8);
    SpectralField d = r;
    d -= expected;
    CHECK(d.max_abs() == 0.0);
}

TEST_CASE("mean and standard error", "[experiments]") {
    SECTION("hand-computed values") {
        const MeanSE m = mean_se({1.0, 2.0, 3.0});
        CHECK(m.n == 3);
        CHECK(m.mean == Approx(2.0).epsilon(1e-15));
        CHECK(m.se == Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-13));
    }
    SECTION("non-finite samples are dropped, not propagated") {
        const MeanSE m = mean_se({1.0, std::nan(""), 3.0, INFINITY});
        CHECK(m.n == 2);
        CHECK(m.mean == Approx(2.0));
        CHECK(m.se == Approx(1.0));
        const MeanSE empty = mean_se({});
        CHECK(empty.n == 0);
        CHECK(empty.mean == 0.0);
    }
    SECTION("standard error shrinks like the square root of the count") {
        std::vector<double> xs;
        std::mt19937_64 rng(5);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < 50; ++i) xs.push_back(gauss(rng));
        std::vector<double> xs4;
        for (int r = 0; r < 4; ++r) xs4.insert(xs4.end(), xs.begin(), xs.end());
        const MeanSE m1 = mean_se(xs), m4 = mean_se(xs4);
        CHECK(m4.mean == Approx(m1.mean).epsilon(1e-12));
        // repeating the data exactly: se scales by sqrt((n-1)/(4n-1))
        CHECK(m4.se == Approx(m1.se * std::sqrt(49.0 / 199.0)).epsilon(1e-10));
    }
}

TEST_CASE("log-log slope fitting", "[experiments]") {
    SECTION("recovers an exact power law") {
        std::vector<double> x{1.0, 2.0, 4.0, 8.0}, y;
        for (double v : x) y.push_back(3.0 * std::pow(v, 1.7));
        const SlopeFit f = fit_loglog(x, y);
        CHECK_FALSE(f.degenerate);
        CHECK(f.points == 4);
        CHECK(f.slope == Approx(1.7).epsilon(1e-12));
        CHECK(f.stderr_ == Approx(0.0).margin(1e-12));
        CHECK(f.ci_lo <= 1.7);
        CHECK(f.ci_hi >= 1.7);
    }
    SECTION("degenerate inputs are flagged instead of fit") {
        CHECK(fit_loglog({1.0, 2.0}, {0.0, 1.0}).degenerate);
        CHECK(fit_loglog({1.0}, {1.0}).degenerate);
        CHECK(fit_loglog({2.0, 2.0}, {1.0, 3.0}).degenerate);
        // a NaN point is dropped but the rest still fits
        const SlopeFit f =
            fit_loglog({1.0, 2.0, 4.0}, {2.0, std::nan(""), 8.0});
        CHECK(f.degenerate);
        CHECK(f.points == 2);
        CHECK(f.slope == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("parallel sampling is deterministic and propagates errors", "[experiments]") {
    auto worker = [](int i) { return derive_seed(42, std::uint64_t(i)) ^ std::uint64_t(i); };
    const auto one = parallel_samples<std::uint64_t>(64, 1, worker);
    const auto four = parallel_samples<std::uint64_t>(64, 4, worker);
    const auto zero = parallel_samples<std::uint64_t>(64, 0, worker); // hardware count
    CHECK(one == four);
    CHECK(one == zero);

    auto thrower = [](int i) -> int {
        if (i >= 3) throw std::runtime_error("boom " + std::to_string(i));
        return i;
    };
    // the first failure by sample index wins, regardless of thread timing
    CHECK_THROWS_WITH(parallel_samples<int>(16, 4, thrower), ContainsSubstring("boom 3"));
    CHECK_THROWS_WITH(parallel_samples<int>(16, 1, thrower), ContainsSubstring("boom 3"));
}

TEST_CASE("clt rate experiment is reproducible across thread counts", "[experiments]") {
    ExperimentConfig c = tiny_config();
    const ExperimentReport r1 = run_clt_rate(c);
    c.threads = 4;
    const ExperimentReport r4 = run_clt_rate(c);
    CHECK(report_to_json(r1).dump() == report_to_json(r4).dump());

    REQUIRE(r1.sample_seeds.size() == 4);
    for (int i = 0; i < 4; ++i)
        CHECK(r1.sample_seeds[std::size_t(i)] == derive_seed(c.master_seed, std::uint64_t(i)));

    // the shear base has zero horizontal gradient, so the deviation statistic
    // scales exactly linearly in eps and the fitted slope is 1 to rounding
    REQUIRE_FALSE(r1.fits.at("sup_sq_vs_eps").degenerate);
    CHECK(r1.fits.at("sup_sq_vs_eps").slope == Approx(1.0).margin(1e-3));
    CHECK(r1.rows.size() == 2);
    CHECK(r1.rows[0].stats.at("sup_sq_mean") > r1.rows[1].stats.at("sup_sq_mean"));
}

TEST_CASE("clt limit gap shrinks toward the limit", "[experiments]") {
    ExperimentConfig c = tiny_config();
    c.initial_kind = "random"; // a generic base flow keeps the quadratic term alive
    c.eps_ladder = {1e-1, 1e-2, 1e-3, 1e-4};
    const ExperimentReport r = run_clt_limit(c);

    CHECK(r.extra.at("monotone_decreasing").get<bool>());
    CHECK(r.extra.at("first_over_last").get<double>() > 500.0);
    REQUIRE_FALSE(r.fits.at("sup_vs_sqrt_eps").degenerate);
    CHECK(r.fits.at("sup_vs_sqrt_eps").slope > 1.5);
    CHECK(r.fits.at("sup_vs_sqrt_eps").slope < 2.5);
    for (const auto& row : r.rows) {
        CHECK(row.stats.at("sup_mean") <= row.stats.at("gap_mean"));
        CHECK(row.ok == 4);
    }
}

TEST_CASE("mdp tail cells carry sentinels and bounds", "[experiments]") {
    ExperimentConfig c = tiny_config();
    c.mdp_deltas = {0.0, 0.05, 1e9};
    c.mdp_rate_bound = true;
    c.mdp_rate_probes = 4;
    const ExperimentReport r = run_mdp_tail(c);

    REQUIRE(r.extra.at("cells").size() == 6); // 2 eps x 3 deltas
    double last_eps = -1.0, last_transformed = 0.0;
    for (const auto& cell : r.extra.at("cells")) {
        const double eps = cell.at("eps").get<double>();
        const double delta = cell.at("delta").get<double>();
        const double p = cell.at("p_hat").get<double>();
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(cell.at("zero_hits").get<bool>() == (cell.at("hits").get<int>() == 0));
        CHECK(cell.at("within_chebyshev").get<bool>());
        if (delta == 0.0) {
            CHECK(p == 1.0);
            CHECK(cell.at("transformed").get<double>() == 0.0);
        }
        if (delta == 1e9) {
            CHECK(cell.at("zero_hits").get<bool>());
            CHECK(cell.at("transformed").is_null());
        }
        // tail monotonicity: the transformed statistic never decreases in
        // delta at fixed eps, with null (zero hits) ordering as +infinity
        const double t = cell.at("transformed").is_null()
                             ? std::numeric_limits<double>::infinity()
                             : cell.at("transformed").get<double>();
        if (eps == last_eps) CHECK(t >= last_transformed);
        last_eps = eps;
        last_transformed = t;
    }

    const json& bounds = r.extra.at("rate_upper_bounds");
    CHECK(bounds.at("0.000000").get<double>() == 0.0);
    CHECK(bounds.at("0.050000").get<double>() > 0.0);
    CHECK(std::isfinite(bounds.at("1000000000.000000").get<double>()));
}

TEST_CASE("invariant suite passes on a healthy build", "[experiments]") {
    const ExperimentConfig c = tiny_config();
    const ExperimentReport r = run_invariant_suite(c);

    CHECK(r.extra.at("all_pass").get<bool>());
    REQUIRE(r.extra.at("identities").size() == 8);
    for (const auto& id : r.extra.at("identities")) {
        INFO(id.at("name").get<std::string>());
        CHECK(id.at("pass").get<bool>());
        CHECK(id.at("max_defect").get<double>() <= id.at("threshold").get<double>());
    }
    CHECK(r.extra.at("energy_balance").at("pass").get<bool>());

    REQUIRE(r.extra.at("moment_families").size() == 5);
    for (auto it = r.extra.at("moment_families").begin();
         it != r.extra.at("moment_families").end(); ++it) {
        INFO(it.key());
        CHECK(it.value().at("pass").get<bool>());
        CHECK(it.value().at("max_over_min").get<double>() < 10.0);
    }
    // every family lands in the per-eps rows as a column
    for (const auto& row : r.rows) CHECK(row.stats.size() == 5);
}

TEST_CASE("report serialization round trip", "[experiments]") {
    ExperimentReport r;
    r.kind = "demo";
    r.config_hash = "feedfacefeedface";
    r.master_seed = 7;
    r.samples = 2;
    r.sample_seeds = {11, 22};
    EpsRow a;
    a.eps = 0.1;
    a.ok = 2;
    a.stats["alpha"] = 1.5;
    a.stats["beta"] = std::nan("");
    EpsRow b;
    b.eps = 0.01;
    b.ok = 1;
    b.failed = 1;
    b.stats["alpha"] = 0.25;
    r.rows = {a, b};
    r.runtime_seconds = 123.0;

    SECTION("NaN stats become nulls in JSON and empty CSV cells") {
        const json j = report_to_json(r);
        CHECK(j.at("rows")[0].at("beta").is_null());
        CHECK(j.at("rows")[1].at("alpha").get<double>() == 0.25);
        CHECK(j.dump().find("runtime") == std::string::npos);

        const std::string csv = report_csv(r);
        CHECK(csv == "eps,ok,failed,alpha,beta\n"
                     "0.10000000000000001,2,0,1.5,\n"
                     "0.01,1,1,0.25,\n");
    }

    SECTION("write_report emits the three files, timing only in the sidecar") {
        TempDir tmp("report");
        write_report(r, tmp.str());
        CHECK(fs::exists(tmp.path / "report.json"));
        CHECK(fs::exists(tmp.path / "summary.csv"));
        const std::string meta = slurp(tmp.path / "meta.txt");
        CHECK_THAT(meta, ContainsSubstring("runtime_seconds 123"));
        const json back = json::parse(slurp(tmp.path / "report.json"));
        CHECK(back.dump() == report_to_json(r).dump());
    }

    SECTION("a csv override replaces the eps table") {
        TempDir tmp("csv_override");
        r.csv_override = "t,h2\n0,1\n";
        write_report(r, tmp.str());
        CHECK(slurp(tmp.path / "summary.csv") == "t,h2\n0,1\n");
    }
}

TEST_CASE("output directory resolution order", "[experiments]") {
    ::unsetenv("ANISOFLOW_OUT_DIR");
    CHECK(resolve_output_dir("cfg_dir", "cli_dir") == "cli_dir");
    CHECK(resolve_output_dir("cfg_dir", "") == "cfg_dir");
    ::setenv("ANISOFLOW_OUT_DIR", "env_dir", 1);
    CHECK(resolve_output_dir("cfg_dir", "") == "env_dir");
    CHECK(resolve_output_dir("cfg_dir", "cli_dir") == "cli_dir");
    ::unsetenv("ANISOFLOW_OUT_DIR");
}

TEST_CASE("rate result serialization", "[experiments]") {
    RateResult r;
    r.value = 0.5;
    r.feasible = true;
    r.target_residual = 1e-8;
    r.minimizer = ControlPath(2, 0.5, 1.0);
    r.minimizer.values = {1.0, 2.0, 3.0, 4.0};
    json j = rate_result_to_json(r);
    CHECK(j.at("value").get<double>() == 0.5);
    CHECK(j.at("minimizer").at("values").get<std::vector<double>>() ==
          std::vector<double>{1.0, 2.0, 3.0, 4.0});

    r.feasible = false;
    r.value = std::numeric_limits<double>::infinity();
    j = rate_result_to_json(r);
    CHECK(j.at("value").is_null());
    CHECK_FALSE(j.at("feasible").get<bool>());
}

TEST_CASE("command line interface", "[experiments][cli]") {
    TempDir tmp("cli");
    const fs::path cfg_path = tmp.path / "config.json";
    {
        ExperimentConfig c = tiny_config();
        std::ofstream(cfg_path) << config_to_json(c).dump(2);
    }
    const std::string cfg = cfg_path.string();

    SECTION("simulate writes the report bundle and exits zero") {
        const fs::path out = tmp.path / "sim";
        CHECK(run_cli({"anisoflow", "--config", cfg.c_str(), "--out", out.c_str(),
                       "simulate"}) == 0);
        CHECK(fs::exists(out / "report.json"));
        CHECK(fs::exists(out / "meta.txt"));
        CHECK(slurp(out / "summary.csv").rfind("t,h2", 0) == 0); // per-step norm table
        const json rep = json::parse(slurp(out / "report.json"));
        CHECK(rep.at("kind").get<std::string>() == "simulate");
    }

    SECTION("flag overrides reach the report") {
        const fs::path out = tmp.path / "rate";
        CHECK(run_cli({"anisoflow", "--config", cfg.c_str(), "--out", out.c_str(), "--seed",
                       "5", "--samples", "2", "--threads", "2", "clt-rate"}) == 0);
        const json rep = json::parse(slurp(out / "report.json"));
        CHECK(rep.at("kind").get<std::string>() == "clt-rate");
        CHECK(rep.at("master_seed").get<std::uint64_t>() == 5);
        REQUIRE(rep.at("sample_seeds").size() == 2);
        CHECK(rep.at("sample_seeds")[0].get<std::uint64_t>() == derive_seed(5, 0));
    }

    SECTION("the environment variable supplies the output directory") {
        const fs::path out = tmp.path / "from_env";
        ::setenv("ANISOFLOW_OUT_DIR", out.c_str(), 1);
        CHECK(run_cli({"anisoflow", "--config", cfg.c_str(), "simulate"}) == 0);
        ::unsetenv("ANISOFLOW_OUT_DIR");
        CHECK(fs::exists(out / "report.json"));
    }

    SECTION("rate-min writes a certificate, zero target costs nothing") {
        const fs::path target = tmp.path / "target.bin";
        save_field_binary(SpectralField(Grid(8, 8, 2.0 / 3.0)), target.string());
        const fs::path out = tmp.path / "ratemin";
        CHECK(run_cli({"anisoflow", "--config", cfg.c_str(), "--out", out.c_str(), "rate-min",
                       "--target", target.c_str()}) == 0);
        const json res = json::parse(slurp(out / "rate_result.json"));
        CHECK(res.at("feasible").get<bool>());
        CHECK(res.at("value").get<double>() == 0.0);
    }

    SECTION("errors exit nonzero") {
        CHECK(run_cli({"anisoflow"}) != 0);                       // missing subcommand
        CHECK(run_cli({"anisoflow", "--config", "/nope.json", "simulate"}) != 0);
        CHECK(run_cli({"anisoflow", "rate-min"}) != 0);           // --target required
        const fs::path bad = tmp.path / "bad.json";
        std::ofstream(bad) << R"({"grid":{"n_h":8,"oops":1}})";
        CHECK(run_cli({"anisoflow", "--config", bad.string().c_str(), "simulate"}) != 0);
    }

    SECTION("version flag") {
        CHECK(run_cli({"anisoflow", "--version"}) == 0);
    }
}
