#include <catch2/catch_amalgamated.hpp>

#include <anisoflow/ratefn.hpp>
#include <anisoflow/random_fields.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace aniso;
using Catch::Approx;

namespace {

Grid small_grid() { return Grid(8, 8, 2.0 / 3.0); }

NoiseModel make_noise(const Grid& g, int J = 4) {
    NoiseSpec s;
    s.J = J;
    s.rate = 0.5;
    return NoiseModel::make(g, s);
}

IntegratorConfig short_cfg() {
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.T = 0.1;
    return cfg;
}

// Shared base flow for the inverse problems: a random divergence-free state
// evolved deterministically over the control window.
TrajectoryRecord make_feed(const Grid& g, const IntegratorConfig& cfg) {
    return deterministic_feed(random_field(g, 7, 2.0, 1.0), cfg);
}

ControlPath gaussian_control(const NoiseModel& noise, const IntegratorConfig& cfg,
                             std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ControlPath phi(noise.J(), cfg.dt, cfg.T);
    for (double& v : phi.values) v = amp * gauss(rng);
    return phi;
}

double dot(const ControlPath& a, const ControlPath& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) acc += a.values[i] * b.values[i];
    return acc;
}

}  // namespace

TEST_CASE("control cost closed forms and scaling", "[ratefn]") {
    SECTION("zero control costs nothing") {
        ControlPath phi(4, 0.01, 0.5);
        CHECK(control_cost(phi) == 0.0);
        CHECK(control_membership(phi) == 0.0);
    }

    SECTION("constant unit-norm control over [0,1] costs one half") {
        // ||phi_n||^2 = 4 * 0.25 = 1 at every step, so the quadrature is exact.
        ControlPath phi(4, 0.01, 1.0);
        for (double& v : phi.values) v = 0.5;
        CHECK(control_cost(phi) == Approx(0.5).epsilon(1e-13));
        CHECK(control_membership(phi) == Approx(1.0).epsilon(1e-13));
    }

    SECTION("cost scales quadratically in the control amplitude") {
        const Grid g = small_grid();
        const NoiseModel noise = make_noise(g);
        const IntegratorConfig cfg = short_cfg();
        ControlPath phi = gaussian_control(noise, cfg, 11, 1.0);
        ControlPath scaled = phi;
        for (double& v : scaled.values) v *= 3.0;
        CHECK(control_cost(scaled) == Approx(9.0 * control_cost(phi)).epsilon(1e-13));
    }

    SECTION("left-endpoint quadrature converges at first order") {
        // phi(t) = sin(2 pi t) on a window that is not a whole period, so the
        // Riemann sum error is genuinely O(dt).
        const double T = 0.7;
        const double exact = 0.5 * (T / 2.0 - std::sin(4.0 * M_PI * T) / (8.0 * M_PI));
        for (const double dt : {1e-2, 1e-3}) {
            const int steps = int(std::lround(T / dt));
            ControlPath phi(1, dt, T);
            for (int n = 0; n < steps; ++n) phi.values[std::size_t(n)] = std::sin(2.0 * M_PI * n * dt);
            CHECK(std::abs(control_cost(phi) - exact) < 2.0 * dt);
        }
    }
}

TEST_CASE("misfit definitions and target validation", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    const ControlPath star = gaussian_control(noise, cfg, 21, 0.4);
    const TrajectoryRecord fwd = skeleton_forward(prob, star);

    SECTION("an exact preimage has zero misfit under both kinds") {
        CHECK(rate_misfit(fwd, RateTarget::terminal_field(fwd.fields.back())) == 0.0);
        CHECK(rate_misfit(fwd, RateTarget::trajectory(fwd)) == 0.0);
    }

    SECTION("path targets must match the trajectory length") {
        IntegratorConfig longer = cfg;
        longer.T = 0.2;
        const TrajectoryRecord feed2 = make_feed(g, longer);
        const SkeletonProblem prob2{feed2, noise, longer, 0.0};
        const TrajectoryRecord fwd2 =
            skeleton_forward(prob2, gaussian_control(noise, longer, 22, 0.4));
        CHECK_THROWS_AS(rate_misfit(fwd2, RateTarget::trajectory(fwd)), std::invalid_argument);
    }

    SECTION("trajectory targets require densely recorded fields") {
        IntegratorConfig thin = cfg;
        thin.record_every = 5;
        const TrajectoryRecord sparse = integrate_deterministic(random_field(g, 8, 2.0, 1.0), thin);
        CHECK_FALSE(sparse.has_step_fields());
        CHECK_THROWS_AS(RateTarget::trajectory(sparse), std::invalid_argument);
    }

    SECTION("targets violating incompressibility are rejected") {
        const SpectralField raw = random_unprojected_field(g, 33);
        CHECK_THROWS_AS(rate_function(prob, RateTarget::terminal_field(raw)),
                        std::invalid_argument);
    }

    SECTION("targets on a different grid are rejected") {
        const Grid other(16, 16, 2.0 / 3.0);
        CHECK_THROWS_AS(rate_function(prob, RateTarget::terminal_field(random_field(other, 5))),
                        std::invalid_argument);
    }
}

TEST_CASE("objective gradient matches central differences", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};
    const SkeletonProblem prob_reg{feed, noise, cfg, 0.05};

    const ControlPath star = gaussian_control(noise, cfg, 99, 0.4);
    const TrajectoryRecord fwd = skeleton_forward(prob, star);
    const RateTarget t_term = RateTarget::terminal_field(fwd.fields.back());
    const RateTarget t_path = RateTarget::trajectory(fwd);

    std::mt19937_64 rng(431);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&] {
        ControlPath c(noise.J(), cfg.dt, cfg.T);
        for (double& v : c.values) v = gauss(rng);
        return c;
    };

    SECTION("directional derivatives across kinds, penalties, and regularization") {
        const double h = 1e-5;
        for (int trial = 0; trial < 20; ++trial) {
            const SkeletonProblem& p = (trial % 5 == 4) ? prob_reg : prob;
            const RateTarget& tgt = (trial % 2 == 0) ? t_term : t_path;
            const double pen = (trial % 3 == 0) ? 0.0 : 0.3;
            const ControlPath phi = draw();
            const ControlPath dir = draw();
            const double directional = dot(rate_gradient(p, phi, tgt, pen), dir);
            ControlPath plus = phi, minus = phi;
            for (std::size_t i = 0; i < phi.values.size(); ++i) {
                plus.values[i] += h * dir.values[i];
                minus.values[i] -= h * dir.values[i];
            }
            const double fd = (rate_objective(p, plus, tgt, pen) -
                               rate_objective(p, minus, tgt, pen)) /
                              (2.0 * h);
            INFO("trial " << trial);
            CHECK(std::abs(directional - fd) <= 1e-4 * std::max(std::abs(fd), 1e-12));
        }
    }

    SECTION("gradient vanishes identically at an exact preimage") {
        const ControlPath grad = rate_gradient(prob, star, t_path, 0.0);
        for (const double v : grad.values) CHECK(v == 0.0);
        const ControlPath gterm = rate_gradient(prob, star, t_term, 0.0);
        for (const double v : gterm.values) CHECK(v == 0.0);
    }

    SECTION("penalty enters the gradient as an exact diagonal shift") {
        const ControlPath phi = draw();
        const ControlPath g0 = rate_gradient(prob, phi, t_term, 0.0);
        const ControlPath gw = rate_gradient(prob, phi, t_term, 0.7);
        for (std::size_t i = 0; i < phi.values.size(); ++i) {
            const double expected = g0.values[i] + 0.7 * cfg.dt * phi.values[i];
            CHECK(gw.values[i] == Approx(expected).margin(1e-15 + 1e-12 * std::abs(expected)));
        }
    }

    SECTION("directions with no reachable overlap get zero misfit gradient") {
        // On a zero base flow the forced modes are exactly the noise
        // wavevectors. A target supported on (1,0) alone cannot couple to the
        // (0,1) columns, so their gradient entries vanish at phi = 0.
        const TrajectoryRecord zero_feed = deterministic_feed(SpectralField(g), cfg);
        const SkeletonProblem zp{zero_feed, noise, cfg, 0.0};
        SpectralField tgt(g);
        tgt.set_mode(1, 1, 0, cplx(0.0, 0.05));
        const ControlPath zero(noise.J(), cfg.dt, cfg.T);
        const ControlPath grad = rate_gradient(zp, zero, RateTarget::terminal_field(tgt), 0.0);
        const int steps = cfg.steps();
        bool any_nonzero = false;
        for (int n = 0; n < steps; ++n) {
            // columns 0,1 live on wavevector (0,1); columns 2,3 on (1,0)
            CHECK(grad.values[std::size_t(n) * 4 + 0] == 0.0);
            CHECK(grad.values[std::size_t(n) * 4 + 1] == 0.0);
            any_nonzero |= grad.values[std::size_t(n) * 4 + 2] != 0.0 ||
                           grad.values[std::size_t(n) * 4 + 3] != 0.0;
        }
        CHECK(any_nonzero);
    }
}

TEST_CASE("zero target has zero rate and zero minimizer", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    const RateResult r = rate_function(prob, RateTarget::terminal_field(SpectralField(g)));
    CHECK(r.feasible);
    CHECK(r.value == 0.0);
    CHECK(r.misfit == 0.0);
    CHECK(r.target_residual == 0.0);
    for (const double v : r.minimizer.values) CHECK(v == 0.0);
}

TEST_CASE("forward-generated targets are recovered at no extra cost", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    // The minimizer can only do better than the control that generated the
    // target, so the optimal value is bounded by the generating cost.
    for (const std::uint64_t seed : {101u, 102u, 103u}) {
        const ControlPath star = gaussian_control(noise, cfg, seed, 0.4);
        const TrajectoryRecord fwd = skeleton_forward(prob, star);
        for (const bool path_kind : {false, true}) {
            const RateTarget tgt = path_kind ? RateTarget::trajectory(fwd)
                                             : RateTarget::terminal_field(fwd.fields.back());
            const RateResult r = rate_function(prob, tgt);
            INFO("seed " << seed << (path_kind ? " path" : " terminal"));
            CHECK(r.feasible);
            CHECK(r.target_residual <= 1e-6);
            CHECK(r.value <= control_cost(star) + 1e-3);
            CHECK(r.value == control_cost(r.minimizer));
            CHECK(r.iterations > 0);
        }
    }

    SECTION("recovery still works with vertical regularization enabled") {
        const SkeletonProblem reg{feed, noise, cfg, 0.05};
        const ControlPath star = gaussian_control(noise, cfg, 104, 0.4);
        const TrajectoryRecord fwd = skeleton_forward(reg, star);
        const RateResult r = rate_function(reg, RateTarget::terminal_field(fwd.fields.back()));
        CHECK(r.feasible);
        CHECK(r.target_residual <= 1e-6);
        CHECK(r.value <= control_cost(star) + 1e-3);
    }
}

TEST_CASE("gradient descent inner loop reaches the same targets", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    const ControlPath star = gaussian_control(noise, cfg, 55, 0.3);
    const TrajectoryRecord fwd = skeleton_forward(prob, star);

    RateOptions opts;
    opts.inner = RateOptions::Inner::gd;
    opts.tolerance = 1e-4;
    const RateResult r = rate_function(prob, RateTarget::terminal_field(fwd.fields.back()), opts);
    CHECK(r.feasible);
    CHECK(r.target_residual <= 1e-4);
    CHECK(r.value <= control_cost(star) + 1e-2);
}

TEST_CASE("penalized descent trace is monotone", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    const ControlPath star = gaussian_control(noise, cfg, 77, 0.4);
    const TrajectoryRecord fwd = skeleton_forward(prob, star);
    const ControlPath phi0 = gaussian_control(noise, cfg, 78, 1.0);

    const std::vector<double> trace =
        rate_descent_trace(prob, RateTarget::trajectory(fwd), phi0, 0.5, 30);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    CHECK(trace.back() < trace.front());
}

TEST_CASE("unreachable targets report an infinite rate", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord zero_feed = deterministic_feed(SpectralField(g), cfg);
    const SkeletonProblem prob{zero_feed, noise, cfg, 0.0};

    // From a zero base state the dynamics only populate the noise
    // wavevectors, so mass on (1,1) can never be produced.
    SpectralField tgt(g);
    const double inv = 1.0 / std::sqrt(2.0);
    tgt.set_mode(0, 1, 1, cplx(0.1 * inv, 0.0));
    tgt.set_mode(1, 1, 1, cplx(-0.1 * inv, 0.0));

    const RateResult r = rate_function(prob, RateTarget::terminal_field(tgt));
    CHECK_FALSE(r.feasible);
    CHECK(std::isinf(r.value));
    CHECK(r.value > 0.0);
    CHECK(r.target_residual > 0.1);
}

TEST_CASE("level set probe geometry", "[ratefn]") {
    const Grid g = small_grid();
    const NoiseModel noise = make_noise(g);
    const IntegratorConfig cfg = short_cfg();
    const TrajectoryRecord feed = make_feed(g, cfg);
    const SkeletonProblem prob{feed, noise, cfg, 0.0};

    SECTION("level zero collapses to the zero control") {
        const LevelSetReport z = level_set_probe(prob, 0.0, 4, 4242);
        CHECK(z.diameter_sup_h == 0.0);
        CHECK(z.diameter_l2_h10 == 0.0);
        CHECK(z.bound_constant == 0.0);
        for (const double m : z.membership) CHECK(m == 0.0);
    }

    SECTION("boundary samples sit exactly on the level, interior ones below") {
        const LevelSetReport rep = level_set_probe(prob, 2.0, 8, 4242);
        REQUIRE(rep.membership.size() == 8);
        for (std::size_t i = 0; i < 8; ++i) {
            if (rep.on_boundary[i]) {
                CHECK(rep.membership[i] == Approx(2.0).epsilon(1e-12));
            } else {
                CHECK(rep.membership[i] < 2.0);
                CHECK(rep.membership[i] >= 0.0);
            }
            CHECK(rep.on_boundary[i] == (i % 2 == 0));
        }
    }

    SECTION("diameters scale as the square root of the level") {
        // Same seed means the same angular draws, so quadrupling the level
        // scales every sample field by exactly two.
        const LevelSetReport a = level_set_probe(prob, 1.0, 6, 4242);
        const LevelSetReport b = level_set_probe(prob, 4.0, 6, 4242);
        CHECK(b.diameter_sup_h == Approx(2.0 * a.diameter_sup_h).epsilon(1e-12));
        CHECK(b.diameter_l2_h10 == Approx(2.0 * a.diameter_l2_h10).epsilon(1e-12));
        CHECK(b.bound_constant == Approx(4.0 * a.bound_constant).epsilon(1e-12));
        CHECK(a.diameter_sup_h > 0.0);
    }

    SECTION("the uniform bound constant grows with the level") {
        double prev = -1.0;
        for (const double level : {0.5, 1.0, 2.0}) {
            const LevelSetReport rep = level_set_probe(prob, level, 6, 999);
            CHECK(rep.bound_constant > prev);
            prev = rep.bound_constant;
        }
    }

    SECTION("invalid arguments are rejected") {
        CHECK_THROWS_AS(level_set_probe(prob, -1.0, 4, 1), std::invalid_argument);
        CHECK_THROWS_AS(level_set_probe(prob, 1.0, 0, 1), std::invalid_argument);
    }
}
