#pragma once

// Time integrators for the whole equation family on one splitting:
// exact exponential integrating factor for the anisotropic dissipation
// (and the optional eps2 * d2^2 regularization), explicit Euler for the
// convection, Euler-Maruyama for the noise:
//
//   state_{n+1} = E(dt) [ state_n + dt * drift(state_n) + noise increments ]
//
// Equations covered: deterministic base flow, primal (sqrt(eps) noise),
// CLT limit (linearized around the base flow, additive noise), scaled
// differences V = (u_eps - u0)/sqrt(eps) and Z = (u_eps - u0)/(sqrt(eps)
// lambda), the skeleton equation driven by a control, and the controlled
// perturbation equation. Per-step squared norms are always recorded; field
// snapshots are optional and thinned by record_every.

#include <anisoflow/field.hpp>
#include <anisoflow/nonlinear.hpp>
#include <anisoflow/noise.hpp>
#include <anisoflow/norms.hpp>
#include <anisoflow/ops.hpp>
#include <anisoflow/wiener.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aniso {

// (eps, lambda(eps) = eps^{-a}) with the admissible exponent band. The
// endpoints are the CLT (a=0) and LDP (a=1/2) regimes and are rejected
// explicitly rather than silently accepted.
struct DeviationScale {
    double eps = 0.0;
    double a = 0.25;

    DeviationScale(double eps_, double a_) : eps(eps_), a(a_) {
        if (!(eps > 0.0)) throw std::invalid_argument("DeviationScale: eps must be positive");
        if (!(a > 0.0) || !(a < 0.5))
            throw std::invalid_argument(
                "DeviationScale: exponent a must lie strictly in (0,1/2); a=0 is the CLT "
                "regime and a=1/2 the LDP regime");
    }
    double lambda() const { return std::pow(eps, -a); }
    double sqrt_eps_lambda() const { return std::pow(eps, 0.5 - a); }
};

struct StepHooks {
    bool disable_nonlinear = false; // test hook: drop B entirely
    bool disable_noise = false;     // test hook: drop the Wiener kick (lambda^{-1} -> 0
                                    // in the controlled equation, zero weights elsewhere)
};

struct IntegratorConfig {
    double dt = 1e-3;
    double T = 0.5;
    int record_every = 1;
    double eps2 = 0.0;   // vertical regularization, read by the skeleton only
    double guard = 1e8;  // blow-up guard on ||.||_H
    bool record_fields = false;
    StepHooks hooks;

    int steps() const {
        if (!(dt > 0.0) || !(T > 0.0))
            throw std::invalid_argument("IntegratorConfig: dt and T must be positive");
        const double n = T / dt;
        const int steps = int(std::lround(n));
        if (steps < 1 || std::abs(steps * dt - T) > 1e-12 * std::max(1.0, T))
            throw std::invalid_argument("IntegratorConfig: dt must divide T");
        if (record_every < 1)
            throw std::invalid_argument("IntegratorConfig: record_every must be >= 1");
        return steps;
    }
};

struct BlowUpError : std::runtime_error {
    int step;
    double norm;
    BlowUpError(int step_, double norm_)
        : std::runtime_error("blow-up guard tripped at step " + std::to_string(step_) +
                             ", ||u||_H = " + std::to_string(norm_)),
          step(step_), norm(norm_) {}
};

// Squared norms tracked at every step.
struct StepNorms {
    double h2 = 0;   // ||u||_H^2
    double d1h2 = 0; // ||d1 u||_H^2
    double h10 = 0;  // ||u||_{H^{1,0}}^2
    double h01 = 0;  // ||u||_{H^{0,1}}^2
    double h11 = 0;  // ||u||_{H^{1,1}}^2
    double h02 = 0;  // ||u||_{H^{0,2}}^2
    double h12 = 0;  // ||u||_{H^{1,2}}^2
};

inline StepNorms measure_norms(const SpectralField& f, double scale_sq = 1.0) {
    const Grid& g = f.grid();
    StepNorms s;
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1) {
        const double a1 = double(k1) * k1;
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double a2 = double(k2) * k2;
            const double mag = std::norm(f.at(0, k1, k2)) + std::norm(f.at(1, k1, k2));
            if (mag == 0.0) continue;
            const double wv = 1.0 + a2;
            s.h2 += mag;
            s.d1h2 += a1 * mag;
            s.h10 += (1.0 + a1) * mag;
            s.h01 += wv * mag;
            s.h11 += (1.0 + a1) * wv * mag;
            s.h02 += wv * wv * mag;
            s.h12 += (1.0 + a1) * wv * wv * mag;
        }
    }
    s.h2 *= scale_sq;
    s.d1h2 *= scale_sq;
    s.h10 *= scale_sq;
    s.h01 *= scale_sq;
    s.h11 *= scale_sq;
    s.h02 *= scale_sq;
    s.h12 *= scale_sq;
    return s;
}

struct TrajectoryRecord {
    double dt = 0.0, T = 0.0;
    int steps = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<double> times;      // all steps, size steps+1
    std::vector<StepNorms> norms;   // all steps, size steps+1
    std::vector<double> field_times; // thinned by record_every (plus final)
    std::vector<SpectralField> fields;

    bool has_step_fields() const {
        return int(fields.size()) == steps + 1; // recorded at every step
    }
    const SpectralField& final_field() const {
        if (fields.empty()) throw std::runtime_error("TrajectoryRecord: no fields recorded");
        return fields.back();
    }
};

// --- accumulated statistics over a record -------------------------------

inline double sup_of(const TrajectoryRecord& t, double StepNorms::*m) {
    double s = 0.0;
    for (const auto& n : t.norms) s = std::max(s, n.*m);
    return s;
}
// Trapezoid integral of a squared norm over [0,T].
inline double integral_of(const TrajectoryRecord& t, double StepNorms::*m) {
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < t.norms.size(); ++n)
        s += 0.5 * t.dt * (t.norms[n].*m + t.norms[n + 1].*m);
    return s;
}
// sup_t ||x||_H^4
inline double sup_h4(const TrajectoryRecord& t) {
    const double s = sup_of(t, &StepNorms::h2);
    return s * s;
}
// integral of (1 + ||x||_H^2) ||x||_{H^{1,0}}^2
inline double integral_mixed(const TrajectoryRecord& t) {
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < t.norms.size(); ++n) {
        const double f0 = (1.0 + t.norms[n].h2) * t.norms[n].h10;
        const double f1 = (1.0 + t.norms[n + 1].h2) * t.norms[n + 1].h10;
        s += 0.5 * t.dt * (f0 + f1);
    }
    return s;
}
// integral of ||x||_H^2 ||x||_{H^{1,0}}^2 (the quartic moment integrand)
inline double integral_h2_h10(const TrajectoryRecord& t) {
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < t.norms.size(); ++n)
        s += 0.5 * t.dt *
             (t.norms[n].h2 * t.norms[n].h10 + t.norms[n + 1].h2 * t.norms[n + 1].h10);
    return s;
}
// g(t) = int_0^t ||d1 x||^2 ds on the step grid (left endpoint).
inline std::vector<double> dissipation_clock(const TrajectoryRecord& t) {
    std::vector<double> g(t.norms.size(), 0.0);
    for (std::size_t n = 1; n < t.norms.size(); ++n)
        g[n] = g[n - 1] + t.dt * t.norms[n - 1].d1h2;
    return g;
}
// sup_t e^{-k g(t)} ||x||_{H^{0,1}}^2 and int e^{-k g} ||x||_{H^{1,1}}^2 dt,
// the exponentially weighted estimates with k exposed as a knob.
inline double weighted_sup_h01(const TrajectoryRecord& t, double k) {
    const auto g = dissipation_clock(t);
    double s = 0.0;
    for (std::size_t n = 0; n < t.norms.size(); ++n)
        s = std::max(s, std::exp(-k * g[n]) * t.norms[n].h01);
    return s;
}
inline double weighted_integral_h11(const TrajectoryRecord& t, double k) {
    const auto g = dissipation_clock(t);
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < t.norms.size(); ++n)
        s += 0.5 * t.dt *
             (std::exp(-k * g[n]) * t.norms[n].h11 + std::exp(-k * g[n + 1]) * t.norms[n + 1].h11);
    return s;
}

// --- stepping machinery --------------------------------------------------

namespace detail {

inline std::string config_hash(const Grid& g, const IntegratorConfig& cfg) {
    // FNV-1a over the parameters that determine the discrete scheme
    std::string s = std::to_string(g.n_h) + "," + std::to_string(g.n_v) + "," +
                    std::to_string(g.dealias_fraction) + "," + std::to_string(cfg.dt) + "," +
                    std::to_string(cfg.T) + "," + std::to_string(cfg.eps2) + "," +
                    std::to_string(cfg.record_every);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline void guard_check(const SpectralField& u, double guard, int step) {
    const double h = norm_h(u);
    if (!std::isfinite(h) || h > guard) throw BlowUpError(step, h);
}

class Recorder {
public:
    Recorder(TrajectoryRecord& out, const IntegratorConfig& cfg, int steps) : out_(out), cfg_(cfg) {
        out_.dt = cfg.dt;
        out_.T = cfg.T;
        out_.steps = steps;
        out_.times.reserve(steps + 1);
        out_.norms.reserve(steps + 1);
    }
    void record(int n, const SpectralField& f, double scale = 1.0) {
        out_.times.push_back(n * cfg_.dt);
        out_.norms.push_back(measure_norms(f, scale * scale));
        if (cfg_.record_fields && (n % cfg_.record_every == 0 || n == out_.steps)) {
            out_.field_times.push_back(n * cfg_.dt);
            SpectralField copy = f;
            if (scale != 1.0) copy *= scale;
            out_.fields.push_back(std::move(copy));
        }
    }

private:
    TrajectoryRecord& out_;
    const IntegratorConfig& cfg_;
};

inline void check_path(const WienerPath& path, const NoiseModel& noise,
                       const IntegratorConfig& cfg, int steps) {
    if (path.J() != noise.J())
        throw std::invalid_argument("integrator: path J does not match noise model J");
    if (path.steps() < steps)
        throw std::invalid_argument("integrator: path shorter than the configured step count");
    if (std::abs(path.dt() - cfg.dt) > 1e-12 * std::max(1.0, cfg.dt))
        throw std::invalid_argument("integrator: path dt does not match config dt");
}

// u0_traj feeds must carry a field for every step on the same grid/clock.
inline void check_feed(const TrajectoryRecord& feed, const Grid& g, const IntegratorConfig& cfg,
                       int steps) {
    if (!feed.has_step_fields())
        throw std::invalid_argument(
            "integrator: base-flow trajectory must record fields at every step "
            "(record_fields=true, record_every=1)");
    if (feed.steps < steps || std::abs(feed.dt - cfg.dt) > 1e-12)
        throw std::invalid_argument("integrator: base-flow trajectory/time grid mismatch");
    if (!feed.fields.empty() && feed.fields.front().grid() != g)
        throw std::invalid_argument("integrator: base-flow trajectory grid mismatch");
}

} // namespace detail

// --- the equation family -------------------------------------------------

// Base flow: du = d1^2 u dt - B(u,u) dt.
inline TrajectoryRecord integrate_deterministic(const SpectralField& u0,
                                                const IntegratorConfig& cfg) {
    const int steps = cfg.steps();
    const Grid& g = u0.grid();
    TransformWorkspace ws(g);
    TrajectoryRecord out;
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    SpectralField u = project_leray(u0);
    apply_dealias_mask(u);
    rec.record(0, u);
    for (int n = 0; n < steps; ++n) {
        if (!cfg.hooks.disable_nonlinear) {
            const SpectralField b = nonlinear_term(u, u, ws);
            u.axpy(-cfg.dt, b);
        }
        apply_dissipation_factor(u, cfg.dt);
        detail::guard_check(u, cfg.guard, n + 1);
        rec.record(n + 1, u);
    }
    return out;
}

// Convenience: base flow recorded densely enough to feed the linearized
// equations (fields at every step).
inline TrajectoryRecord deterministic_feed(const SpectralField& u0, IntegratorConfig cfg) {
    cfg.record_fields = true;
    cfg.record_every = 1;
    return integrate_deterministic(u0, cfg);
}

// Primal equation: du = d1^2 u dt - B(u,u) dt + sqrt(eps) sigma(t,u) dW.
// eps = 0 reduces bit-for-bit to the deterministic integrator.
inline TrajectoryRecord integrate_primal(const SpectralField& u0, double eps,
                                         const NoiseModel& noise, const WienerPath& path,
                                         const IntegratorConfig& cfg) {
    if (eps < 0.0) throw std::invalid_argument("integrate_primal: eps must be >= 0");
    if (eps == 0.0) return integrate_deterministic(u0, cfg);
    const int steps = cfg.steps();
    detail::check_path(path, noise, cfg, steps);
    const Grid& g = u0.grid();
    TransformWorkspace ws(g);
    TrajectoryRecord out;
    out.seed = path.seed();
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    const double root_eps = std::sqrt(eps);
    SpectralField u = project_leray(u0);
    apply_dealias_mask(u);
    rec.record(0, u);
    for (int n = 0; n < steps; ++n) {
        const double t = n * cfg.dt;
        SpectralField noise_incr(g);
        if (!cfg.hooks.disable_noise)
            noise_incr =
                noise.apply(t, u, std::span<const double>(path.row(n), std::size_t(noise.J())));
        if (!cfg.hooks.disable_nonlinear) {
            const SpectralField b = nonlinear_term(u, u, ws);
            u.axpy(-cfg.dt, b);
        }
        if (!cfg.hooks.disable_noise) u.axpy(root_eps, noise_incr);
        apply_dissipation_factor(u, cfg.dt);
        detail::guard_check(u, cfg.guard, n + 1);
        rec.record(n + 1, u);
    }
    return out;
}

// CLT limit: dV = d1^2 V dt - B(V,u0) dt - B(u0,V) dt + sigma(t,u0) dW,
// V(0) = 0, driven along a recorded base flow.
inline TrajectoryRecord integrate_clt_limit(const TrajectoryRecord& u0_traj,
                                            const NoiseModel& noise, const WienerPath& path,
                                            const IntegratorConfig& cfg) {
    const int steps = cfg.steps();
    detail::check_path(path, noise, cfg, steps);
    const Grid& g = noise.grid();
    detail::check_feed(u0_traj, g, cfg, steps);
    TransformWorkspace ws(g);
    TrajectoryRecord out;
    out.seed = path.seed();
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    SpectralField v(g);
    rec.record(0, v);
    for (int n = 0; n < steps; ++n) {
        const double t = n * cfg.dt;
        const SpectralField& base = u0_traj.fields[n];
        SpectralField incr(g);
        if (!cfg.hooks.disable_noise)
            incr = noise.apply(t, base,
                               std::span<const double>(path.row(n), std::size_t(noise.J())));
        if (!cfg.hooks.disable_nonlinear) {
            incr.axpy(-cfg.dt, nonlinear_term(v, base, ws));
            incr.axpy(-cfg.dt, nonlinear_term(base, v, ws));
        }
        v += incr;
        apply_dissipation_factor(v, cfg.dt);
        detail::guard_check(v, cfg.guard, n + 1);
        rec.record(n + 1, v);
    }
    return out;
}

enum class ScaleKind { clt, mdp };
enum class ScaledRoute { difference, direct };

// Scaled deviation: V = (u_eps - u0)/sqrt(eps) (clt) or Z = (u_eps - u0)/
// (sqrt(eps) lambda) (mdp). Default route steps the coupled primal and
// deterministic pair with one Wiener path and records the scaled
// difference; the direct route integrates the difference equation itself
// as a cross-check.
inline TrajectoryRecord integrate_scaled(const SpectralField& u0, double eps, ScaleKind kind,
                                         const std::optional<DeviationScale>& scale,
                                         const NoiseModel& noise, const WienerPath& path,
                                         const IntegratorConfig& cfg,
                                         ScaledRoute route = ScaledRoute::difference,
                                         const TrajectoryRecord* u0_feed = nullptr) {
    if (!(eps > 0.0)) throw std::invalid_argument("integrate_scaled: eps must be positive");
    if (kind == ScaleKind::mdp && !scale)
        throw std::invalid_argument("integrate_scaled: MDP scaling requires a DeviationScale");
    if (kind == ScaleKind::mdp && std::abs(scale->eps - eps) > 1e-15 * eps)
        throw std::invalid_argument("integrate_scaled: DeviationScale.eps mismatch");
    const int steps = cfg.steps();
    detail::check_path(path, noise, cfg, steps);
    const Grid& g = u0.grid();
    if (u0_feed) detail::check_feed(*u0_feed, g, cfg, steps);
    TransformWorkspace ws(g);
    const double denom = (kind == ScaleKind::clt) ? std::sqrt(eps) : scale->sqrt_eps_lambda();
    const double root_eps = std::sqrt(eps);

    TrajectoryRecord out;
    out.seed = path.seed();
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    SpectralField ue = project_leray(u0);
    apply_dealias_mask(ue);
    SpectralField ub = ue; // deterministic twin (used when no feed is given)

    if (route == ScaledRoute::difference) {
        SpectralField diff(g);
        rec.record(0, diff, 0.0);
        for (int n = 0; n < steps; ++n) {
            const double t = n * cfg.dt;
            SpectralField noise_incr(g);
            if (!cfg.hooks.disable_noise)
                noise_incr = noise.apply(
                    t, ue, std::span<const double>(path.row(n), std::size_t(noise.J())));
            if (!cfg.hooks.disable_nonlinear) ue.axpy(-cfg.dt, nonlinear_term(ue, ue, ws));
            if (!cfg.hooks.disable_noise) ue.axpy(root_eps, noise_incr);
            apply_dissipation_factor(ue, cfg.dt);
            if (!u0_feed) {
                if (!cfg.hooks.disable_nonlinear)
                    ub.axpy(-cfg.dt, nonlinear_term(ub, ub, ws));
                apply_dissipation_factor(ub, cfg.dt);
            }
            detail::guard_check(ue, cfg.guard, n + 1);
            diff = ue;
            diff -= u0_feed ? u0_feed->fields[n + 1] : ub;
            rec.record(n + 1, diff, 1.0 / denom);
        }
    } else {
        // direct integration of the difference equation: the primal state
        // still has to be stepped for the coefficients B(.,u_eps) and
        // sigma(t,u_eps).
        SpectralField v(g);
        rec.record(0, v);
        for (int n = 0; n < steps; ++n) {
            const double t = n * cfg.dt;
            const SpectralField& base = u0_feed ? u0_feed->fields[n] : ub;
            const std::span<const double> xi(path.row(n), std::size_t(noise.J()));
            SpectralField v_incr(g);
            if (!cfg.hooks.disable_noise) {
                v_incr = noise.apply(t, ue, xi);
                v_incr *= 1.0 / ((kind == ScaleKind::clt) ? 1.0 : scale->lambda());
            }
            if (!cfg.hooks.disable_nonlinear) {
                v_incr.axpy(-cfg.dt, nonlinear_term(v, ue, ws));
                v_incr.axpy(-cfg.dt, nonlinear_term(base, v, ws));
            }
            // advance the primal twin with the same increments; sigma reads
            // the pre-drift state exactly as in the difference route
            SpectralField ue_noise(g);
            if (!cfg.hooks.disable_noise) ue_noise = noise.apply(t, ue, xi);
            if (!cfg.hooks.disable_nonlinear) ue.axpy(-cfg.dt, nonlinear_term(ue, ue, ws));
            if (!cfg.hooks.disable_noise) ue.axpy(root_eps, ue_noise);
            apply_dissipation_factor(ue, cfg.dt);
            if (!u0_feed) {
                if (!cfg.hooks.disable_nonlinear)
                    ub.axpy(-cfg.dt, nonlinear_term(ub, ub, ws));
                apply_dissipation_factor(ub, cfg.dt);
            }
            v += v_incr;
            apply_dissipation_factor(v, cfg.dt);
            detail::guard_check(v, cfg.guard, n + 1);
            rec.record(n + 1, v);
        }
    }
    return out;
}

// Control paths live here rather than in the rate-function layer because
// the skeleton and controlled integrators consume them directly.
struct ControlPath {
    int J = 0;
    double dt = 0.0, T = 0.0;
    std::vector<double> values; // steps x J, row-major, piecewise constant

    ControlPath() = default;
    ControlPath(int J_, double dt_, double T_)
        : J(J_), dt(dt_), T(T_), values(std::size_t(steps_of(dt_, T_)) * J_, 0.0) {}

    static int steps_of(double dt, double T) {
        const int n = int(std::lround(T / dt));
        if (n < 1 || std::abs(n * dt - T) > 1e-12 * std::max(1.0, T))
            throw std::invalid_argument("ControlPath: dt must divide T");
        return n;
    }
    int steps() const { return steps_of(dt, T); }
    double& at(int n, int j) { return values[std::size_t(n) * J + j]; }
    double at(int n, int j) const { return values[std::size_t(n) * J + j]; }
    const double* row(int n) const { return values.data() + std::size_t(n) * J; }
};

// Skeleton equation: dX = d1^2 X dt + eps2 d2^2 X dt - B(X,u0) dt
// - B(u0,X) dt + sigma(t,u0) phi dt, X(0)=0. eps2=0 is the skeleton proper,
// eps2>0 the vertically regularized variant.
inline TrajectoryRecord integrate_skeleton(const ControlPath& phi,
                                           const TrajectoryRecord& u0_traj,
                                           const NoiseModel& noise, double eps2,
                                           IntegratorConfig cfg) {
    cfg.eps2 = eps2;
    const int steps = cfg.steps();
    if (phi.J != noise.J() || phi.steps() < steps || std::abs(phi.dt - cfg.dt) > 1e-12)
        throw std::invalid_argument("integrate_skeleton: control grid mismatch");
    const Grid& g = noise.grid();
    detail::check_feed(u0_traj, g, cfg, steps);
    TransformWorkspace ws(g);
    TrajectoryRecord out;
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    SpectralField x(g);
    rec.record(0, x);
    for (int n = 0; n < steps; ++n) {
        const double t = n * cfg.dt;
        const SpectralField& base = u0_traj.fields[n];
        SpectralField incr =
            noise.apply(t, base, std::span<const double>(phi.row(n), std::size_t(noise.J())));
        incr *= cfg.dt;
        if (!cfg.hooks.disable_nonlinear) {
            incr.axpy(-cfg.dt, nonlinear_term(x, base, ws));
            incr.axpy(-cfg.dt, nonlinear_term(base, x, ws));
        }
        x += incr;
        apply_dissipation_factor(x, cfg.dt, eps2);
        detail::guard_check(x, cfg.guard, n + 1);
        rec.record(n + 1, x);
    }
    return out;
}

// Controlled perturbation: dX = d1^2 X dt - B(X, u0 + sqrt(eps) lambda X) dt
// - B(u0, X) dt + sigma(t, u0 + sqrt(eps) lambda X) v dt
// + lambda^{-1} sigma(t, u0 + sqrt(eps) lambda X) dW, X(0)=0.
inline TrajectoryRecord integrate_controlled(const ControlPath& v, const DeviationScale& scale,
                                             const TrajectoryRecord& u0_traj,
                                             const NoiseModel& noise, const WienerPath& path,
                                             const IntegratorConfig& cfg) {
    const int steps = cfg.steps();
    if (v.J != noise.J() || v.steps() < steps || std::abs(v.dt - cfg.dt) > 1e-12)
        throw std::invalid_argument("integrate_controlled: control grid mismatch");
    if (!cfg.hooks.disable_noise) detail::check_path(path, noise, cfg, steps);
    const Grid& g = noise.grid();
    detail::check_feed(u0_traj, g, cfg, steps);
    TransformWorkspace ws(g);
    TrajectoryRecord out;
    out.seed = path.seed();
    out.config_hash = detail::config_hash(g, cfg);
    detail::Recorder rec(out, cfg, steps);

    const double snl = scale.sqrt_eps_lambda();
    const double inv_lambda = 1.0 / scale.lambda();
    SpectralField x(g);
    rec.record(0, x);
    for (int n = 0; n < steps; ++n) {
        const double t = n * cfg.dt;
        const SpectralField& base = u0_traj.fields[n];
        SpectralField shifted = base;
        shifted.axpy(snl, x);
        SpectralField incr =
            noise.apply(t, shifted, std::span<const double>(v.row(n), std::size_t(noise.J())));
        incr *= cfg.dt;
        if (!cfg.hooks.disable_noise) {
            SpectralField kick = noise.apply(
                t, shifted, std::span<const double>(path.row(n), std::size_t(noise.J())));
            incr.axpy(inv_lambda, kick);
        }
        if (!cfg.hooks.disable_nonlinear) {
            incr.axpy(-cfg.dt, nonlinear_term(x, shifted, ws));
            incr.axpy(-cfg.dt, nonlinear_term(base, x, ws));
        }
        x += incr;
        apply_dissipation_factor(x, cfg.dt);
        detail::guard_check(x, cfg.guard, n + 1);
        rec.record(n + 1, x);
    }
    return out;
}

// --- energy bookkeeping ---------------------------------------------------

struct EnergyReport {
    double max_residual = 0.0; // discrete d/dt ||u||^2 + 2||d1 u||^2 balance
    double sup_h01 = 0.0, int_h11 = 0.0; // first-level vertical regularity
    double sup_h02 = 0.0, int_h12 = 0.0; // second-level vertical regularity
    double sup_h4 = 0.0, int_mixed = 0.0;
    double weighted_sup_h01 = 0.0, weighted_int_h11 = 0.0;
    double weight_k = 1.0;
};

// Discrete energy balance along a deterministic trajectory: the residual
// (||u_{n+1}||^2 - ||u_n||^2)/dt + (||d1 u_{n+1}||^2 + ||d1 u_n||^2)
// is O(dt) because the convection pairing cancels (b(u,u,u)=0) and the
// dissipation factor is exact.
inline EnergyReport energy_report(const TrajectoryRecord& t, double weight_k = 1.0) {
    if (t.norms.size() < 2)
        throw std::invalid_argument("energy_report: trajectory has no recorded steps");
    EnergyReport r;
    r.weight_k = weight_k;
    for (std::size_t n = 0; n + 1 < t.norms.size(); ++n) {
        const double res = (t.norms[n + 1].h2 - t.norms[n].h2) / t.dt +
                           (t.norms[n + 1].d1h2 + t.norms[n].d1h2);
        r.max_residual = std::max(r.max_residual, std::abs(res));
    }
    r.sup_h01 = sup_of(t, &StepNorms::h01);
    r.int_h11 = integral_of(t, &StepNorms::h11);
    r.sup_h02 = sup_of(t, &StepNorms::h02);
    r.int_h12 = integral_of(t, &StepNorms::h12);
    r.sup_h4 = sup_h4(t);
    r.int_mixed = integral_mixed(t);
    r.weighted_sup_h01 = weighted_sup_h01(t, weight_k);
    r.weighted_int_h11 = weighted_integral_h11(t, weight_k);
    return r;
}

} // namespace aniso
