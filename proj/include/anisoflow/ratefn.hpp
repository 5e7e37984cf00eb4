#pragma once

// Moderate-deviation rate function in control-space parametrization:
//
//   I(target) = inf { 1/2 int_0^T ||phi(t)||_{l2}^2 dt :
//                     the skeleton trajectory driven by phi matches target }
//
// The skeleton map phi -> X^phi is linear (X(0)=0, coefficients frozen on
// the base flow), so the penalized problem
//
//   J_w(phi) = misfit(X^phi, target) + w * cost(phi)
//
// is a strictly convex quadratic for w > 0. The minimizer is found by
// conjugate gradients on the normal equations, driven matrix-free through
// one forward and one adjoint skeleton solve per matrix application, with
// the penalty weight w shrunk geometrically until the misfit residual
// passes tolerance (quadratic-penalty continuation). A plain
// gradient-descent inner loop with Armijo backtracking is kept alongside
// as the simple reference method.
//
// The adjoint recursion, for the forward step
//   X^{n+1} = E (X^n + dt A_n X^n + dt sigma_n phi_n),
//   A_n X = -B(X, u0_n) - B(u0_n, X),
// is
//   mu^n = r_n + (I + dt A_n^T) E mu^{n+1},
//   A_n^T y = -convect_transpose(u0_n, MPy) + convect(u0_n, MPy),
//   dJ/dphi_{n,j} = dt ( w phi_{n,j} + <e_j, E mu^{n+1}> * columnscale_j ),
// where MP is the Leray projection composed with the dealias mask and r_n
// the misfit residual at step n.

#include <anisoflow/integrators.hpp>
#include <anisoflow/nonlinear.hpp>
#include <anisoflow/noise.hpp>
#include <anisoflow/wiener.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace aniso {

// 1/2 sum_n ||phi_n||^2 dt, left-endpoint quadrature (matches the forward
// solver's piecewise-constant controls).
inline double control_cost(const ControlPath& phi) {
    double s = 0.0;
    for (double v : phi.values) s += v * v;
    return 0.5 * phi.dt * s;
}

// Membership integral for the level sets S_N = {phi : int ||phi||^2 dt <= N}.
inline double control_membership(const ControlPath& phi) {
    double s = 0.0;
    for (double v : phi.values) s += v * v;
    return phi.dt * s;
}

enum class MisfitKind { terminal_h, path_l2h };

// Matching data for the rate function: either a terminal field in H or a
// full path matched in L^2([0,T], H).
struct RateTarget {
    MisfitKind kind = MisfitKind::terminal_h;
    SpectralField terminal;
    std::vector<SpectralField> path; // states at t_n, n = 0..N; index 0 is not matched

    static RateTarget terminal_field(SpectralField f) {
        RateTarget t{MisfitKind::terminal_h, std::move(f), {}};
        return t;
    }
    static RateTarget trajectory(const TrajectoryRecord& rec) {
        if (!rec.has_step_fields())
            throw std::invalid_argument(
                "RateTarget: path targets need fields recorded at every step");
        RateTarget t;
        t.kind = MisfitKind::path_l2h;
        t.terminal = rec.fields.back();
        t.path = rec.fields;
        return t;
    }
    const Grid& grid() const { return terminal.grid(); }
};

// The frozen-coefficient problem the rate function is posed on: base flow,
// noise model giving the control directions, optional vertical
// regularization, time grid.
struct SkeletonProblem {
    const TrajectoryRecord& u0;
    const NoiseModel& noise;
    IntegratorConfig cfg;
    double eps2 = 0.0;
};

inline TrajectoryRecord skeleton_forward(const SkeletonProblem& p, const ControlPath& phi) {
    IntegratorConfig cfg = p.cfg;
    cfg.record_fields = true;
    cfg.record_every = 1;
    return integrate_skeleton(phi, p.u0, p.noise, p.eps2, cfg);
}

// misfit(X, target): terminal 1/2 ||X_N - T||_H^2, or path
// 1/2 sum_{n=1..N} dt ||X_n - T_n||_H^2 (right-endpoint; the uncontrollable
// initial state is not matched).
inline double rate_misfit(const TrajectoryRecord& x, const RateTarget& target) {
    if (!x.has_step_fields())
        throw std::invalid_argument("rate_misfit: trajectory missing per-step fields");
    if (target.kind == MisfitKind::terminal_h) {
        SpectralField d = x.fields.back();
        d -= target.terminal;
        return 0.5 * aniso_norm_sq(d, 0.0, 0.0);
    }
    if (int(target.path.size()) != x.steps + 1)
        throw std::invalid_argument("rate_misfit: target path length mismatch");
    double s = 0.0;
    for (int n = 1; n <= x.steps; ++n) {
        SpectralField d = x.fields[std::size_t(n)];
        d -= target.path[std::size_t(n)];
        s += x.dt * aniso_norm_sq(d, 0.0, 0.0);
    }
    return 0.5 * s;
}

// J_w(phi) = misfit + penalty * cost, the objective whose gradient
// rate_gradient returns.
inline double rate_objective(const SkeletonProblem& p, const ControlPath& phi,
                             const RateTarget& target, double penalty) {
    return rate_misfit(skeleton_forward(p, phi), target) + penalty * control_cost(phi);
}

namespace detail {

// (I + dt A_n^T) y without the outer projection; the honest transpose of
// the forward step's drift against the coefficient inner product.
inline void adjoint_drift(SpectralField& y, const SpectralField& base, double dt,
                          TransformWorkspace& ws) {
    SpectralField z = project_leray(y);
    apply_dealias_mask(z);
    SpectralField a = convect(base, z, ws);
    a -= convect_transpose(base, z, ws);
    y.axpy(dt, a);
}

} // namespace detail

// Gradient of rate_objective with respect to every control entry, by one
// forward and one backward (adjoint) sweep. Entries are plain partial
// derivatives: the Euclidean pairing <grad, delta> matches directional
// finite differences of rate_objective.
inline ControlPath rate_gradient(const SkeletonProblem& p, const ControlPath& phi,
                                 const RateTarget& target, double penalty) {
    const int steps = p.cfg.steps();
    const int J = p.noise.J();
    if (phi.J != J || phi.steps() != steps)
        throw std::invalid_argument("rate_gradient: control shape mismatch");
    if (target.kind == MisfitKind::path_l2h && int(target.path.size()) != steps + 1)
        throw std::invalid_argument("rate_gradient: target path length mismatch");
    if (target.grid() != p.noise.grid())
        throw std::invalid_argument("rate_gradient: target grid mismatch");

    const TrajectoryRecord x = skeleton_forward(p, phi);
    const Grid& g = p.noise.grid();
    TransformWorkspace ws(g);
    ControlPath grad(J, phi.dt, phi.T);

    auto residual = [&](int n) -> SpectralField {
        SpectralField r(g);
        if (target.kind == MisfitKind::terminal_h) {
            if (n == steps) {
                r = x.fields[std::size_t(n)];
                r -= target.terminal;
            }
        } else if (n >= 1) {
            r = x.fields[std::size_t(n)];
            r -= target.path[std::size_t(n)];
            r *= x.dt;
        }
        return r;
    };

    SpectralField mu = residual(steps);
    for (int n = steps - 1; n >= 0; --n) {
        SpectralField y = mu; // y = E mu^{n+1}
        apply_dissipation_factor(y, p.cfg.dt, p.eps2);
        const SpectralField& base = p.u0.fields[std::size_t(n)];
        for (int j = 0; j < J; ++j) {
            const double scale = p.noise.column_scale(j, base);
            grad.at(n, j) =
                p.cfg.dt * (penalty * phi.at(n, j) +
                            scale * inner_product(p.noise.direction(j), y));
        }
        if (n > 0) {
            detail::adjoint_drift(y, base, p.cfg.dt, ws);
            mu = residual(n);
            mu += y;
        }
    }
    return grad;
}

struct RateResult {
    double value = 0.0;          // control energy of the minimizer; +inf if infeasible
    ControlPath minimizer;
    double target_residual = 0.0; // sqrt(2 * misfit) at the minimizer
    int iterations = 0;           // forward/adjoint solve pairs spent
    int stages = 0;               // penalty continuation stages used
    bool feasible = false;
    double misfit = 0.0;
    double final_penalty = 0.0;
};

struct RateOptions {
    double tolerance = 1e-6;       // exit when target_residual <= tolerance
    double penalty0 = 1.0;         // initial weight on the cost term
    double penalty_shrink = 0.1;   // per continuation stage
    int max_stages = 14;
    int max_iterations = 20000;    // total forward/adjoint pairs
    double cg_rtol = 1e-12;        // inner CG gradient-norm reduction
    double stagnation_rtol = 1e-3; // declare infeasible below this improvement
    enum class Inner { cg, gd } inner = Inner::cg;
    int gd_iters_per_stage = 300;
};

namespace detail {

inline double dot(const ControlPath& a, const ControlPath& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

// One penalty stage of plain gradient descent with Armijo backtracking.
// Appends the accepted objective values to trace when given; the sequence
// is nonincreasing by construction.
inline int descend_gd(const SkeletonProblem& p, const RateTarget& target, ControlPath& phi,
                      double penalty, int max_iters, int budget,
                      std::vector<double>* trace = nullptr) {
    int spent = 0;
    double obj = rate_objective(p, phi, target, penalty);
    if (trace) trace->push_back(obj);
    double step = 1.0;
    for (int it = 0; it < max_iters && spent < budget; ++it) {
        const ControlPath g = rate_gradient(p, phi, target, penalty);
        ++spent;
        const double gg = dot(g, g);
        if (gg == 0.0) break;
        double alpha = step;
        bool accepted = false;
        for (int back = 0; back < 40; ++back) {
            ControlPath cand = phi;
            for (std::size_t i = 0; i < cand.values.size(); ++i)
                cand.values[i] -= alpha * g.values[i];
            const double cand_obj = rate_objective(p, cand, target, penalty);
            if (cand_obj <= obj - 1e-4 * alpha * gg) {
                phi = std::move(cand);
                obj = cand_obj;
                if (trace) trace->push_back(obj);
                step = alpha * 2.0;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        if (gg <= 1e-24) break;
    }
    return spent;
}

} // namespace detail

// Objective values along an Armijo gradient-descent run from phi; the
// sequence of accepted iterates is nonincreasing by construction.
inline std::vector<double> rate_descent_trace(const SkeletonProblem& p, const RateTarget& target,
                                              ControlPath phi, double penalty, int iters) {
    std::vector<double> trace;
    detail::descend_gd(p, target, phi, penalty, iters, iters + 1, &trace);
    return trace;
}

// Penalized minimization with continuation. The value certifies an upper
// bound on I(target) up to the residual tolerance; infeasible targets
// (residual stagnating above tolerance as the penalty vanishes) are
// reported with a +inf sentinel, never silently regularized.
inline RateResult rate_function(const SkeletonProblem& p, const RateTarget& target,
                                const RateOptions& opts = {}) {
    const int steps = p.cfg.steps();
    const int J = p.noise.J();
    if (target.grid() != p.noise.grid())
        throw std::invalid_argument("rate_function: target grid mismatch");
    if (target.kind == MisfitKind::terminal_h) {
        if (target.terminal.max_divergence() > 1e-8)
            throw std::invalid_argument("rate_function: target is not divergence-free");
    } else {
        for (const auto& f : target.path)
            if (f.max_divergence() > 1e-8)
                throw std::invalid_argument("rate_function: target path is not divergence-free");
    }

    RateResult res;
    res.minimizer = ControlPath(J, p.cfg.dt, p.cfg.T);
    ControlPath& phi = res.minimizer;

    // b = -grad misfit at phi=0; the linear part of the normal equations.
    ControlPath b = rate_gradient(p, ControlPath(J, p.cfg.dt, p.cfg.T), target, 0.0);
    ++res.iterations;
    for (double& v : b.values) v = -v;
    const double bnorm = std::sqrt(detail::dot(b, b));

    // A_w p = (S^T c S + w dt I) p, matrix-free: grad(p, 0) + b + w dt p.
    auto matvec = [&](const ControlPath& d, double w) {
        ControlPath out = rate_gradient(p, d, target, 0.0);
        ++res.iterations;
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += b.values[i] + w * p.cfg.dt * d.values[i];
        return out;
    };

    double penalty = opts.penalty0;
    double prev_residual = std::numeric_limits<double>::infinity();
    for (int stage = 0; stage < opts.max_stages; ++stage) {
        ++res.stages;
        res.final_penalty = penalty;
        if (bnorm > 0.0 && opts.inner == RateOptions::Inner::cg) {
            // CG on A_w phi = b, warm-started from the previous stage.
            ControlPath r = matvec(phi, penalty);
            for (std::size_t i = 0; i < r.values.size(); ++i)
                r.values[i] = b.values[i] - r.values[i];
            ControlPath d = r;
            double rr = detail::dot(r, r);
            const double stop = std::max(opts.cg_rtol * bnorm, 1e-300);
            int iters = 0;
            const int cap = steps * J + 10;
            while (std::sqrt(rr) > stop && iters < cap &&
                   res.iterations < opts.max_iterations) {
                const ControlPath ad = matvec(d, penalty);
                const double dad = detail::dot(d, ad);
                if (!(dad > 0.0)) break;
                const double alpha = rr / dad;
                for (std::size_t i = 0; i < phi.values.size(); ++i) {
                    phi.values[i] += alpha * d.values[i];
                    r.values[i] -= alpha * ad.values[i];
                }
                const double rr_next = detail::dot(r, r);
                const double beta = rr_next / rr;
                rr = rr_next;
                for (std::size_t i = 0; i < d.values.size(); ++i)
                    d.values[i] = r.values[i] + beta * d.values[i];
                ++iters;
            }
        } else if (bnorm > 0.0) {
            res.iterations += detail::descend_gd(p, target, phi, penalty,
                                                 opts.gd_iters_per_stage,
                                                 opts.max_iterations - res.iterations);
        }

        res.misfit = rate_misfit(skeleton_forward(p, phi), target);
        ++res.iterations;
        res.target_residual = std::sqrt(2.0 * res.misfit);
        if (res.target_residual <= opts.tolerance) {
            res.feasible = true;
            break;
        }
        const double improvement = (prev_residual - res.target_residual) /
                                   std::max(prev_residual, 1e-300);
        if (stage > 0 && improvement < opts.stagnation_rtol) break; // stagnated: infeasible
        if (res.iterations >= opts.max_iterations) break;
        prev_residual = res.target_residual;
        penalty *= opts.penalty_shrink;
    }

    res.value = res.feasible ? control_cost(phi) : std::numeric_limits<double>::infinity();
    return res;
}

// --- level-set probes ------------------------------------------------------

struct LevelSetReport {
    double radius = 0.0; // N
    int samples = 0;
    std::vector<double> membership;    // int ||phi||^2 dt per sample
    std::vector<bool> on_boundary;
    double diameter_sup_h = 0.0;       // max pairwise sup_t ||Xi - Xj||_H
    double diameter_l2_h10 = 0.0;      // max pairwise L^2([0,T], H^{1,0}) distance
    double bound_constant = 0.0;       // max_i sup ||Xi||_{H^{0,1}}^2 + int ||Xi||_{H^{1,1}}^2
};

// Samples controls on the boundary (even indices) and interior (odd) of
// S_N, pushes them through the skeleton, and reports image geometry. The
// construction is linear in sqrt(N) for a fixed seed, so images under
// S_{c^2 N} are exactly c times the images under S_N.
inline LevelSetReport level_set_probe(const SkeletonProblem& p, double N, int samples,
                                      std::uint64_t seed) {
    if (N < 0.0) throw std::invalid_argument("level_set_probe: N must be nonnegative");
    if (samples < 1) throw std::invalid_argument("level_set_probe: samples must be positive");
    const int steps = p.cfg.steps();
    const int J = p.noise.J();
    LevelSetReport rep;
    rep.radius = N;
    rep.samples = samples;

    std::vector<TrajectoryRecord> trajs;
    trajs.reserve(std::size_t(samples));
    for (int i = 0; i < samples; ++i) {
        std::mt19937_64 rng(derive_seed(seed, std::uint64_t(i)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        ControlPath phi(J, p.cfg.dt, p.cfg.T);
        for (double& v : phi.values) v = gauss(rng);
        const double m = control_membership(phi);
        const bool boundary = (i % 2 == 0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double radial = boundary ? 1.0 : unif(rng);
        const double scale = (m > 0.0) ? std::sqrt(N * radial / m) : 0.0;
        for (double& v : phi.values) v *= scale;
        rep.membership.push_back(control_membership(phi));
        rep.on_boundary.push_back(boundary);
        trajs.push_back(skeleton_forward(p, phi));
    }

    for (int i = 0; i < samples; ++i) {
        const auto& ti = trajs[std::size_t(i)];
        rep.bound_constant = std::max(
            rep.bound_constant, sup_of(ti, &StepNorms::h01) + integral_of(ti, &StepNorms::h11));
        for (int j = i + 1; j < samples; ++j) {
            const auto& tj = trajs[std::size_t(j)];
            double sup_h = 0.0, int_h10 = 0.0;
            for (int n = 0; n <= steps; ++n) {
                SpectralField d = ti.fields[std::size_t(n)];
                d -= tj.fields[std::size_t(n)];
                sup_h = std::max(sup_h, aniso_norm_sq(d, 0.0, 0.0));
                const double w = (n == 0 || n == steps) ? 0.5 : 1.0;
                int_h10 += w * p.cfg.dt * aniso_norm_sq(d, 1.0, 0.0);
            }
            rep.diameter_sup_h = std::max(rep.diameter_sup_h, std::sqrt(sup_h));
            rep.diameter_l2_h10 = std::max(rep.diameter_l2_h10, std::sqrt(int_h10));
        }
    }
    return rep;
}

} // namespace aniso
