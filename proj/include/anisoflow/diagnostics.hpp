#pragma once

// Empirical diagnostics for the two appendix estimates that the energy
// arguments lean on. Both report raw left/right sides and their ratio;
// no unspecified constant is ever asserted here.

#include <anisoflow/littlewood_paley.hpp>
#include <anisoflow/nonlinear.hpp>
#include <anisoflow/norms.hpp>
#include <anisoflow/ops.hpp>

#include <stdexcept>

namespace aniso {

struct CommutatorReport {
    double lhs = 0.0;   // |< Delta_k^v (u.grad w), Delta_k^v w >|
    double rhs = 0.0;   // 2^{-2ks} * four-term bracket, unit constant
    double ratio = 0.0; // lhs/rhs when rhs > 0
};

// Block-commutator estimate: for s >= s0 > 1/2 the pairing of the advection
// term against its own vertical block is controlled by
//   2^{-2ks} ||w||_{H^{1/4,s}} ( ||u||_{H^{1/4,s0}} ||d1 w||_{H^{0,s}}
//                              + ||u||_{H^{1/4,s}}  ||d1 w||_{H^{0,s0}}
//                              + ||d1 u||_{H^{0,s0}} ||w||_{H^{1/4,s}}
//                              + ||d1 u||_{H^{0,s}}  ||w||_{H^{1/4,s0}} ).
inline CommutatorReport commutator_diagnostic(const SpectralField& u, const SpectralField& w,
                                              int k, double s, double s0,
                                              const LittlewoodPaleyPartition& part,
                                              TransformWorkspace& ws) {
    if (!(s0 > 0.5) || s < s0)
        throw std::invalid_argument("commutator_diagnostic: requires s >= s0 > 1/2");
    CommutatorReport r;
    const SpectralField adv = convect(u, w, ws);
    r.lhs = std::abs(inner_product(lp_block(adv, k, part), lp_block(w, k, part)));
    const SpectralField d1u = derivative(u, 1);
    const SpectralField d1w = derivative(w, 1);
    const double bracket = aniso_norm(u, 0.25, s0) * aniso_norm(d1w, 0.0, s) +
                           aniso_norm(u, 0.25, s) * aniso_norm(d1w, 0.0, s0) +
                           aniso_norm(d1u, 0.0, s0) * aniso_norm(w, 0.25, s) +
                           aniso_norm(d1u, 0.0, s) * aniso_norm(w, 0.25, s0);
    const int kk = (k < 0) ? 0 : k; // the low block enters without dyadic gain
    r.rhs = std::pow(2.0, -2.0 * kk * s) * aniso_norm(w, 0.25, s) * bracket;
    r.ratio = (r.rhs > 0.0) ? r.lhs / r.rhs : 0.0;
    return r;
}

struct VerticalEnergyReport {
    double lhs = 0.0;      // |< d2 u, d2 (u.grad u) >|
    double absorbed = 0.0; // a * ||d1 d2 u||^2
    double forced = 0.0;   // (1 + ||d1 u||^2) ||d2 u||^2
    double fitted_c = 0.0; // max(0, lhs - absorbed) / forced
};

// Second vertical-energy estimate: |<d2 u, d2(u.grad u)>| should be
// absorbable as a ||d1 d2 u||^2 + C (1+||d1 u||^2) ||d2 u||^2 for small a.
inline VerticalEnergyReport vertical_energy_diagnostic(const SpectralField& u, double a,
                                                       TransformWorkspace& ws) {
    VerticalEnergyReport r;
    const SpectralField d2u = derivative(u, 2);
    r.lhs = std::abs(inner_product(d2u, derivative(convect(u, u, ws), 2)));
    r.absorbed = a * aniso_norm_sq(derivative(d2u, 1), 0.0, 0.0);
    const double d1_sq = aniso_norm_sq(derivative(u, 1), 0.0, 0.0);
    const double d2_sq = aniso_norm_sq(d2u, 0.0, 0.0);
    r.forced = (1.0 + d1_sq) * d2_sq;
    r.fitted_c = (r.forced > 0.0) ? std::max(0.0, r.lhs - r.absorbed) / r.forced : 0.0;
    return r;
}

} // namespace aniso
