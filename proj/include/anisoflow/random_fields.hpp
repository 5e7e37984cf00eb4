#pragma once

// Seeded random divergence-free fields with power-law spectral decay,
// used for property sweeps, probes, and default initial conditions.

#include <anisoflow/field.hpp>
#include <anisoflow/ops.hpp>

#include <cstdint>
#include <random>

namespace aniso {

// Gaussian coefficients along the divergence-free polarization k_perp/|k|,
// damped by (1+|k|^2)^{-decay/2}, symmetrized for reality, masked so the
// field lives in the active Galerkin subspace. Zero mean mode.
inline SpectralField random_field(const Grid& g, std::uint64_t seed, double decay = 2.0,
                                  double amplitude = 1.0) {
    SpectralField f(g);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k1 = 0; k1 <= g.half_h(); ++k1) {
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            if (k1 == 0 && k2 <= 0) continue; // one representative per +-k pair
            const double re = gauss(rng);
            const double im = gauss(rng);
            if (!g.in_mask(k1, k2)) continue;
            const double kk = double(k1) * k1 + double(k2) * k2;
            const double damp = amplitude * std::pow(1.0 + kk, -0.5 * decay);
            const double inv = 1.0 / std::sqrt(kk);
            const cplx amp{re * damp, im * damp};
            // polarization (-k2, k1)/|k| keeps k . u_k = 0 exactly
            f.set_mode(0, k1, k2, -double(k2) * inv * amp);
            f.set_mode(1, k1, k2, double(k1) * inv * amp);
        }
    }
    return f;
}

// Not divergence-free: every lattice mode gets an independent coefficient.
// Only used to exercise the projection itself.
inline SpectralField random_unprojected_field(const Grid& g, std::uint64_t seed,
                                              double decay = 2.0, double amplitude = 1.0) {
    SpectralField f(g);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int c = 0; c < 2; ++c)
        for (int k1 = 0; k1 <= g.half_h(); ++k1)
            for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
                if (k1 == 0 && k2 < 0) continue;
                const double kk = double(k1) * k1 + double(k2) * k2;
                const double damp = amplitude * std::pow(1.0 + kk, -0.5 * decay);
                if (k1 == 0 && k2 == 0) {
                    f.at(c, 0, 0) = cplx{damp * gauss(rng), 0.0};
                    gauss(rng);
                    continue;
                }
                f.set_mode(c, k1, k2, cplx{damp * gauss(rng), damp * gauss(rng)});
            }
    return f;
}

} // namespace aniso
