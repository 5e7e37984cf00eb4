#pragma once

// Pointwise-in-k operations: spectral differentiation, the Leray projection
// onto divergence-free fields, the dealias mask, and the exponential factor
// of the anisotropic dissipation exp(-(k1^2 + eps2*k2^2) dt).

#include <anisoflow/field.hpp>

#include <cmath>
#include <stdexcept>

namespace aniso {

// u_k -> (i k_axis)^order u_k. axis is 1 (horizontal) or 2 (vertical).
inline SpectralField derivative(const SpectralField& f, int axis, int order = 1) {
    if (axis != 1 && axis != 2) throw std::invalid_argument("derivative: axis must be 1 or 2");
    if (order < 1) throw std::invalid_argument("derivative: order must be >= 1");
    const Grid& g = f.grid();
    SpectralField out(g);
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double ka = (axis == 1) ? double(k1) : double(k2);
            cplx factor{1.0, 0.0};
            const cplx ik{0.0, ka};
            for (int p = 0; p < order; ++p) factor *= ik;
            out.at(0, k1, k2) = factor * f.at(0, k1, k2);
            out.at(1, k1, k2) = factor * f.at(1, k1, k2);
        }
    return out;
}

// Leray projection: u_k -> (I - k k^T/|k|^2) u_k for k != 0; the mean mode
// is untouched (the divergence condition is vacuous there).
inline SpectralField project_leray(const SpectralField& f) {
    const Grid& g = f.grid();
    SpectralField out(g);
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const cplx a = f.at(0, k1, k2);
            const cplx b = f.at(1, k1, k2);
            if (k1 == 0 && k2 == 0) {
                out.at(0, 0, 0) = a;
                out.at(1, 0, 0) = b;
                continue;
            }
            const double kk = double(k1) * k1 + double(k2) * k2;
            const cplx kdotu = (double(k1) * a + double(k2) * b) / kk;
            out.at(0, k1, k2) = a - double(k1) * kdotu;
            out.at(1, k1, k2) = b - double(k2) * kdotu;
        }
    return out;
}

inline void apply_dealias_mask(SpectralField& f) {
    const Grid& g = f.grid();
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2)
            if (!g.in_mask(k1, k2)) {
                f.at(0, k1, k2) = cplx{0.0, 0.0};
                f.at(1, k1, k2) = cplx{0.0, 0.0};
            }
}

// In-place multiplication by exp(-(k1^2 + eps2*k2^2) dt), the exact
// integrating factor of the linear part over one step.
inline void apply_dissipation_factor(SpectralField& f, double dt, double eps2 = 0.0) {
    const Grid& g = f.grid();
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double rate = double(k1) * k1 + eps2 * double(k2) * k2;
            if (rate == 0.0) continue;
            const double e = std::exp(-rate * dt);
            f.at(0, k1, k2) *= e;
            f.at(1, k1, k2) *= e;
        }
}

} // namespace aniso
