#pragma once

// Anisotropic Sobolev norms as coefficient-space sums:
//   ||u||_{H^{s,s'}}^2 = sum_k (1+k1^2)^s (1+k2^2)^{s'} |u_k|^2
// and the isotropic sibling ||u||_{H^s}^2 = sum_k (1+|k|^2)^s |u_k|^2.

#include <anisoflow/field.hpp>

#include <cmath>

namespace aniso {

inline double aniso_norm_sq(const SpectralField& f, double s, double sv) {
    const Grid& g = f.grid();
    double total = 0.0;
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1) {
        const double wh = (s == 0.0) ? 1.0 : std::pow(1.0 + double(k1) * k1, s);
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double wv = (sv == 0.0) ? 1.0 : std::pow(1.0 + double(k2) * k2, sv);
            const double mag = std::norm(f.at(0, k1, k2)) + std::norm(f.at(1, k1, k2));
            total += wh * wv * mag;
        }
    }
    return total;
}

inline double aniso_norm(const SpectralField& f, double s, double sv) {
    return std::sqrt(aniso_norm_sq(f, s, sv));
}

inline double iso_norm_sq(const SpectralField& f, double s) {
    const Grid& g = f.grid();
    double total = 0.0;
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double w =
                (s == 0.0) ? 1.0 : std::pow(1.0 + double(k1) * k1 + double(k2) * k2, s);
            total += w * (std::norm(f.at(0, k1, k2)) + std::norm(f.at(1, k1, k2)));
        }
    return total;
}

inline double iso_norm(const SpectralField& f, double s) { return std::sqrt(iso_norm_sq(f, s)); }

inline double norm_h(const SpectralField& f) { return aniso_norm(f, 0.0, 0.0); }
inline double norm_h_sq(const SpectralField& f) { return aniso_norm_sq(f, 0.0, 0.0); }

} // namespace aniso
