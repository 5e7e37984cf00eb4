#pragma once

// Dyadic partition of unity in the vertical frequency and the associated
// vertical Littlewood-Paley blocks. The profile pair is frozen:
//   chi  = 1 on [0,3/4], smooth C-infinity falloff, support in [0,4/3]
//   theta(z) = chi(z/2) - chi(z),               support in [3/4,8/3]
// so chi(z) + sum_{j>=0} theta(2^{-j} z) telescopes to chi(2^{-J-1} z) = 1
// exactly once 2^{-J-1} z <= 3/4, which fixes j_max on a finite lattice.

#include <anisoflow/field.hpp>
#include <anisoflow/norms.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace aniso {

namespace detail {
// Standard smooth step: 0 for t<=0, 1 for t>=1, C-infinity in between.
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}
} // namespace detail

struct LittlewoodPaleyPartition {
    int j_max = 0;

    explicit LittlewoodPaleyPartition(const Grid& g) {
        // smallest J with 2^{-J-1} * (n_v/2) <= 3/4: beyond it every block
        // vanishes on the lattice and reconstruction is exact.
        int j = 0;
        while (std::ldexp(double(g.half_v()), -(j + 1)) > 0.75) ++j;
        j_max = j;
    }

    static double chi(double z) {
        z = std::abs(z);
        if (z <= 0.75) return 1.0;
        if (z >= 4.0 / 3.0) return 0.0;
        return 1.0 - detail::smooth_step((z - 0.75) / (4.0 / 3.0 - 0.75));
    }
    static double theta(double z) { return chi(z / 2.0) - chi(z); }

    // Multiplier value of block j at vertical frequency k2.
    double weight(int j, int k2) const {
        if (j < -1 || j > j_max)
            throw std::out_of_range("LittlewoodPaleyPartition: block index out of range");
        const double z = std::abs(double(k2));
        return (j == -1) ? chi(z) : theta(std::ldexp(z, -j));
    }
};

// Delta_j^v f: multiply coefficients by the block profile in k2.
inline SpectralField lp_block(const SpectralField& f, int j, const LittlewoodPaleyPartition& part) {
    if (j < -1 || j > part.j_max)
        throw std::out_of_range("lp_block: block index " + std::to_string(j) +
                                " exceeds j_max=" + std::to_string(part.j_max));
    const Grid& g = f.grid();
    SpectralField out(g);
    for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
        const double w = part.weight(j, k2);
        if (w == 0.0) continue;
        for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1) {
            out.at(0, k1, k2) = w * f.at(0, k1, k2);
            out.at(1, k1, k2) = w * f.at(1, k1, k2);
        }
    }
    return out;
}

// Equivalent block-sum representation of the anisotropic norm:
//   ( sum_j 2^{2 j s'} || Delta_j^v f ||^2_{L2_v(H^s_h)} )^{1/2}
// with the j=-1 block entering at weight 1. Equivalent to aniso_norm(f,s,s')
// up to two-sided constants measured empirically (never equal).
inline double lp_norm(const SpectralField& f, double s, double sv,
                      const LittlewoodPaleyPartition& part) {
    const Grid& g = f.grid();
    double total = 0.0;
    for (int j = -1; j <= part.j_max; ++j) {
        double block = 0.0;
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            const double w = part.weight(j, k2);
            if (w == 0.0) continue;
            for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1) {
                const double wh = std::pow(1.0 + double(k1) * k1, s);
                block += wh * w * w *
                         (std::norm(f.at(0, k1, k2)) + std::norm(f.at(1, k1, k2)));
            }
        }
        total += ((j == -1) ? 1.0 : std::pow(2.0, 2.0 * j * sv)) * block;
    }
    return std::sqrt(total);
}

} // namespace aniso
