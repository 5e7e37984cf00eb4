#pragma once

// Truncated Fourier lattice on the torus [0,2pi)^2.
//
// Retained wavenumbers are the full rectangle |k1| <= n_h/2, |k2| <= n_v/2
// (both Nyquist rows kept, tied by the reality constraint). The grid also
// carries the dealiasing fraction applied to quadratic products.

#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace aniso {

struct Grid {
    int n_h = 16;
    int n_v = 16;
    double dealias_fraction = 2.0 / 3.0;

    Grid() = default;
    Grid(int nh, int nv, double fraction = 2.0 / 3.0)
        : n_h(nh), n_v(nv), dealias_fraction(fraction) {
        if (n_h < 4 || n_v < 4 || n_h % 2 != 0 || n_v % 2 != 0)
            throw std::invalid_argument("Grid: n_h, n_v must be even and >= 4, got " +
                                        std::to_string(n_h) + "x" + std::to_string(n_v));
        if (!(dealias_fraction > 0.0) || dealias_fraction > 1.0)
            throw std::invalid_argument("Grid: dealias_fraction must lie in (0,1]");
    }

    int half_h() const { return n_h / 2; }
    int half_v() const { return n_v / 2; }
    int modes_h() const { return n_h + 1; }
    int modes_v() const { return n_v + 1; }
    std::size_t size() const { return std::size_t(modes_h()) * modes_v(); }

    // Row-major k order: k1 is the slow index, k2 the fast one.
    std::size_t index(int k1, int k2) const {
        return std::size_t(k1 + half_h()) * modes_v() + (k2 + half_v());
    }
    bool contains(int k1, int k2) const {
        return k1 >= -half_h() && k1 <= half_h() && k2 >= -half_v() && k2 <= half_v();
    }

    // Dealias mask: modes beyond fraction * n/2 in either direction are cut
    // from quadratic products. A small slack keeps exact thresholds inclusive.
    bool in_mask(int k1, int k2) const {
        const double slack = 1e-9;
        return std::abs(k1) <= dealias_fraction * half_h() + slack &&
               std::abs(k2) <= dealias_fraction * half_v() + slack;
    }

    // Padded transform grid: 2n points per direction exceed the 3K+1 needed
    // to make quadratic products of retained modes alias-free.
    int pad_h() const { return 2 * n_h; }
    int pad_v() const { return 2 * n_v; }

    bool operator==(const Grid& o) const {
        return n_h == o.n_h && n_v == o.n_v && dealias_fraction == o.dealias_fraction;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

} // namespace aniso
