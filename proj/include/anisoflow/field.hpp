#pragma once

// Two-component velocity field stored as Fourier coefficients on the
// truncated lattice, with the normalization u(x) = sum_k u_k exp(i k.x).
// Real fields satisfy u_{-k} = conj(u_k); construction helpers keep that
// constraint in place so downstream code never has to re-symmetrize.

#include <anisoflow/grid.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aniso {

using cplx = std::complex<double>;

class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(const Grid& g) : grid_(g), a_(2 * g.size(), cplx{0.0, 0.0}) {}

    const Grid& grid() const { return grid_; }
    bool empty() const { return a_.empty(); }

    cplx& at(int comp, int k1, int k2) { return a_[comp * grid_.size() + grid_.index(k1, k2)]; }
    const cplx& at(int comp, int k1, int k2) const {
        return a_[comp * grid_.size() + grid_.index(k1, k2)];
    }
    cplx* data(int comp) { return a_.data() + comp * grid_.size(); }
    const cplx* data(int comp) const { return a_.data() + comp * grid_.size(); }
    std::size_t size_per_comp() const { return grid_.size(); }

    // Sets the +-k pair of one component consistently with reality.
    void set_mode(int comp, int k1, int k2, cplx value) {
        at(comp, k1, k2) = value;
        at(comp, -k1, -k2) = std::conj(value);
        if (k1 == 0 && k2 == 0) at(comp, 0, 0) = cplx{value.real(), 0.0};
    }

    SpectralField& operator+=(const SpectralField& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    SpectralField& operator*=(double c) {
        for (auto& v : a_) v *= c;
        return *this;
    }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double c, SpectralField a) { return a *= c; }

    // this += c * o, the workhorse of every time stepper.
    void axpy(double c, const SpectralField& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += c * o.a_[i];
    }

    void set_zero() {
        for (auto& v : a_) v = cplx{0.0, 0.0};
    }

    // max_k |k . u_k|, the divergence in coefficient space.
    double max_divergence() const {
        double m = 0.0;
        for (int k1 = -grid_.half_h(); k1 <= grid_.half_h(); ++k1)
            for (int k2 = -grid_.half_v(); k2 <= grid_.half_v(); ++k2) {
                const cplx d = double(k1) * at(0, k1, k2) + double(k2) * at(1, k1, k2);
                m = std::max(m, std::abs(d));
            }
        return m;
    }

    // max_k |u_k - conj(u_{-k})| over both components.
    double reality_defect() const {
        double m = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int k1 = -grid_.half_h(); k1 <= grid_.half_h(); ++k1)
                for (int k2 = -grid_.half_v(); k2 <= grid_.half_v(); ++k2)
                    m = std::max(m, std::abs(at(c, k1, k2) - std::conj(at(c, -k1, -k2))));
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        for (const auto& v : a_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

private:
    void check_same_grid(const SpectralField& o) const {
        if (grid_ != o.grid_) throw std::invalid_argument("SpectralField: grid mismatch");
    }

    Grid grid_;
    std::vector<cplx> a_;
};

// Coefficient-space scalar product sum_k u_k . conj(v_k) (real part; the
// imaginary part vanishes for real fields). With this convention <u,u> is
// exactly the squared L2 coefficient norm used throughout.
inline double inner_product(const SpectralField& u, const SpectralField& v) {
    if (u.grid() != v.grid()) throw std::invalid_argument("inner_product: grid mismatch");
    double s = 0.0;
    for (int c = 0; c < 2; ++c) {
        const cplx* a = u.data(c);
        const cplx* b = v.data(c);
        for (std::size_t i = 0; i < u.size_per_comp(); ++i)
            s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    }
    return s;
}

} // namespace aniso
