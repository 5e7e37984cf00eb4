#pragma once

// Transform machinery between the retained coefficient lattice and a
// zero-padded collocation grid. The padded grid has 2n points per direction,
// which is more than the 3K+1 needed to evaluate quadratic products of
// retained modes without aliasing, so every pointwise product computed here
// agrees with the dense convolution truncated to the lattice.
//
// FFTW plan creation is not thread safe; creation is serialized behind a
// mutex while execution stays lock-free (one workspace per integrator).

#include <anisoflow/field.hpp>

#include <fftw3.h>

#include <mutex>
#include <vector>

namespace aniso {

class TransformWorkspace {
public:
    explicit TransformWorkspace(const Grid& g)
        : grid_(g), mh_(g.pad_h()), mv_(g.pad_v()) {
        const std::size_t n = std::size_t(mh_) * mv_;
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd_ = fftw_plan_dft_2d(mh_, mv_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(mh_, mv_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~TransformWorkspace() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    TransformWorkspace(const TransformWorkspace&) = delete;
    TransformWorkspace& operator=(const TransformWorkspace&) = delete;

    const Grid& grid() const { return grid_; }
    int points_h() const { return mh_; }
    int points_v() const { return mv_; }
    std::size_t points() const { return std::size_t(mh_) * mv_; }

    // One scalar component, coefficients -> values on the padded grid.
    // u(x_m) = sum_k u_k exp(i k.x_m) is FFTW's unnormalized backward DFT
    // with u_k scattered at the wrapped index (k mod M).
    void to_physical(const SpectralField& f, int comp, std::vector<double>& phys) {
        const Grid& g = grid_;
        const std::size_t n = points();
        for (std::size_t i = 0; i < n; ++i) buf_[i][0] = buf_[i][1] = 0.0;
        for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
            for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
                const cplx v = f.at(comp, k1, k2);
                const std::size_t idx = wrap(k1, mh_) * std::size_t(mv_) + wrap(k2, mv_);
                buf_[idx][0] += v.real();
                buf_[idx][1] += v.imag();
            }
        fftw_execute(bwd_);
        phys.resize(n);
        for (std::size_t i = 0; i < n; ++i) phys[i] = buf_[i][0];
    }

    // Values on the padded grid -> retained coefficients of one component.
    // Forward DFT divided by the number of points matches the (2pi)^{-2}
    // integral normalization for band-limited data.
    void to_spectral(const std::vector<double>& phys, SpectralField& f, int comp) {
        const Grid& g = grid_;
        const std::size_t n = points();
        for (std::size_t i = 0; i < n; ++i) {
            buf_[i][0] = phys[i];
            buf_[i][1] = 0.0;
        }
        fftw_execute(fwd_);
        const double scale = 1.0 / double(n);
        for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
            for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
                const std::size_t idx = wrap(k1, mh_) * std::size_t(mv_) + wrap(k2, mv_);
                f.at(comp, k1, k2) = cplx{buf_[idx][0] * scale, buf_[idx][1] * scale};
            }
    }

private:
    static std::size_t wrap(int k, int m) { return std::size_t((k % m + m) % m); }
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }

    Grid grid_;
    int mh_, mv_;
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
};

} // namespace aniso
