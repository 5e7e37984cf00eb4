#pragma once

// Cylindrical Wiener increments: per step, J independent N(0,dt) draws.
// Paths regenerate bit-identically from (seed, dt, steps, J), and a path
// refined at dt/m coarsens to the dt path by exact increment summation,
// which is what the pathwise self-convergence checks rely on.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace aniso {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Per-sample seed stream: order-independent, collision-scrambled.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

class WienerPath {
public:
    WienerPath() = default;
    WienerPath(std::uint64_t seed, double dt, int steps, int J)
        : seed_(seed), dt_(dt), steps_(steps), J_(J), dw_(std::size_t(steps) * J) {
        if (dt <= 0.0 || steps < 1 || J < 1)
            throw std::invalid_argument("WienerPath: need dt > 0, steps >= 1, J >= 1");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double scale = std::sqrt(dt);
        for (auto& x : dw_) x = scale * gauss(rng);
    }

    std::uint64_t seed() const { return seed_; }
    double dt() const { return dt_; }
    int steps() const { return steps_; }
    int J() const { return J_; }

    double dw(int n, int j) const { return dw_[std::size_t(n) * J_ + j]; }
    const double* row(int n) const { return dw_.data() + std::size_t(n) * J_; }

    // Sum consecutive groups of `factor` increments: the same Brownian path
    // viewed on the coarser grid.
    WienerPath coarsen(int factor) const {
        if (factor < 1 || steps_ % factor != 0)
            throw std::invalid_argument("WienerPath::coarsen: factor must divide steps");
        WienerPath out;
        out.seed_ = seed_;
        out.dt_ = dt_ * factor;
        out.steps_ = steps_ / factor;
        out.J_ = J_;
        out.dw_.assign(std::size_t(out.steps_) * J_, 0.0);
        for (int n = 0; n < steps_; ++n)
            for (int j = 0; j < J_; ++j) out.dw_[std::size_t(n / factor) * J_ + j] += dw(n, j);
        return out;
    }

private:
    std::uint64_t seed_ = 0;
    double dt_ = 0.0;
    int steps_ = 0;
    int J_ = 0;
    std::vector<double> dw_;
};

} // namespace aniso
