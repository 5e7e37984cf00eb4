#pragma once

// Concrete diffusion coefficients sigma(t,u) with machine-checkable growth
// and Lipschitz constants. Two families over the same direction set:
//
//   additive:                column_j = q_j e_j
//   diagonal-multiplicative: column_j = q_j * s_c(<u, e_j>) * e_j,
//                            s_c(y) = (1-c) + c tanh(y)
//
// The e_j are unit-H-norm real cos/sin pairs on the lowest-|k| divergence
// free wavevectors (inside the dealias mask), so constants reduce to closed
// sums over the weights: neither family reads d1 u, hence K2=Kt2=L2=0 and
// the well-posedness margins (2/21 and 1/5 on the dissipation-reading
// constants) hold with room to spare.

#include <anisoflow/field.hpp>
#include <anisoflow/norms.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aniso {

enum class NoiseKind { additive, diagonal_multiplicative };
enum class DecayKind { geometric, power };
enum class NoiseSpace { h_minus1, h, h01 };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::additive;
    int J = 8;
    DecayKind decay = DecayKind::geometric;
    double rate = 0.5;    // q_j = rate^j (geometric) or (1+j)^{-rate} (power)
    double coupling = 0.0; // strength c of the u-dependence, in [0,1]
};

struct NoiseConstants {
    double K0p = 0, K1p = 0;        // (A0), target H^{-1}
    double K0 = 0, K1 = 0, K2 = 0;  // (A1), target H
    double Kt0 = 0, Kt1 = 0, Kt2 = 0; // (A2), target H^{0,1}
    double L1 = 0, L2 = 0;          // (A3), Lipschitz in H
    double tail_bound = 0;          // analytic tail sum_{j>=J} q_j^2 of the weight law
};

class NoiseModel {
public:
    static NoiseModel make(const Grid& g, const NoiseSpec& spec) {
        if (spec.J < 1) throw std::invalid_argument("NoiseModel: J must be >= 1");
        if (spec.coupling < 0.0 || spec.coupling > 1.0)
            throw std::invalid_argument("NoiseModel: coupling must lie in [0,1]");
        if (spec.decay == DecayKind::geometric && (spec.rate <= 0.0 || spec.rate >= 1.0))
            throw std::invalid_argument("NoiseModel: geometric decay rate must lie in (0,1)");
        if (spec.decay == DecayKind::power && spec.rate <= 0.5)
            throw std::invalid_argument(
                "NoiseModel: power decay rate must exceed 1/2 for a summable q^2 tail");

        NoiseModel m;
        m.grid_ = g;
        m.spec_ = spec;
        const auto wavevecs = direction_wavevectors(g, (spec.J + 1) / 2);
        if (int(wavevecs.size()) * 2 < spec.J)
            throw std::invalid_argument("NoiseModel: J=" + std::to_string(spec.J) +
                                        " exceeds the divergence-free directions on this grid");
        for (int j = 0; j < spec.J; ++j) {
            const auto [k1, k2] = wavevecs[j / 2];
            m.e_.push_back(direction_field(g, k1, k2, j % 2 == 1));
            m.k_.push_back({k1, k2});
            m.q_.push_back(weight(spec, j));
        }
        m.constants_ = certified_constants(m);
        return m;
    }

    const Grid& grid() const { return grid_; }
    const NoiseSpec& spec() const { return spec_; }
    int J() const { return spec_.J; }
    double q(int j) const { return q_.at(j); }
    const SpectralField& direction(int j) const { return e_.at(j); }
    const NoiseConstants& constants() const { return constants_; }

    // Saturating profile with |s_c|<=1, Lipschitz constant c; c=0 is the
    // additive reduction.
    double profile(double y) const {
        const double c = effective_coupling();
        return (1.0 - c) + c * std::tanh(y);
    }
    double column_scale(int j, const SpectralField& u) const {
        if (spec_.kind == NoiseKind::additive) return q_[j];
        return q_[j] * profile(inner_product(u, e_[j]));
    }

    // sigma(t,u) applied to an l2 vector: sum_j xi_j * column_j. The time
    // argument is carried for interface fidelity; both families are
    // autonomous.
    SpectralField apply(double /*t*/, const SpectralField& u, std::span<const double> xi) const {
        if (int(xi.size()) != spec_.J)
            throw std::invalid_argument("NoiseModel::apply: xi length " +
                                        std::to_string(xi.size()) + " != J=" +
                                        std::to_string(spec_.J));
        SpectralField out(grid_);
        for (int j = 0; j < spec_.J; ++j) {
            const double w = xi[j] * column_scale(j, u);
            if (w != 0.0) out.axpy(w, e_[j]);
        }
        return out;
    }

    // Hilbert-Schmidt norm sum_j ||column_j||^2 in the requested target space.
    double hs_norm_sq(double /*t*/, const SpectralField& u, NoiseSpace target) const {
        double s = 0.0;
        for (int j = 0; j < spec_.J; ++j) {
            const double w = column_scale(j, u);
            s += w * w * direction_weight(target, j);
        }
        return s;
    }

    // Right-hand side of the growth condition matching `target`, evaluated
    // with the certified constants at the field u.
    double growth_rhs(const SpectralField& u, NoiseSpace target) const {
        const NoiseConstants& c = constants_;
        const double u_h = aniso_norm_sq(u, 0.0, 0.0);
        switch (target) {
            case NoiseSpace::h_minus1:
                return c.K0p + c.K1p * u_h;
            case NoiseSpace::h:
                return c.K0 + c.K1 * u_h; // K2 term is identically zero
            case NoiseSpace::h01:
                return c.Kt0 + c.Kt1 * aniso_norm_sq(u, 0.0, 1.0); // Kt2 term zero
        }
        return 0.0;
    }

    bool certify(double t, const SpectralField& u, NoiseSpace target, double* value = nullptr,
                 double* bound = nullptr) const {
        const double v = hs_norm_sq(t, u, target);
        const double b = growth_rhs(u, target);
        if (value) *value = v;
        if (bound) *bound = b;
        return v <= b * (1.0 + 1e-12) + 1e-300;
    }

    // ||e_j||^2 in the target space; single-wavevector fields make these
    // pure lattice weights.
    double direction_weight(NoiseSpace target, int j) const {
        const auto [k1, k2] = k_[j];
        const double kk = double(k1) * k1 + double(k2) * k2;
        switch (target) {
            case NoiseSpace::h_minus1: return 1.0 / (1.0 + kk);
            case NoiseSpace::h: return 1.0;
            case NoiseSpace::h01: return 1.0 + double(k2) * k2;
        }
        return 1.0;
    }

private:
    double effective_coupling() const {
        return spec_.kind == NoiseKind::additive ? 0.0 : spec_.coupling;
    }

    static double weight(const NoiseSpec& spec, int j) {
        return spec.decay == DecayKind::geometric ? std::pow(spec.rate, j)
                                                  : std::pow(1.0 + j, -spec.rate);
    }

    // Lowest-|k| wavevectors, one representative per +-k pair, ordered by
    // (|k|^2, k1, k2), restricted to the dealias mask.
    static std::vector<std::pair<int, int>> direction_wavevectors(const Grid& g, int count) {
        std::vector<std::pair<int, int>> all;
        for (int k1 = 0; k1 <= g.half_h(); ++k1)
            for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
                if (k1 == 0 && k2 <= 0) continue;
                if (!g.in_mask(k1, k2)) continue;
                all.emplace_back(k1, k2);
            }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            const long ra = long(a.first) * a.first + long(a.second) * a.second;
            const long rb = long(b.first) * b.first + long(b.second) * b.second;
            return std::tie(ra, a.first, a.second) < std::tie(rb, b.first, b.second);
        });
        if (int(all.size()) > count) all.resize(count);
        return all;
    }

    // Unit-H-norm real field sqrt(2) * (k_perp/|k|) * {cos,sin}(k.x).
    static SpectralField direction_field(const Grid& g, int k1, int k2, bool sin_phase) {
        SpectralField e(g);
        const double inv = 1.0 / std::sqrt(double(k1) * k1 + double(k2) * k2);
        const double p1 = -double(k2) * inv, p2 = double(k1) * inv;
        const double amp = std::sqrt(2.0) / 2.0;
        const cplx coeff = sin_phase ? cplx{0.0, -amp} : cplx{amp, 0.0};
        e.set_mode(0, k1, k2, p1 * coeff);
        e.set_mode(1, k1, k2, p2 * coeff);
        return e;
    }

    static NoiseConstants certified_constants(const NoiseModel& m) {
        NoiseConstants c;
        double q2 = 0.0;
        for (int j = 0; j < m.spec_.J; ++j) {
            const double qq = m.q_[j] * m.q_[j];
            q2 += qq;
            c.K0p += qq * m.direction_weight(NoiseSpace::h_minus1, j);
            c.Kt0 += qq * m.direction_weight(NoiseSpace::h01, j);
        }
        c.K0 = q2;
        const double cc = m.effective_coupling();
        c.L1 = cc * cc * q2; // |s_c(a)-s_c(b)| <= c|a-b|, <u-v,e_j>^2 <= ||u-v||^2
        // K1, K2, K1p, Kt1, Kt2, L2 stay zero: |s_c| <= 1 and sigma never
        // reads d1 u.
        if (m.spec_.decay == DecayKind::geometric) {
            const double r2 = m.spec_.rate * m.spec_.rate;
            c.tail_bound = std::pow(r2, m.spec_.J) / (1.0 - r2);
        } else {
            // integral bound on sum_{j>=J} (1+j)^{-2r}
            const double r2 = 2.0 * m.spec_.rate;
            c.tail_bound = std::pow(double(m.spec_.J), 1.0 - r2) / (r2 - 1.0);
        }
        return c;
    }

    Grid grid_;
    NoiseSpec spec_;
    std::vector<double> q_;
    std::vector<SpectralField> e_;
    std::vector<std::pair<int, int>> k_;
    NoiseConstants constants_;
};

// Well-posedness margins on the dissipation-reading constants.
inline bool below_thresholds(const NoiseConstants& c) {
    return c.K2 < 2.0 / 21.0 && c.Kt2 < 1.0 / 5.0 && c.L2 < 1.0 / 5.0;
}

} // namespace aniso
