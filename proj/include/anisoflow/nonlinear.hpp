#pragma once

// The convection operator and trilinear form:
//   convect(u,v)      = u . grad v, exact truncated convolution (padded grid)
//   nonlinear_term    = B(u,v) = dealias(P_H(u . grad v))
//   trilinear(u,v,w)  = <B(u,v), w> plus its estimate's norm ratio
// Products are evaluated pointwise on the padded collocation grid, so the
// retained-mode result equals the dense convolution sum to rounding.

#include <anisoflow/fft.hpp>
#include <anisoflow/field.hpp>
#include <anisoflow/norms.hpp>
#include <anisoflow/ops.hpp>

#include <stdexcept>
#include <vector>

namespace aniso {

// u . grad v with no projection and no mask; the raw advection term used by
// the appendix diagnostics. Output lives on the retained lattice (higher
// product modes are truncated, which is invisible to any pairing with a
// lattice field).
inline SpectralField convect(const SpectralField& u, const SpectralField& v,
                             TransformWorkspace& ws) {
    if (u.grid() != v.grid() || u.grid() != ws.grid())
        throw std::invalid_argument("convect: grid mismatch");
    const std::size_t n = ws.points();
    std::vector<double> u1, u2, dv, acc(n);
    ws.to_physical(u, 0, u1);
    ws.to_physical(u, 1, u2);
    SpectralField out(u.grid());
    SpectralField d1v = derivative(v, 1);
    SpectralField d2v = derivative(v, 2);
    for (int comp = 0; comp < 2; ++comp) {
        ws.to_physical(d1v, comp, dv);
        for (std::size_t i = 0; i < n; ++i) acc[i] = u1[i] * dv[i];
        ws.to_physical(d2v, comp, dv);
        for (std::size_t i = 0; i < n; ++i) acc[i] += u2[i] * dv[i];
        ws.to_spectral(acc, out, comp);
    }
    return out;
}

// Transpose of x |-> convect(x, u) in the coefficient inner product:
// component j of the output is sum_i y_i d_j u_i, so that
// <convect(x,u), y> = <x, convect_transpose(u,y)> exactly for lattice
// fields. Used by the discrete adjoint of the skeleton dynamics.
inline SpectralField convect_transpose(const SpectralField& u, const SpectralField& y,
                                       TransformWorkspace& ws) {
    if (u.grid() != y.grid() || u.grid() != ws.grid())
        throw std::invalid_argument("convect_transpose: grid mismatch");
    const std::size_t n = ws.points();
    std::vector<double> y1, y2, du, acc(n);
    ws.to_physical(y, 0, y1);
    ws.to_physical(y, 1, y2);
    SpectralField out(u.grid());
    for (int axis = 1; axis <= 2; ++axis) {
        const SpectralField dju = derivative(u, axis);
        ws.to_physical(dju, 0, du);
        for (std::size_t i = 0; i < n; ++i) acc[i] = y1[i] * du[i];
        ws.to_physical(dju, 1, du);
        for (std::size_t i = 0; i < n; ++i) acc[i] += y2[i] * du[i];
        ws.to_spectral(acc, out, axis - 1);
    }
    return out;
}

// B(u,v) = P_H(u . grad v), dealiased per the grid's mask.
inline SpectralField nonlinear_term(const SpectralField& u, const SpectralField& v,
                                    TransformWorkspace& ws) {
    SpectralField b = project_leray(convect(u, v, ws));
    apply_dealias_mask(b);
    return b;
}

struct TrilinearReport {
    double value = 0.0;     // b(u,v,w) = <B(u,v), w>
    double bound_rhs = 0.0; // ||u||_{H^{1,0}} ||v||_{H^{1,1}} ||w||_{L2}, unit constant
    double ratio = 0.0;     // |value| / bound_rhs when the latter is positive
};

inline TrilinearReport trilinear(const SpectralField& u, const SpectralField& v,
                                 const SpectralField& w, TransformWorkspace& ws) {
    TrilinearReport r;
    r.value = inner_product(nonlinear_term(u, v, ws), w);
    r.bound_rhs = aniso_norm(u, 1.0, 0.0) * aniso_norm(v, 1.0, 1.0) * norm_h(w);
    r.ratio = (r.bound_rhs > 0.0) ? std::abs(r.value) / r.bound_rhs : 0.0;
    return r;
}

} // namespace aniso
