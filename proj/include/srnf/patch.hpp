#pragma once

#include "srnf/core.hpp"
#include <vector>
#include <cstddef>

namespace srnflab {

struct Rect {
    double u0 = 0, u1 = 1, v0 = 0, v1 = 1;
    double width() const { return u1 - u0; }
    double height() const { return v1 - v0; }
    double area() const { return width() * height(); }
};

/* Composite Newton-Cotes weights on n uniform samples spanning length L.
   Odd n: Simpson. Even n >= 4: Simpson + 3/8 tail, still 4th order. */
std::vector<double> quadrature_weights_1d(int n, double L);

/* Tensor-grid patch. Sample (i,j) lives at parameter
   (u0 + i*hu, v0 + j*hv) and is stored at index i*nv + j (v fastest).

   weight[] is the flat quadrature rule over the parameter rectangle
   (sums to domain.area()); density[] is the Riemannian area density of the
   underlying domain w.r.t. this parametrization, pinned by the reference
   immersion (1 for flat references). Integration over the domain manifold
   uses weight*density; area factors divide the cross-product norm by
   density. */
struct ParamPatch {
    Rect domain;
    int nu = 0, nv = 0;
    bool periodic_u = false; // opposite u-edges seam-identified, wrap stencils
    bool periodic_v = false;
    std::vector<Vec3> pos;
    std::vector<double> weight;
    std::vector<double> density;

    ParamPatch() = default;
    ParamPatch(Rect d, int nu_, int nv_);

    std::size_t idx(int i, int j) const { return std::size_t(i) * nv + j; }
    std::size_t size() const { return std::size_t(nu) * nv; }
    Vec3& at(int i, int j) { return pos[idx(i, j)]; }
    const Vec3& at(int i, int j) const { return pos[idx(i, j)]; }

    double hu() const { return domain.width() / (nu - 1); }
    double hv() const { return domain.height() / (nv - 1); }
    double u_of(int i) const { return domain.u0 + i * hu(); }
    double v_of(int j) const { return domain.v0 + j * hv(); }

    // 2nd-order first derivatives: central inside, one-sided at open edges,
    // wrap-around on periodic axes (the duplicated seam column mirrors idx 0).
    Vec3 du(int i, int j) const;
    Vec3 dv(int i, int j) const;
    // 2nd-order second derivatives, same boundary policy.
    Vec3 duu(int i, int j) const;
    Vec3 dvv(int i, int j) const;
    Vec3 duv(int i, int j) const;

    // Riemannian quadrature weight (density-weighted).
    double rweight(int i, int j) const { return weight[idx(i, j)] * density[idx(i, j)]; }

    /* Positivity/sum invariants; throws SpecInvalid. */
    void validate_weights() const;
};

/* Generic 1d stencil application over either grid axis. */
namespace stencil {

template <class F>
auto d1(F&& sample, int i, int n, double h, bool periodic) -> decltype(sample(0)) {
    if (periodic) {
        int im = (i - 1 < 0) ? n - 2 : i - 1;
        int ip = (i + 1 > n - 1) ? 1 : i + 1;
        return (sample(ip) - sample(im)) / (2 * h);
    }
    if (i == 0) return (-3.0 * sample(0) + 4.0 * sample(1) - sample(2)) / (2 * h);
    if (i == n - 1) return (3.0 * sample(n - 1) - 4.0 * sample(n - 2) + sample(n - 3)) / (2 * h);
    return (sample(i + 1) - sample(i - 1)) / (2 * h);
}

template <class F>
auto d2(F&& sample, int i, int n, double h, bool periodic) -> decltype(sample(0)) {
    double h2 = h * h;
    if (periodic) {
        int im = (i - 1 < 0) ? n - 2 : i - 1;
        int ip = (i + 1 > n - 1) ? 1 : i + 1;
        return (sample(ip) - 2.0 * sample(i) + sample(im)) / h2;
    }
    if (i == 0) return (2.0 * sample(0) - 5.0 * sample(1) + 4.0 * sample(2) - sample(3)) / h2;
    if (i == n - 1)
        return (2.0 * sample(n - 1) - 5.0 * sample(n - 2) + 4.0 * sample(n - 3) - sample(n - 4)) / h2;
    return (sample(i + 1) - 2.0 * sample(i) + sample(i - 1)) / h2;
}

} // namespace stencil

} // namespace srnflab
