#include "srnf/patch.hpp"
#include <cmath>

namespace srnflab {

std::vector<double> quadrature_weights_1d(int n, double L) {
    if (n < 3) throw InvalidParam("quadrature_weights_1d: need at least 3 samples");
    if (!(L > 0)) throw InvalidParam("quadrature_weights_1d: span must be positive");
    double h = L / (n - 1);
    std::vector<double> w(n, 0.0);
    if (n == 3 || n % 2 == 1) {
        w[0] = w[n - 1] = h / 3;
        for (int i = 1; i < n - 1; ++i) w[i] = (i % 2 == 1) ? 4 * h / 3 : 2 * h / 3;
        return w;
    }
    if (n == 4) {
        w[0] = w[3] = 3 * h / 8;
        w[1] = w[2] = 9 * h / 8;
        return w;
    }
    // even n >= 6: Simpson over samples [0 .. n-4], 3/8 rule over the last 3 intervals
    int m = n - 3; // samples in the Simpson block, odd count
    w[0] = w[m - 1] = h / 3;
    for (int i = 1; i < m - 1; ++i) w[i] = (i % 2 == 1) ? 4 * h / 3 : 2 * h / 3;
    w[n - 4] += 3 * h / 8;
    w[n - 3] += 9 * h / 8;
    w[n - 2] += 9 * h / 8;
    w[n - 1] += 3 * h / 8;
    return w;
}

ParamPatch::ParamPatch(Rect d, int nu_, int nv_) : domain(d), nu(nu_), nv(nv_) {
    if (nu < 3 || nv < 3) throw InvalidParam("ParamPatch: grid must be at least 3x3");
    if (!(d.width() > 0) || !(d.height() > 0)) throw InvalidParam("ParamPatch: empty domain");
    pos.assign(size(), Vec3::Zero());
    auto wu = quadrature_weights_1d(nu, d.width());
    auto wv = quadrature_weights_1d(nv, d.height());
    weight.resize(size());
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) weight[idx(i, j)] = wu[i] * wv[j];
    density.assign(size(), 1.0);
}

Vec3 ParamPatch::du(int i, int j) const {
    return stencil::d1([&](int k) { return at(k, j); }, i, nu, hu(), periodic_u);
}

Vec3 ParamPatch::dv(int i, int j) const {
    return stencil::d1([&](int k) { return at(i, k); }, j, nv, hv(), periodic_v);
}

Vec3 ParamPatch::duu(int i, int j) const {
    return stencil::d2([&](int k) { return at(k, j); }, i, nu, hu(), periodic_u);
}

Vec3 ParamPatch::dvv(int i, int j) const {
    return stencil::d2([&](int k) { return at(i, k); }, j, nv, hv(), periodic_v);
}

Vec3 ParamPatch::duv(int i, int j) const {
    // d/du applied to the dv field
    return stencil::d1([&](int k) { return dv(k, j); }, i, nu, hu(), periodic_u);
}

void ParamPatch::validate_weights() const {
    // Kahan summation: the 1e-12 invariant must not drown in accumulation
    // noise on large grids.
    double sum = 0, comp = 0;
    for (std::size_t k = 0; k < size(); ++k) {
        if (!(weight[k] > 0)) throw SpecInvalid("ParamPatch: non-positive quadrature weight");
        if (!(density[k] > 0)) throw SpecInvalid("ParamPatch: non-positive area density");
        double y = weight[k] - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double rel = std::abs(sum - domain.area()) / domain.area();
    if (rel > 1e-12) throw SpecInvalid("ParamPatch: quadrature weights do not sum to the domain area");
}

} // namespace srnflab
