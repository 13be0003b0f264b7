#include "srnf/reparam.hpp"
#include <cmath>

namespace srnflab {

namespace {

// FD Jacobian of φ, differencing the displacement φ − id so that wrap
// stencils remain valid for unwrapped angular maps (φ − id is periodic even
// when φ itself shifts by whole periods).
std::vector<double> fd_jacobian_det(const SrnfGridMeta& m, const std::vector<Vec2>& phi) {
    double hu = m.domain.width() / (m.nu - 1);
    double hv = m.domain.height() / (m.nv - 1);
    std::vector<Vec2> disp(phi.size());
    for (int i = 0; i < m.nu; ++i)
        for (int j = 0; j < m.nv; ++j) {
            std::size_t k = std::size_t(i) * m.nv + j;
            disp[k] = phi[k] - Vec2(m.domain.u0 + i * hu, m.domain.v0 + j * hv);
        }
    std::vector<double> det(phi.size());
    for (int i = 0; i < m.nu; ++i)
        for (int j = 0; j < m.nv; ++j) {
            Vec2 gu = stencil::d1([&](int ii) { return disp[std::size_t(ii) * m.nv + j]; }, i, m.nu, hu, m.periodic_u);
            Vec2 gv = stencil::d1([&](int jj) { return disp[std::size_t(i) * m.nv + jj]; }, j, m.nv, hv, m.periodic_v);
            double a11 = gu.x() + 1, a12 = gv.x();
            double a21 = gu.y(), a22 = gv.y() + 1;
            det[std::size_t(i) * m.nv + j] = a11 * a22 - a12 * a21;
        }
    return det;
}

void check_containment(const SrnfGridMeta& m, const std::vector<Vec2>& phi) {
    constexpr double tol = 1e-9;
    for (const auto& y : phi) {
        if (!m.periodic_u && (y.x() < m.domain.u0 - tol || y.x() > m.domain.u1 + tol))
            throw OutOfDomain("reparametrization leaves the u-range of its patch");
        if (!m.periodic_v && (y.y() < m.domain.v0 - tol || y.y() > m.domain.v1 + tol))
            throw OutOfDomain("reparametrization leaves the v-range of its patch");
    }
}

} // namespace

void Reparametrization::validate() const {
    if (patches.empty()) throw SpecInvalid("Reparametrization: no patches");
    for (const auto& rp : patches) {
        if (rp.meta.nu < 3 || rp.meta.nv < 3) throw SpecInvalid("Reparametrization: grid too small");
        std::size_t n = std::size_t(rp.meta.nu) * rp.meta.nv;
        if (rp.phi.size() != n || rp.area_factor_b.size() != n)
            throw SpecInvalid("Reparametrization: sample-count mismatch");
        check_containment(rp.meta, rp.phi);
        auto det = fd_jacobian_det(rp.meta, rp.phi);
        for (std::size_t k = 0; k < n; ++k) {
            if (!(det[k] > 0)) throw SpecInvalid("Reparametrization: Jacobian determinant not strictly positive");
            if (std::abs(rp.area_factor_b[k] - det[k]) > 1e-8 * std::abs(det[k]))
                throw SpecInvalid("Reparametrization: area factor disagrees with the Jacobian determinant");
        }
    }
}

Reparametrization make_reparametrization(const std::vector<SrnfGridMeta>& meta,
                                         const std::function<Vec2(int patch, double u, double v)>& map) {
    Reparametrization out;
    for (std::size_t p = 0; p < meta.size(); ++p) {
        ReparamPatch rp;
        rp.meta = meta[p];
        const auto& m = rp.meta;
        double hu = m.domain.width() / (m.nu - 1);
        double hv = m.domain.height() / (m.nv - 1);
        rp.phi.resize(std::size_t(m.nu) * m.nv);
        for (int i = 0; i < m.nu; ++i)
            for (int j = 0; j < m.nv; ++j)
                rp.phi[std::size_t(i) * m.nv + j] = map(int(p), m.domain.u0 + i * hu, m.domain.v0 + j * hv);
        check_containment(m, rp.phi);
        rp.area_factor_b = fd_jacobian_det(m, rp.phi);
        for (double b : rp.area_factor_b)
            if (!(b > 0)) throw SpecInvalid("Reparametrization: Jacobian determinant not strictly positive");
        out.patches.push_back(std::move(rp));
    }
    return out;
}

namespace {

// Catmull-Rom basis at local coordinate s ∈ [0,1] for points p_{-1},p0,p1,p2.
void cr_weights(double s, double w[4]) {
    double s2 = s * s, s3 = s2 * s;
    w[0] = 0.5 * (-s + 2 * s2 - s3);
    w[1] = 0.5 * (2 - 5 * s2 + 3 * s3);
    w[2] = 0.5 * (s + 4 * s2 - 3 * s3);
    w[3] = 0.5 * (-s2 + s3);
}

struct AxisStencil {
    int idx[4];   // sample indices; -1 / n mark virtual ghosts on open axes
    double w[4];
};

AxisStencil axis_stencil(double lo, double hi, int n, bool periodic, double x) {
    AxisStencil st;
    double h = (hi - lo) / (n - 1);
    if (periodic) {
        double period = hi - lo;
        double t = std::fmod(x - lo, period);
        if (t < 0) t += period;
        int i0 = int(std::floor(t / h));
        int nn = n - 1; // last sample duplicates the first
        if (i0 >= nn) i0 = nn - 1;
        double s = t / h - i0;
        cr_weights(s, st.w);
        for (int a = 0; a < 4; ++a) {
            int i = i0 - 1 + a;
            st.idx[a] = ((i % nn) + nn) % nn;
        }
    } else {
        double xc = std::min(std::max(x, lo), hi);
        int i0 = int(std::floor((xc - lo) / h));
        if (i0 > n - 2) i0 = n - 2;
        if (i0 < 0) i0 = 0;
        double s = (xc - lo) / h - i0;
        cr_weights(s, st.w);
        for (int a = 0; a < 4; ++a) st.idx[a] = i0 - 1 + a; // may be -1 or n
    }
    return st;
}

} // namespace

Vec3 bicubic_eval(const SrnfGridMeta& meta, const std::vector<Vec3>& values, double u, double v) {
    AxisStencil su = axis_stencil(meta.domain.u0, meta.domain.u1, meta.nu, meta.periodic_u, u);
    AxisStencil sv = axis_stencil(meta.domain.v0, meta.domain.v1, meta.nv, meta.periodic_v, v);
    auto raw = [&](int i, int j) { return values[std::size_t(i) * meta.nv + j]; };
    // quadratic extrapolation for ghost samples keeps cubic-order accuracy at open edges
    auto row = [&](int i, int j) -> Vec3 {
        if (j == -1) return 3 * raw(i, 0) - 3 * raw(i, 1) + raw(i, 2);
        if (j == meta.nv) return 3 * raw(i, meta.nv - 1) - 3 * raw(i, meta.nv - 2) + raw(i, meta.nv - 3);
        return raw(i, j);
    };
    auto cell = [&](int i, int j) -> Vec3 {
        if (i == -1) return 3 * row(0, j) - 3 * row(1, j) + row(2, j);
        if (i == meta.nu) return 3 * row(meta.nu - 1, j) - 3 * row(meta.nu - 2, j) + row(meta.nu - 3, j);
        return row(i, j);
    };
    Vec3 out = Vec3::Zero();
    for (int a = 0; a < 4; ++a) {
        Vec3 r = Vec3::Zero();
        for (int b = 0; b < 4; ++b) r += sv.w[b] * cell(su.idx[a], sv.idx[b]);
        out += su.w[a] * r;
    }
    return out;
}

SrnfField reparam_act(const SrnfField& q, const Reparametrization& phi) {
    phi.validate();
    if (q.patch_count() != phi.patches.size()) throw GridMismatch("reparametrization patch count differs from field");
    SrnfField out = q;
    for (std::size_t p = 0; p < q.patch_count(); ++p) {
        const auto& m = q.meta[p];
        const auto& rp = phi.patches[p];
        if (rp.meta.nu != m.nu || rp.meta.nv != m.nv || std::abs(rp.meta.domain.u0 - m.domain.u0) > 1e-12 ||
            std::abs(rp.meta.domain.u1 - m.domain.u1) > 1e-12 || std::abs(rp.meta.domain.v0 - m.domain.v0) > 1e-12 ||
            std::abs(rp.meta.domain.v1 - m.domain.v1) > 1e-12)
            throw GridMismatch("reparametrization grid differs from field grid on patch " + std::to_string(p));
        for (std::size_t k = 0; k < rp.phi.size(); ++k) {
            const Vec2& y = rp.phi[k];
            out.values[p][k] = std::sqrt(rp.area_factor_b[k]) * bicubic_eval(m, q.values[p], y.x(), y.y());
        }
    }
    return out;
}

} // namespace srnflab
