#include "srnf/metric.hpp"
#include <cmath>

namespace srnflab {

namespace {

void require_same_layout(const SrnfField& a, const SrnfField& b) {
    if (a.patch_count() != b.patch_count()) throw GridMismatch("patch counts differ");
    for (std::size_t p = 0; p < a.patch_count(); ++p) {
        const auto& ma = a.meta[p];
        const auto& mb = b.meta[p];
        if (ma.nu != mb.nu || ma.nv != mb.nv) throw GridMismatch("sample counts differ on patch " + std::to_string(p));
        if (std::abs(ma.domain.u0 - mb.domain.u0) > 1e-12 || std::abs(ma.domain.u1 - mb.domain.u1) > 1e-12 ||
            std::abs(ma.domain.v0 - mb.domain.v0) > 1e-12 || std::abs(ma.domain.v1 - mb.domain.v1) > 1e-12)
            throw GridMismatch("parameter domains differ on patch " + std::to_string(p));
        for (std::size_t k = 0; k < a.rw[p].size(); ++k) {
            double ref = std::max(std::abs(a.rw[p][k]), std::abs(b.rw[p][k]));
            if (std::abs(a.rw[p][k] - b.rw[p][k]) > 1e-12 * ref)
                throw GridMismatch("quadrature weights differ on patch " + std::to_string(p));
        }
    }
}

} // namespace

double l2_inner(const SrnfField& q1, const SrnfField& q2) {
    require_same_layout(q1, q2);
    double s = 0;
    for (std::size_t p = 0; p < q1.patch_count(); ++p)
        for (std::size_t k = 0; k < q1.values[p].size(); ++k)
            s += q1.values[p][k].dot(q2.values[p][k]) * q1.rw[p][k];
    return s;
}

double srnf_distance(const SrnfField& q1, const SrnfField& q2) {
    require_same_layout(q1, q2);
    double s = 0;
    for (std::size_t p = 0; p < q1.patch_count(); ++p)
        for (std::size_t k = 0; k < q1.values[p].size(); ++k)
            s += (q1.values[p][k] - q2.values[p][k]).squaredNorm() * q1.rw[p][k];
    return std::sqrt(s);
}

double srnf_distance(const SurfaceImmersion& f1, const SurfaceImmersion& f2) {
    return srnf_distance(srnf(f1), srnf(f2));
}

double samplewise_max_dev(const SrnfField& q1, const SrnfField& q2) {
    require_same_layout(q1, q2);
    double worst = 0;
    for (std::size_t p = 0; p < q1.patch_count(); ++p)
        for (std::size_t k = 0; k < q1.values[p].size(); ++k)
            worst = std::max(worst, (q1.values[p][k] - q2.values[p][k]).norm());
    return worst;
}

SrnfField rotate_field(const SrnfField& q, const RigidMotion& m) {
    m.validate();
    SrnfField out = q;
    for (auto& patch : out.values)
        for (auto& v : patch) v = m.R * v;
    return out;
}

} // namespace srnflab
