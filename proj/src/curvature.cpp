#include "srnf/curvature.hpp"
#include "srnf/generators.hpp"
#include "srnf/kdtree.hpp"
#include "srnf/metric.hpp"
#include <cmath>

namespace srnflab {

CurvatureField gaussian_curvature(const SurfaceImmersion& f) {
    auto normals = unit_normal(f); // throws DegenerateImmersion on bad samples
    CurvatureField out;
    out.K.resize(f.patches.size());
    out.H.resize(f.patches.size());
    out.shape_operator_ok.resize(f.patches.size());
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
        const auto& p = f.patches[pi];
        out.K[pi].resize(p.size());
        out.H[pi].resize(p.size());
        out.shape_operator_ok[pi].resize(p.size());
        for (int i = 0; i < p.nu; ++i)
            for (int j = 0; j < p.nv; ++j) {
                std::size_t k = p.idx(i, j);
                Vec3 fu = p.du(i, j), fv = p.dv(i, j);
                const Vec3& n = normals[pi][k];
                double E = fu.dot(fu), F = fu.dot(fv), G = fv.dot(fv);
                double e = p.duu(i, j).dot(n), m = p.duv(i, j).dot(n), g = p.dvv(i, j).dot(n);
                double detI = E * G - F * F;
                double K = (e * g - m * m) / detI;
                double H = (e * G - 2 * m * F + g * E) / (2 * detI);
                out.K[pi][k] = K;
                out.H[pi][k] = H;
                out.shape_operator_ok[pi][k] = std::isfinite(K) && std::isfinite(H) && detI > 0;
            }
    }
    return out;
}

std::vector<std::vector<double>> gauss_map_area_factor(const SurfaceImmersion& f) {
    auto normals = unit_normal(f);
    auto cross_f = tangent_cross(f);
    std::vector<std::vector<double>> out(f.patches.size());
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
        const auto& p = f.patches[pi];
        const auto& np = normals[pi];
        out[pi].resize(p.size());
        for (int i = 0; i < p.nu; ++i)
            for (int j = 0; j < p.nv; ++j) {
                Vec3 nu_ = stencil::d1([&](int ii) { return np[p.idx(ii, j)]; }, i, p.nu, p.hu(), p.periodic_u);
                Vec3 nv_ = stencil::d1([&](int jj) { return np[p.idx(i, jj)]; }, j, p.nv, p.hv(), p.periodic_v);
                out[pi][p.idx(i, j)] = nu_.cross(nv_).norm() / cross_f[pi][p.idx(i, j)].norm();
            }
    }
    return out;
}

double gauss_bonnet_check(const SurfaceImmersion& f) {
    if (!f.is_closed()) throw NotClosed("Gauss-Bonnet check needs a closed surface (every edge seam-identified)");
    auto curv = gaussian_curvature(f);
    auto cross_f = tangent_cross(f);
    double total = 0;
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
        const auto& p = f.patches[pi];
        for (std::size_t k = 0; k < p.size(); ++k) total += curv.K[pi][k] * cross_f[pi][k].norm() * p.weight[k];
    }
    return total;
}

namespace {

int sphere_layout_n(const SurfaceImmersion& f) {
    if (f.patches.size() != 6) throw GridMismatch("expected the six-patch sphere layout");
    int n = f.patches[0].nu;
    for (const auto& p : f.patches) {
        if (p.nu != n || p.nv != n) throw GridMismatch("expected square sphere patches of one size");
        if (std::abs(p.domain.u0 + kPi / 4) > 1e-12 || std::abs(p.domain.u1 - kPi / 4) > 1e-12 ||
            std::abs(p.domain.v0 + kPi / 4) > 1e-12 || std::abs(p.domain.v1 - kPi / 4) > 1e-12)
            throw GridMismatch("expected sphere patch domains [-pi/4, pi/4]^2");
    }
    return n;
}

struct MeanDisplacement {
    Vec3 mean;
    double max_residual;
};

MeanDisplacement displacement_stats(const SurfaceImmersion& a, const SurfaceImmersion& b) {
    Vec3 sum = Vec3::Zero();
    double wsum = 0;
    for (std::size_t pi = 0; pi < a.patches.size(); ++pi) {
        const auto& pa = a.patches[pi];
        const auto& pb = b.patches[pi];
        for (std::size_t k = 0; k < pa.size(); ++k) {
            double w = pa.weight[k] * pa.density[k];
            sum += w * (pa.pos[k] - pb.pos[k]);
            wsum += w;
        }
    }
    Vec3 mean = sum / wsum;
    double worst = 0;
    for (std::size_t pi = 0; pi < a.patches.size(); ++pi) {
        const auto& pa = a.patches[pi];
        const auto& pb = b.patches[pi];
        for (std::size_t k = 0; k < pa.size(); ++k)
            worst = std::max(worst, (pa.pos[k] - pb.pos[k] - mean).norm());
    }
    return {mean, worst};
}

} // namespace

RigidityReport sphere_rigidity_probe(const SurfaceImmersion& f, double floor) {
    SurfaceImmersion sphere = gen_sphere(sphere_layout_n(f));
    RigidityReport rep;
    rep.floor = floor;
    rep.distance = srnf_distance(srnf(sphere), srnf(f));
    rep.exceeds_floor = rep.distance > floor;
    auto disp = displacement_stats(f, sphere);
    rep.mean_translation = disp.mean;
    rep.translate_residual = disp.max_residual;
    rep.is_translate = disp.max_residual <= 1e-10;
    return rep;
}

ConvexReport convex_uniqueness_probe(const SurfaceImmersion& f1, const SurfaceImmersion& f2, double tolerance) {
    if (!f1.is_closed() || !f2.is_closed()) throw NotClosed("convex uniqueness probe needs closed surfaces");
    double diag = std::max(f1.bbox_diag(), f2.bbox_diag());
    double k_floor = 1e-8 / (diag * diag);

    auto curv1 = gaussian_curvature(f1);
    auto curv2 = gaussian_curvature(f2);
    for (const auto& patch : curv1.K)
        for (double K : patch)
            if (!(K > k_floor)) throw NotConvex("first immersion is not strictly convex at some sample");
    for (const auto& patch : curv2.K)
        for (double K : patch)
            if (!(K > k_floor)) throw NotConvex("second immersion is not strictly convex at some sample");

    auto n1 = unit_normal(f1);
    auto n2 = unit_normal(f2);
    // the grid must resolve the Gauss map: neighboring normals stay close
    auto check_dispersion = [](const SurfaceImmersion& f, const std::vector<std::vector<Vec3>>& nf) {
        for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
            const auto& p = f.patches[pi];
            for (int i = 0; i + 1 < p.nu; ++i)
                for (int j = 0; j + 1 < p.nv; ++j) {
                    double c = std::min(nf[pi][p.idx(i, j)].dot(nf[pi][p.idx(i + 1, j)]),
                                        nf[pi][p.idx(i, j)].dot(nf[pi][p.idx(i, j + 1)]));
                    if (c < std::cos(0.5))
                        throw NotConvex("normal grid dispersion too coarse to resolve the Gauss map");
                }
        }
    };
    check_dispersion(f1, n1);
    check_dispersion(f2, n2);

    ConvexReport rep;
    rep.tolerance = tolerance;
    rep.distance = srnf_distance(srnf(f1), srnf(f2));
    rep.within_tolerance = rep.distance <= tolerance;

    auto disp = displacement_stats(f1, f2);
    rep.mean_translation = disp.mean;
    rep.translate_residual = disp.max_residual;
    rep.translates_match = disp.max_residual <= 1e-6 * diag;

    // curvature discrepancy under normal matching: for each f1-sample, find
    // the f2-sample with the nearest unit normal and compare K values
    std::vector<Vec3> n2_flat;
    std::vector<double> k2_flat;
    for (std::size_t pi = 0; pi < n2.size(); ++pi)
        for (std::size_t k = 0; k < n2[pi].size(); ++k) {
            n2_flat.push_back(n2[pi][k]);
            k2_flat.push_back(curv2.K[pi][k]);
        }
    KdTree tree(n2_flat);
    double witness = 0;
    std::size_t total = 0;
    for (const auto& patch : n1) total += patch.size();
    std::size_t stride = std::max<std::size_t>(1, total / 20000);
    std::size_t counter = 0;
    for (std::size_t pi = 0; pi < n1.size(); ++pi)
        for (std::size_t k = 0; k < n1[pi].size(); ++k) {
            if (counter++ % stride != 0) continue;
            std::size_t match = tree.nearest(n1[pi][k]);
            witness = std::max(witness, std::abs(curv1.K[pi][k] - k2_flat[match]));
        }
    rep.k_witness = witness;
    return rep;
}

} // namespace srnflab
