#include "srnf/alignment.hpp"
#include "srnf/kdtree.hpp"
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace srnflab {

RigidMotion kabsch(const std::vector<Vec3>& x, const std::vector<Vec3>& y, const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size() || x.size() < 3)
        throw InvalidParam("kabsch: need at least 3 paired weighted points");
    double W = std::accumulate(w.begin(), w.end(), 0.0);
    Vec3 cx = Vec3::Zero(), cy = Vec3::Zero();
    for (std::size_t k = 0; k < x.size(); ++k) {
        cx += w[k] * x[k];
        cy += w[k] * y[k];
    }
    cx /= W;
    cy /= W;
    Mat3 H = Mat3::Zero();
    for (std::size_t k = 0; k < x.size(); ++k) H += w[k] * (x[k] - cx) * (y[k] - cy).transpose();
    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU(), V = svd.matrixV();
    Mat3 D = Mat3::Identity();
    D(2, 2) = ((V * U.transpose()).determinant() < 0) ? -1.0 : 1.0;
    RigidMotion m;
    m.R = V * D * U.transpose();
    m.t = cy - m.R * cx;
    return m;
}

namespace {

struct Cloud {
    std::vector<Vec3> pts;
    std::vector<double> w;
};

Cloud gather(const SurfaceImmersion& f) {
    Cloud c;
    for (const auto& p : f.patches) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            c.pts.push_back(p.pos[k]);
            c.w.push_back(p.weight[k] * p.density[k]);
        }
    }
    return c;
}

bool same_layout(const SurfaceImmersion& a, const SurfaceImmersion& b) {
    if (a.patches.size() != b.patches.size()) return false;
    for (std::size_t p = 0; p < a.patches.size(); ++p)
        if (a.patches[p].nu != b.patches[p].nu || a.patches[p].nv != b.patches[p].nv) return false;
    return true;
}

// Deterministic stride subsample keeping ~cap points.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    std::size_t stride = (n + cap - 1) / cap;
    if (stride < 1) stride = 1;
    for (std::size_t k = 0; k < n; k += stride) idx.push_back(k);
    return idx;
}

} // namespace

AlignmentReport certify_noncongruent(const SurfaceImmersion& f1, const SurfaceImmersion& f2, double threshold) {
    if (f1.total_samples() < 4096 || f2.total_samples() < 4096)
        throw InsufficientSamples("alignment certification needs at least 4096 samples per immersion");

    Cloud c1 = gather(f1), c2 = gather(f2);
    double diag = f1.bbox_diag();

    RigidMotion motion;
    motion.R = Mat3::Identity();
    motion.t = Vec3::Zero();
    if (same_layout(f1, f2)) {
        // index-paired fit is exact for true congruences
        motion = kabsch(c2.pts, c1.pts, c2.w);
    }

    KdTree tree(c1.pts);
    auto query_idx = subsample_indices(c2.pts.size(), 20000);

    auto rms_for = [&](const RigidMotion& m, bool refit) {
        std::vector<Vec3> moved, target;
        std::vector<double> w;
        double num = 0, den = 0;
        for (std::size_t k : query_idx) {
            Vec3 y = m.apply(c2.pts[k]);
            const Vec3& nn = c1.pts[tree.nearest(y)];
            num += c2.w[k] * (y - nn).squaredNorm();
            den += c2.w[k];
            if (refit) {
                moved.push_back(c2.pts[k]);
                target.push_back(nn);
                w.push_back(c2.w[k]);
            }
        }
        if (refit) motion = kabsch(moved, target, w);
        return std::sqrt(num / den);
    };

    double rms = rms_for(motion, true);
    for (int round = 1; round < 50; ++round) {
        double next = rms_for(motion, true);
        bool settled = std::abs(next - rms) < 1e-10 * diag;
        rms = next;
        if (round >= 10 && settled) break;
    }
    rms = rms_for(motion, false);

    AlignmentReport rep;
    rep.best_motion = motion;
    rep.rms_residual = rms;
    rep.threshold = threshold;
    rep.congruent = rms <= threshold;
    return rep;
}

AlignmentReport certify_noncongruent(const SurfaceImmersion& f1, const SurfaceImmersion& f2) {
    return certify_noncongruent(f1, f2, 1e-3 * f1.bbox_diag());
}

} // namespace srnflab
