#include "srnf/surface.hpp"
#include <cmath>
#include <limits>

namespace srnflab {

const char* edge_name(int e) {
    switch (e) {
        case EdgeU0: return "u0";
        case EdgeU1: return "u1";
        case EdgeV0: return "v0";
        case EdgeV1: return "v1";
    }
    throw InvalidParam("edge_name: bad edge id");
}

int edge_from_name(const std::string& name) {
    if (name == "u0") return EdgeU0;
    if (name == "u1") return EdgeU1;
    if (name == "v0") return EdgeV0;
    if (name == "v1") return EdgeV1;
    throw SpecInvalid("unknown edge name: " + name);
}

double SurfaceImmersion::bbox_diag() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : patches)
        for (const auto& x : p.pos) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
    return (hi - lo).norm();
}

double SurfaceImmersion::total_samples() const {
    double n = 0;
    for (const auto& p : patches) n += double(p.size());
    return n;
}

std::vector<Vec3> edge_positions(const ParamPatch& p, int edge) {
    std::vector<Vec3> out;
    switch (edge) {
        case EdgeU0:
            for (int j = 0; j < p.nv; ++j) out.push_back(p.at(0, j));
            break;
        case EdgeU1:
            for (int j = 0; j < p.nv; ++j) out.push_back(p.at(p.nu - 1, j));
            break;
        case EdgeV0:
            for (int i = 0; i < p.nu; ++i) out.push_back(p.at(i, 0));
            break;
        case EdgeV1:
            for (int i = 0; i < p.nu; ++i) out.push_back(p.at(i, p.nv - 1));
            break;
        default: throw InvalidParam("edge_positions: bad edge id");
    }
    return out;
}

namespace {

bool sequences_match(const std::vector<Vec3>& a, const std::vector<Vec3>& b, bool reversed, double tol) {
    if (a.size() != b.size()) return false;
    std::size_t n = a.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3& bk = reversed ? b[n - 1 - k] : b[k];
        if ((a[k] - bk).norm() > tol) return false;
    }
    return true;
}

} // namespace

std::vector<Seam> auto_build_seams(const SurfaceImmersion& surf, double tol) {
    struct Entry {
        int patch, edge;
        std::vector<Vec3> samples;
    };
    std::vector<Entry> open;
    for (int p = 0; p < int(surf.patches.size()); ++p) {
        const auto& patch = surf.patches[p];
        for (int e = 0; e < 4; ++e) {
            if (patch.periodic_u && (e == EdgeU0 || e == EdgeU1)) continue;
            if (patch.periodic_v && (e == EdgeV0 || e == EdgeV1)) continue;
            open.push_back({p, e, edge_positions(patch, e)});
        }
    }
    std::vector<bool> used(open.size(), false);
    std::vector<Seam> seams;
    for (std::size_t a = 0; a < open.size(); ++a) {
        if (used[a]) continue;
        for (std::size_t b = a + 1; b < open.size(); ++b) {
            if (used[b]) continue;
            bool fwd = sequences_match(open[a].samples, open[b].samples, false, tol);
            bool rev = !fwd && sequences_match(open[a].samples, open[b].samples, true, tol);
            if (fwd || rev) {
                seams.push_back({open[a].patch, open[a].edge, open[b].patch, open[b].edge, rev});
                used[a] = used[b] = true;
                break;
            }
        }
    }
    return seams;
}

void SurfaceImmersion::validate() const {
    if (patches.empty()) throw SpecInvalid("SurfaceImmersion: no patches");
    if (orientation != 1 && orientation != -1) throw SpecInvalid("SurfaceImmersion: orientation must be +1 or -1");
    for (const auto& p : patches) p.validate_weights();

    double diag = bbox_diag();
    if (!(diag > 0)) throw SpecInvalid("SurfaceImmersion: degenerate bounding box");

    // interior immersion condition
    for (std::size_t pi = 0; pi < patches.size(); ++pi) {
        const auto& p = patches[pi];
        for (int i = 1; i < p.nu - 1; ++i)
            for (int j = 1; j < p.nv - 1; ++j) {
                double c = p.du(i, j).cross(p.dv(i, j)).norm();
                if (!(c > 0))
                    throw DegenerateImmersion("interior sample with vanishing tangent cross product, patch " +
                                              std::to_string(pi));
            }
    }

    double tol = 1e-9 * diag;
    for (const auto& s : seams) {
        const auto ea = edge_positions(patches.at(s.patch_a), s.edge_a);
        const auto eb = edge_positions(patches.at(s.patch_b), s.edge_b);
        if (!sequences_match(ea, eb, s.reversed, tol))
            throw SpecInvalid("seam-identified samples disagree beyond 1e-9 of the bounding-box diagonal");
    }
}

bool SurfaceImmersion::is_closed() const {
    std::vector<std::vector<bool>> covered(patches.size(), std::vector<bool>(4, false));
    for (std::size_t p = 0; p < patches.size(); ++p) {
        if (patches[p].periodic_u) covered[p][EdgeU0] = covered[p][EdgeU1] = true;
        if (patches[p].periodic_v) covered[p][EdgeV0] = covered[p][EdgeV1] = true;
    }
    for (const auto& s : seams) {
        covered.at(s.patch_a).at(s.edge_a) = true;
        covered.at(s.patch_b).at(s.edge_b) = true;
    }
    for (const auto& c : covered)
        for (bool e : c)
            if (!e) return false;
    return true;
}

void RigidMotion::validate() const {
    double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-12) throw NotARotation("matrix is not orthogonal within 1e-12");
    if (std::abs(R.determinant() - 1.0) > 1e-12) throw NotARotation("determinant is not +1 within 1e-12");
}

SurfaceImmersion apply_motion(const RigidMotion& m, const SurfaceImmersion& f) {
    m.validate();
    SurfaceImmersion g = f;
    for (auto& p : g.patches)
        for (auto& x : p.pos) x = m.apply(x);
    return g;
}

SurfaceImmersion translate(const SurfaceImmersion& f, const Vec3& t) {
    SurfaceImmersion g = f;
    for (auto& p : g.patches)
        for (auto& x : p.pos) x += t;
    return g;
}

std::vector<std::vector<Vec3>> tangent_cross(const SurfaceImmersion& f) {
    double diag = f.bbox_diag();
    double floor = 1e-14 * diag * diag;
    std::vector<std::vector<Vec3>> out(f.patches.size());
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
        const auto& p = f.patches[pi];
        out[pi].resize(p.size());
        for (int i = 0; i < p.nu; ++i)
            for (int j = 0; j < p.nv; ++j) {
                Vec3 c = p.du(i, j).cross(p.dv(i, j));
                if (!(c.norm() > floor))
                    throw DegenerateImmersion("cross-product norm below 1e-14 x diag^2 at patch " +
                                              std::to_string(pi) + " sample (" + std::to_string(i) + "," +
                                              std::to_string(j) + ")");
                out[pi][p.idx(i, j)] = c;
            }
    }
    return out;
}

std::vector<std::vector<double>> area_factor(const SurfaceImmersion& f) {
    auto cross = tangent_cross(f);
    std::vector<std::vector<double>> a(cross.size());
    for (std::size_t pi = 0; pi < cross.size(); ++pi) {
        const auto& p = f.patches[pi];
        a[pi].resize(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) a[pi][k] = cross[pi][k].norm() / p.density[k];
    }
    return a;
}

namespace {

Vec3 sample_cross(const SurfaceImmersion& f, int patch, int i, int j) {
    const auto& p = f.patches.at(std::size_t(patch));
    if (i < 0 || i >= p.nu || j < 0 || j >= p.nv) throw InvalidParam("sample index out of range");
    Vec3 c = p.du(i, j).cross(p.dv(i, j));
    double diag = f.bbox_diag();
    if (!(c.norm() > 1e-14 * diag * diag))
        throw DegenerateImmersion("cross-product norm below 1e-14 x diag^2 at patch " + std::to_string(patch) +
                                  " sample (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return c;
}

} // namespace

double area_factor(const SurfaceImmersion& f, int patch, int i, int j) {
    const auto& p = f.patches.at(std::size_t(patch));
    return sample_cross(f, patch, i, j).norm() / p.density[p.idx(i, j)];
}

Vec3 unit_normal(const SurfaceImmersion& f, int patch, int i, int j) {
    Vec3 c = sample_cross(f, patch, i, j);
    return (double(f.orientation) / c.norm()) * c;
}

void set_reference_density(SurfaceImmersion& f) {
    auto cross = tangent_cross(f);
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi)
        for (std::size_t k = 0; k < f.patches[pi].size(); ++k)
            f.patches[pi].density[k] = cross[pi][k].norm();
}

std::vector<std::vector<Vec3>> unit_normal(const SurfaceImmersion& f) {
    auto cross = tangent_cross(f);
    for (auto& patch : cross)
        for (auto& c : patch) c = (double(f.orientation) / c.norm()) * c;
    return cross;
}

SrnfField srnf(const SurfaceImmersion& f) {
    auto cross = tangent_cross(f);
    SrnfField q;
    q.meta.resize(f.patches.size());
    q.values.resize(f.patches.size());
    q.rw.resize(f.patches.size());
    for (std::size_t pi = 0; pi < f.patches.size(); ++pi) {
        const auto& p = f.patches[pi];
        q.meta[pi] = {p.domain, p.nu, p.nv, p.periodic_u, p.periodic_v};
        q.values[pi].resize(p.size());
        q.rw[pi].resize(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            double cn = cross[pi][k].norm();
            double a = cn / p.density[k];
            // sqrt(a) * (cross/|cross|) with one division
            q.values[pi][k] = (double(f.orientation) * std::sqrt(a) / cn) * cross[pi][k];
            q.rw[pi][k] = p.weight[k] * p.density[k];
        }
    }
    return q;
}

double SrnfField::norm() const {
    double s = 0;
    for (std::size_t p = 0; p < values.size(); ++p)
        for (std::size_t k = 0; k < values[p].size(); ++k) s += values[p][k].squaredNorm() * rw[p][k];
    return std::sqrt(s);
}

double srnf_defect(const SrnfField& q, const std::vector<std::vector<double>>& area) {
    double worst = 0;
    for (std::size_t p = 0; p < q.values.size(); ++p)
        for (std::size_t k = 0; k < q.values[p].size(); ++k) {
            double a = area[p][k];
            double rel = std::abs(q.values[p][k].squaredNorm() - a) / std::max(a, 1e-300);
            worst = std::max(worst, rel);
        }
    return worst;
}

double translate_invariance_check(const SurfaceImmersion& f, const Vec3& t) {
    SrnfField q0 = srnf(f);
    SrnfField q1 = srnf(translate(f, t));
    double worst = 0;
    for (std::size_t p = 0; p < q0.values.size(); ++p)
        for (std::size_t k = 0; k < q0.values[p].size(); ++k)
            worst = std::max(worst, (q1.values[p][k] - q0.values[p][k]).norm());
    return worst;
}

} // namespace srnflab
