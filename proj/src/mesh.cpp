#include "srnf/moser.hpp"
#include "srnf/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace srnflab {

double Circle::signed_gap(const Circle& other) const {
    return (center - other.center).norm() - radius - other.radius;
}

double FlatPlace::clearance() const {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& d : inner) {
        c = std::min(c, outer.radius - (d.center - outer.center).norm() - d.radius);
        for (const auto& e : inner)
            if (&e != &d) c = std::min(c, d.signed_gap(e));
    }
    return c;
}

void FlatPlace::validate() const {
    if (!(outer.radius > 0)) throw InvalidParam("flat place: outer radius must be positive");
    for (const auto& d : inner)
        if (!(d.radius > 0)) throw InvalidParam("flat place: inner radius must be positive");
    if (!inner.empty() && !(clearance() > 0))
        throw Overlap("flat place: circle boundaries are not disjoint");
}

double TriMesh::tri_area(int t) const {
    const auto& tr = tris[t];
    Vec2 a = nodes[tr[0]], b = nodes[tr[1]], c = nodes[tr[2]];
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

double TriMesh::total_area() const {
    double s = 0, comp = 0;
    for (int t = 0; t < int(tris.size()); ++t) {
        double y = tri_area(t) - comp;
        double w = s + y;
        comp = (w - s) - y;
        s = w;
    }
    return s;
}

double TriMesh::min_angle_deg() const {
    double worst = 180;
    for (const auto& tr : tris) {
        for (int k = 0; k < 3; ++k) {
            Vec2 a = nodes[tr[k]], b = nodes[tr[(k + 1) % 3]], c = nodes[tr[(k + 2) % 3]];
            Vec2 u = b - a, v = c - a;
            double cosang = u.dot(v) / (u.norm() * v.norm());
            cosang = std::clamp(cosang, -1.0, 1.0);
            worst = std::min(worst, std::acos(cosang) * 180.0 / kPi);
        }
    }
    return worst;
}

void TriMesh::build_locator() const {
    if (!bins_.empty() || tris.empty()) return;
    Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    Vec2 hi = -lo;
    for (const auto& p : nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double diam = (hi - lo).norm();
    bin_h_ = std::max(1e-12, diam / 128.0);
    bin_org_ = lo;
    bin_nx_ = int((hi.x() - lo.x()) / bin_h_) + 2;
    bin_ny_ = int((hi.y() - lo.y()) / bin_h_) + 2;
    bins_.assign(std::size_t(bin_nx_) * bin_ny_, {});
    for (int t = 0; t < int(tris.size()); ++t) {
        Vec2 a = nodes[tris[t][0]], b = nodes[tris[t][1]], c = nodes[tris[t][2]];
        Vec2 tlo = a.cwiseMin(b).cwiseMin(c), thi = a.cwiseMax(b).cwiseMax(c);
        int i0 = int((tlo.x() - bin_org_.x()) / bin_h_), i1 = int((thi.x() - bin_org_.x()) / bin_h_);
        int j0 = int((tlo.y() - bin_org_.y()) / bin_h_), j1 = int((thi.y() - bin_org_.y()) / bin_h_);
        for (int i = std::max(0, i0); i <= std::min(bin_nx_ - 1, i1); ++i)
            for (int j = std::max(0, j0); j <= std::min(bin_ny_ - 1, j1); ++j)
                bins_[std::size_t(i) * bin_ny_ + j].push_back(t);
    }
}

int TriMesh::locate(const Vec2& p, std::array<double, 3>& bary) const {
    build_locator();
    if (bins_.empty()) return -1;
    int i = int((p.x() - bin_org_.x()) / bin_h_);
    int j = int((p.y() - bin_org_.y()) / bin_h_);
    if (i < 0 || i >= bin_nx_ || j < 0 || j >= bin_ny_) return -1;
    int best = -1;
    double best_short = -std::numeric_limits<double>::max();
    std::array<double, 3> best_bary{};
    for (int t : bins_[std::size_t(i) * bin_ny_ + j]) {
        Vec2 a = nodes[tris[t][0]], b = nodes[tris[t][1]], c = nodes[tris[t][2]];
        double den = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
        if (den <= 0) continue;
        double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (p.y() - a.y()) * (c.x() - a.x())) / den;
        double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x())) / den;
        double l0 = 1.0 - l1 - l2;
        double short_side = std::min({l0, l1, l2});
        if (short_side > best_short) {
            best_short = short_side;
            best = t;
            best_bary = {l0, l1, l2};
        }
        if (short_side >= 0) break;
    }
    // Tolerate roundoff-level exits: clamp when barely outside.
    if (best >= 0 && best_short >= -1e-9) {
        for (double& l : best_bary) l = std::max(l, 0.0);
        double s = best_bary[0] + best_bary[1] + best_bary[2];
        for (double& l : best_bary) l /= s;
        bary = best_bary;
        return best;
    }
    return -1;
}

int TriMesh::locate_relaxed(const Vec2& p, std::array<double, 3>& bary, double deficit) const {
    build_locator();
    if (bins_.empty()) return -1;
    int ic = int((p.x() - bin_org_.x()) / bin_h_);
    int jc = int((p.y() - bin_org_.y()) / bin_h_);
    int best = -1;
    double best_short = -std::numeric_limits<double>::max();
    std::array<double, 3> best_bary{};
    for (int i = std::max(0, ic - 3); i <= std::min(bin_nx_ - 1, ic + 3); ++i) {
        for (int j = std::max(0, jc - 3); j <= std::min(bin_ny_ - 1, jc + 3); ++j) {
            for (int t : bins_[std::size_t(i) * bin_ny_ + j]) {
                Vec2 a = nodes[tris[t][0]], b = nodes[tris[t][1]], c = nodes[tris[t][2]];
                double den = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
                if (den <= 0) continue;
                double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (p.y() - a.y()) * (c.x() - a.x())) / den;
                double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x())) / den;
                double l0 = 1.0 - l1 - l2;
                double short_side = std::min({l0, l1, l2});
                if (short_side > best_short) {
                    best_short = short_side;
                    best = t;
                    best_bary = {l0, l1, l2};
                }
            }
        }
    }
    if (best >= 0 && best_short >= deficit) {
        bary = best_bary;
        return best;
    }
    return -1;
}

namespace {

/* Bowyer-Watson Delaunay over a fixed point list (inserted in order). */
struct Delaunay {
    struct Tri {
        int v[3];
        bool alive = true;
    };
    std::vector<Vec2> pts;
    std::vector<Tri> tris;

    static double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
        return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    }

    /* > 0 when d is inside the circumcircle of CCW triangle abc. */
    static double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
        double ax = a.x() - d.x(), ay = a.y() - d.y();
        double bx = b.x() - d.x(), by = b.y() - d.y();
        double cx = c.x() - d.x(), cy = c.y() - d.y();
        double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
        return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
    }

    void run(const std::vector<Vec2>& input) {
        pts = input;
        Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
        Vec2 hi = -lo;
        for (const auto& p : pts) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        Vec2 mid = 0.5 * (lo + hi);
        double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
        int s0 = int(pts.size()), s1 = s0 + 1, s2 = s0 + 2;
        pts.push_back(mid + 20.0 * span * Vec2(0, 1));
        pts.push_back(mid + 20.0 * span * Vec2(-1, -1));
        pts.push_back(mid + 20.0 * span * Vec2(1, -1));
        tris.push_back({{s0, s1, s2}, true});
        if (orient(pts[s0], pts[s1], pts[s2]) < 0) std::swap(tris[0].v[1], tris[0].v[2]);

        for (int ip = 0; ip < s0; ++ip) {
            const Vec2& p = pts[ip];
            // Cavity: all triangles whose circumcircle contains p.
            std::map<std::pair<int, int>, int> edge_count;
            for (auto& t : tris) {
                if (!t.alive) continue;
                if (incircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], p) > 0) {
                    t.alive = false;
                    for (int k = 0; k < 3; ++k) {
                        int u = t.v[k], v = t.v[(k + 1) % 3];
                        std::pair<int, int> key{std::min(u, v), std::max(u, v)};
                        auto it = edge_count.find(key);
                        // Interior cavity edges appear twice and cancel;
                        // boundary edges survive with their CCW orientation.
                        if (it == edge_count.end())
                            edge_count[key] = (u < v) ? 1 : 2;
                        else
                            edge_count.erase(it);
                    }
                }
            }
            // Boundary edges of the cavity appear once; retriangulate the fan.
            for (const auto& [e, orient_tag] : edge_count) {
                int u = e.first, v = e.second;
                if (orient_tag == 2) std::swap(u, v);
                Tri nt{{u, v, ip}, true};
                if (orient(pts[u], pts[v], pts[ip]) < 0) std::swap(nt.v[0], nt.v[1]);
                tris.push_back(nt);
            }
            if (ip % 64 == 0) compact();
        }
        compact();
        // Drop triangles touching the super-triangle.
        std::vector<Tri> keep;
        for (const auto& t : tris)
            if (t.v[0] < s0 && t.v[1] < s0 && t.v[2] < s0) keep.push_back(t);
        tris = std::move(keep);
        pts.resize(s0);
    }

    void compact() {
        std::vector<Tri> keep;
        keep.reserve(tris.size());
        for (const auto& t : tris)
            if (t.alive) keep.push_back(t);
        tris = std::move(keep);
    }
};

bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        if ((poly[i].y() > p.y()) != (poly[j].y() > p.y())) {
            double xi = poly[j].x() + (p.y() - poly[j].y()) / (poly[i].y() - poly[j].y()) * (poly[i].x() - poly[j].x());
            if (p.x() < xi) in = !in;
        }
    }
    return in;
}

double hash_jitter(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return (double(z >> 11) * 0x1.0p-53 - 0.5);
}

struct MeshPoints {
    std::vector<Vec2> pts;
    std::vector<int> circle_tag;
    std::vector<int> circle_counts;
};

MeshPoints seed_points(const FlatPlace& fp, double h) {
    MeshPoints mp;
    auto add_circle = [&](const Circle& c, int tag) {
        int m = std::max(12, int(std::ceil(2 * kPi * c.radius / h)));
        for (int j = 0; j < m; ++j) {
            double ang = 2 * kPi * j / m;
            mp.pts.push_back(c.center + c.radius * Vec2(std::cos(ang), std::sin(ang)));
            mp.circle_tag.push_back(tag);
        }
        mp.circle_counts.push_back(m);
    };
    add_circle(fp.outer, 0);
    for (std::size_t k = 0; k < fp.inner.size(); ++k) add_circle(fp.inner[k], int(k) + 1);

    const double row_h = h * std::sqrt(3.0) / 2.0;
    const Vec2 c0 = fp.outer.center;
    const double R = fp.outer.radius;
    int ny = int(2 * R / row_h) + 1;
    for (int iy = -ny; iy <= ny; ++iy) {
        double y = c0.y() + iy * row_h;
        int nx = int(2 * R / h) + 1;
        for (int ix = -nx; ix <= nx; ++ix) {
            double x = c0.x() + ix * h + ((iy & 1) ? 0.5 * h : 0.0);
            Vec2 p(x + 0.08 * h * hash_jitter(iy + 7777, ix + 3333),
                   y + 0.08 * h * hash_jitter(ix + 1111, iy + 9999));
            if ((p - c0).norm() > R - 0.72 * h) continue;
            bool clear = true;
            for (const auto& d : fp.inner)
                if ((p - d.center).norm() < d.radius + 0.72 * h) clear = false;
            if (!clear) continue;
            mp.pts.push_back(p);
            mp.circle_tag.push_back(-1);
        }
    }
    return mp;
}

TriMesh finish_mesh(const FlatPlace&, MeshPoints& mp) {
    Delaunay dt;
    dt.run(mp.pts);

    // Boundary polygons for the hole/outside culling.
    std::vector<std::vector<Vec2>> polys;
    {
        std::size_t off = 0;
        for (std::size_t k = 0; k < mp.circle_counts.size(); ++k) {
            std::vector<Vec2> poly(mp.pts.begin() + off, mp.pts.begin() + off + mp.circle_counts[k]);
            polys.push_back(std::move(poly));
            off += mp.circle_counts[k];
        }
    }

    TriMesh mesh;
    mesh.nodes = mp.pts;
    mesh.node_circle = mp.circle_tag;
    for (const auto& t : dt.tris) {
        Vec2 cen = (mp.pts[t.v[0]] + mp.pts[t.v[1]] + mp.pts[t.v[2]]) / 3.0;
        if (!point_in_polygon(polys[0], cen)) continue;
        bool in_hole = false;
        for (std::size_t k = 1; k < polys.size(); ++k)
            if (point_in_polygon(polys[k], cen)) in_hole = true;
        if (in_hole) continue;
        mesh.tris.push_back({t.v[0], t.v[1], t.v[2]});
        if (mesh.tri_area(int(mesh.tris.size()) - 1) < 0)
            std::swap(mesh.tris.back()[1], mesh.tris.back()[2]);
    }

    // Boundary loops in circle order.
    std::size_t off = 0;
    for (std::size_t k = 0; k < mp.circle_counts.size(); ++k) {
        std::vector<int> loop(mp.circle_counts[k]);
        for (int j = 0; j < mp.circle_counts[k]; ++j) loop[j] = int(off) + j;
        mesh.boundary_loops.push_back(std::move(loop));
        off += mp.circle_counts[k];
    }
    return mesh;
}

void laplacian_smooth(TriMesh& mesh, int sweeps) {
    std::vector<std::set<int>> nbrs(mesh.nodes.size());
    for (const auto& t : mesh.tris)
        for (int k = 0; k < 3; ++k) {
            nbrs[t[k]].insert(t[(k + 1) % 3]);
            nbrs[t[k]].insert(t[(k + 2) % 3]);
        }
    for (int s = 0; s < sweeps; ++s) {
        std::vector<Vec2> next = mesh.nodes;
        for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
            if (mesh.node_circle[i] >= 0 || nbrs[i].empty()) continue;
            Vec2 acc = Vec2::Zero();
            for (int j : nbrs[i]) acc += mesh.nodes[j];
            next[i] = acc / double(nbrs[i].size());
        }
        mesh.nodes = std::move(next);
    }
}

void check_conformity(const TriMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& t : mesh.tris)
        for (int k = 0; k < 3; ++k) {
            auto mm = std::minmax(t[k], t[(k + 1) % 3]);
            edges.insert({mm.first, mm.second});
        }
    for (const auto& loop : mesh.boundary_loops)
        for (std::size_t j = 0; j < loop.size(); ++j) {
            auto mm = std::minmax(loop[j], loop[(j + 1) % loop.size()]);
            if (!edges.count({mm.first, mm.second}))
                throw MeshFailure("triangulation does not conform to a boundary circle");
        }
}

} // namespace

TriMesh triangulate_flat_place(const FlatPlace& fp, double target_h) {
    fp.validate();
    if (!(target_h > 0)) throw InvalidParam("mesh spacing must be positive");
    MeshPoints mp = seed_points(fp, target_h);
    TriMesh mesh = finish_mesh(fp, mp);
    laplacian_smooth(mesh, 8);

    // Re-triangulate the smoothed points so the Delaunay property is restored.
    MeshPoints mp2;
    mp2.pts = mesh.nodes;
    mp2.circle_tag = mesh.node_circle;
    mp2.circle_counts = mp.circle_counts;
    mesh = finish_mesh(fp, mp2);

    check_conformity(mesh);
    double ang = mesh.min_angle_deg();
    if (ang < 15.0) throw MeshFailure("mesh quality below the 15-degree floor: " + std::to_string(ang));
    for (int t = 0; t < int(mesh.tris.size()); ++t)
        if (mesh.tri_area(t) <= 0) throw MeshFailure("non-positive triangle area");
    return mesh;
}

TriMesh triangulate_annulus(double r0, double r1, int nr, int ntheta) {
    if (!(r0 > 0) || !(r1 > r0) || nr < 1 || ntheta < 3)
        throw InvalidParam("annulus mesh: need 0 < r0 < r1, nr >= 1, ntheta >= 3");
    TriMesh mesh;
    for (int i = 0; i <= nr; ++i) {
        double r = r0 + (r1 - r0) * i / nr;
        for (int j = 0; j < ntheta; ++j) {
            double ang = 2 * kPi * j / ntheta;
            mesh.nodes.push_back(r * Vec2(std::cos(ang), std::sin(ang)));
            mesh.node_circle.push_back(i == 0 ? 1 : (i == nr ? 0 : -1));
        }
    }
    auto id = [&](int i, int j) { return i * ntheta + (j % ntheta); };
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < ntheta; ++j) {
            // split each quad along alternating diagonals for isotropy
            if ((i + j) % 2 == 0) {
                mesh.tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                mesh.tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            } else {
                mesh.tris.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                mesh.tris.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
    for (int t = 0; t < int(mesh.tris.size()); ++t)
        if (mesh.tri_area(t) < 0) std::swap(mesh.tris[t][1], mesh.tris[t][2]);
    std::vector<int> outer_loop, inner_loop;
    for (int j = 0; j < ntheta; ++j) {
        outer_loop.push_back(id(nr, j));
        inner_loop.push_back(id(0, j));
    }
    mesh.boundary_loops.push_back(outer_loop);
    mesh.boundary_loops.push_back(inner_loop);
    return mesh;
}

double HoledDiscDomain::boundary_distance(const Vec2& p) const {
    double d = geometry.outer.radius - (p - geometry.outer.center).norm();
    for (const auto& c : geometry.inner)
        d = std::min(d, (p - c.center).norm() - c.radius);
    return d;
}

double HoledDiscDomain::collar_cutoff(const Vec2& p) const {
    // Zero throughout the inner half of the collar band, so cut-off fields
    // vanish on a genuine neighborhood of the boundary, not just on it.
    return cinf_step(2.0 * boundary_distance(p) / collar_width - 1.0);
}

HoledDiscDomain make_domain(const FlatPlace& fp, double target_h, double collar_width) {
    fp.validate();
    if (!(collar_width > 0)) throw InvalidParam("collar width must be positive");
    if (!fp.inner.empty() && collar_width > 0.45 * fp.clearance())
        throw Overlap("collar bands are not disjoint: collar_width > 0.45 x clearance");
    HoledDiscDomain dom;
    dom.geometry = fp;
    dom.mesh = triangulate_flat_place(fp, target_h);
    dom.collar_width = collar_width;
    return dom;
}

double integrate_nodal(const TriMesh& mesh, const std::vector<double>& values) {
    double s = 0, comp = 0;
    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        const auto& tr = mesh.tris[t];
        double contrib = mesh.tri_area(t) / 3.0 * (values[tr[0]] + values[tr[1]] + values[tr[2]]);
        double y = contrib - comp;
        double w = s + y;
        comp = (w - s) - y;
        s = w;
    }
    return s;
}

DensityField constant_density(const HoledDiscDomain& dom, double value) {
    if (!(value > 0)) throw InvalidParam("density must be positive");
    DensityField rho;
    rho.values.assign(dom.mesh.nodes.size(), value);
    rho.total = integrate_nodal(dom.mesh, rho.values);
    return rho;
}

std::vector<double> PlanarMap::node_det(const TriMesh& mesh) const {
    std::vector<double> acc(mesh.nodes.size(), 0), wsum(mesh.nodes.size(), 0);
    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        double a = mesh.tri_area(t);
        for (int k = 0; k < 3; ++k) {
            acc[mesh.tris[t][k]] += a * tri_det[t];
            wsum[mesh.tris[t][k]] += a;
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= wsum[i];
    return acc;
}

} // namespace srnflab
