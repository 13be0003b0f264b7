// Acceptance battery: one test case per shipping criterion, each printing a
// single [PASS]/[FAIL] summary line with the measured values and its runtime.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srnf/alignment.hpp"
#include "srnf/assembly.hpp"
#include "srnf/curvature.hpp"
#include "srnf/generators.hpp"
#include "srnf/metric.hpp"
#include "srnf/moser.hpp"
#include "srnf/reparam.hpp"
#include "srnf/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

using namespace srnflab;

namespace {

// Accumulates the gate results of one criterion and prints the summary line.
class Criterion {
  public:
    Criterion(int num, const char* tag) : num_(num), tag_(tag), t0_(std::chrono::steady_clock::now()) {}

    void gate(bool cond, const char* what, double value) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " %s=%.3e", what, value);
        detail_ += buf;
        ok_ = ok_ && cond;
        CHECK_MESSAGE(cond, what << " = " << value);
    }

    // budget_s <= 0 means the criterion carries no runtime bound.
    void finish(double budget_s) {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        bool time_ok = budget_s <= 0 || secs < budget_s;
        std::printf("[%s] %d/9 %s:%s (%.1f s%s)\n", ok_ && time_ok ? "PASS" : "FAIL", num_, tag_,
                    detail_.c_str(), secs, budget_s <= 0 ? "" : (" / " + format_budget(budget_s)).c_str());
        std::fflush(stdout);
        CHECK_MESSAGE(time_ok, "runtime " << secs << " s exceeds " << budget_s << " s");
    }

  private:
    static std::string format_budget(double s) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g s budget", s);
        return buf;
    }
    int num_;
    const char* tag_;
    std::chrono::steady_clock::time_point t0_;
    bool ok_ = true;
    std::string detail_;
};

ChessboardSpec swap_spec() {
    ChessboardSpec cs;
    cs.place = {{Vec2(0, 0), 1.0}, {{Vec2(-0.35, 0.12), 0.12}, {Vec2(0.45, 0.12), 0.12}}};
    cs.cap_heights = {-0.9, 0.2, -0.26};
    cs.translations = {Vec2(0.8, 0), Vec2(-0.8, 0)};
    return cs;
}

// Shared fixtures: built once, reused by later criteria so the per-criterion
// runtime reflects its own checks rather than repeated construction.
const ChessboardBuild& swap_build() {
    static ChessboardBuild b = gen_chessboard_detailed(swap_spec());
    return b;
}

const std::pair<SurfaceImmersion, SurfaceImmersion>& flip_pair() {
    static std::pair<SurfaceImmersion, SurfaceImmersion> p = gen_flip(FlipSpec{});
    return p;
}

double max_normal_angle(const SrnfField& a, const SrnfField& b) {
    double worst = 0;
    for (std::size_t pi = 0; pi < a.values.size(); ++pi)
        for (std::size_t m = 0; m < a.values[pi].size(); ++m) {
            double c = a.values[pi][m].normalized().dot(b.values[pi][m].normalized());
            worst = std::max(worst, std::acos(std::clamp(c, -1.0, 1.0)));
        }
    return worst;
}

// 180-degree rotation of every patch rectangle: exactly representable on the
// grid (nodes map to nodes, unit Jacobian), so acting with it must reproduce
// distances to roundoff rather than to interpolation error.
Reparametrization rot180_reparam(const std::vector<SrnfGridMeta>& metas) {
    return make_reparametrization(metas, [&](int patch, double u, double v) {
        const Rect& d = metas[std::size_t(patch)].domain;
        return Vec2(d.u0 + d.u1 - u, d.v0 + d.v1 - v);
    });
}

} // namespace

TEST_CASE("cylinder pair: vanishing distance between non-congruent surfaces") {
    Criterion c(1, "cylinder");
    auto [id, img] = gen_cylinder_pair(2.0, 129, 129);
    double norm = srnf(id).norm();
    double d = srnf_distance(id, img);
    c.gate(d <= 1e-10 * norm, "rel_dist", d / norm);
    AlignmentReport rep = certify_noncongruent(id, img);
    c.gate(!rep.congruent, "congruent", rep.congruent ? 1.0 : 0.0);
    c.gate(rep.rms_residual > 1e-1, "rms", rep.rms_residual);
    c.finish(5.0);
}

TEST_CASE("paraboloid pair: identical fields from non-congruent graphs") {
    Criterion c(2, "paraboloid");
    auto f1 = gen_paraboloid(1.0, 4.0, {-1, 1, -1, 1}, 129, 129);
    auto f2 = gen_paraboloid(2.0, 2.0, {-1, 1, -1, 1}, 129, 129);
    SrnfField q1 = srnf(f1), q2 = srnf(f2);
    c.gate(samplewise_max_dev(q1, q2) <= 1e-10, "samplewise", samplewise_max_dev(q1, q2));
    double d = srnf_distance(q1, q2);
    c.gate(d <= 1e-10 * q1.norm(), "rel_dist", d / q1.norm());
    AlignmentReport rep = certify_noncongruent(f1, f2);
    c.gate(!rep.congruent && rep.rms_residual > rep.threshold, "rms", rep.rms_residual);
    c.finish(5.0);
}

TEST_CASE("chessboard rearrangement: two discs swapped area-preservingly") {
    Criterion c(3, "chessboard");
    const ChessboardBuild& cb = swap_build();
    c.gate(cb.moser.certificate.max_detj_dev <= 1e-4, "detj", cb.moser.certificate.max_detj_dev);
    c.gate(cb.moser.certificate.collar_dev <= 1e-6, "collar", cb.moser.certificate.collar_dev);
    SrnfField q1 = srnf(cb.id_surface), q2 = srnf(cb.moved_surface);
    double d = srnf_distance(q1, q2);
    c.gate(d <= 1e-3 * q1.norm(), "rel_dist", d / q1.norm());
    c.gate(max_normal_angle(q1, q2) <= 1e-6, "normal_rad", max_normal_angle(q1, q2));
    AlignmentReport rep = certify_noncongruent(cb.id_surface, cb.moved_surface);
    c.gate(!rep.congruent && rep.rms_residual > rep.threshold, "rms", rep.rms_residual);
    c.finish(120.0);
}

TEST_CASE("flip pair: twisted annulus with an asymmetric cap") {
    Criterion c(4, "flip");
    FlipSpec fsp;
    double twist_dev = flip_twist_det_dev(fsp);
    c.gate(twist_dev <= 1e-8, "twist_detj", twist_dev);
    const auto& [f1, f2] = flip_pair();
    SrnfField q1 = srnf(f1);
    double d = srnf_distance(f1, f2);
    c.gate(d <= 1e-6 * q1.norm(), "rel_dist", d / q1.norm());
    AlignmentReport rep = certify_noncongruent(f1, f2);
    c.gate(!rep.congruent && rep.rms_residual > rep.threshold, "rms", rep.rms_residual);
    c.finish(30.0);
}

TEST_CASE("distance invariance and equivariance under seeded motion triples") {
    Criterion c(5, "invariance");
    const std::uint64_t seed = 20240801ULL;
    SurfaceImmersion sph = gen_sphere(33);
    SurfaceImmersion ell = gen_ellipsoid(1.0, 1.0, 1.2, 33);
    SrnfField q1 = srnf(sph), q2 = srnf(ell);
    double d = srnf_distance(q1, q2);
    Reparametrization phi = rot180_reparam(q1.meta);
    double worst = 0, worst_eq = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(seed + std::uint64_t(trial));
        RigidMotion m{rng.rotation(), rng.normal3()};
        SrnfField t1 = srnf(apply_motion(m, sph));
        SrnfField t2 = srnf(apply_motion(m, ell));
        worst_eq = std::max(worst_eq, samplewise_max_dev(t1, rotate_field(q1, m)));
        if (rng.next_u64() % 2 == 1) {
            t1 = reparam_act(t1, phi);
            t2 = reparam_act(t2, phi);
        }
        worst = std::max(worst, std::abs(srnf_distance(t1, t2) - d));
    }
    c.gate(worst <= 1e-6 * d, "dist_dev", worst);
    c.gate(worst_eq <= 1e-6 * q1.norm(), "equivariance", worst_eq);
    c.finish(60.0);
}

TEST_CASE("gauss map factor matches |K|; total curvature of closed surfaces") {
    Criterion c(6, "gauss_factor");
    // Analytic battery at 128^2 grid cells: seeded quadratic graphs against
    // the closed-form curvature and the flat cylinder against zero.
    double worst = 0;
    Rng rng(101);
    for (int trial = 0; trial < 3; ++trial) {
        double a = rng.uniform(0.05, 0.2), b = rng.uniform(0.05, 0.2), cc = rng.uniform(-0.05, 0.05);
        auto f = gen_graph_patch({-0.5, 0.5, -0.5, 0.5}, 129, 129,
                                 [&](double x, double y) { return a * x * x + b * y * y + cc * x * y; });
        const auto& patch = f.patches[0];
        auto gf = gauss_map_area_factor(f);
        for (int i = 0; i < patch.nu; ++i)
            for (int j = 0; j < patch.nv; ++j) {
                double x = patch.u_of(i), y = patch.v_of(j);
                double zx = 2 * a * x + cc * y, zy = 2 * b * y + cc * x;
                double g = 1 + zx * zx + zy * zy;
                double K = (4 * a * b - cc * cc) / (g * g);
                worst = std::max(worst, std::abs(gf[0][patch.idx(i, j)] - std::abs(K)));
            }
    }
    auto cyl_fac = gauss_map_area_factor(gen_cylinder_pair(2.0, 129, 65).first);
    for (const auto& p : cyl_fac)
        for (double v : p) worst = std::max(worst, std::abs(v));
    c.gate(worst <= 1e-4, "factor_dev", worst);

    // Sphere cross-check away from patch borders, where one-sided stencils of
    // the discrete normal field would otherwise dominate.
    auto sph = gen_sphere(129);
    auto sfac = gauss_map_area_factor(sph);
    auto scurv = gaussian_curvature(sph);
    double worst_sph = 0;
    for (std::size_t p = 0; p < sfac.size(); ++p)
        for (int i = 2; i < 127; ++i)
            for (int j = 2; j < 127; ++j) {
                std::size_t k = std::size_t(i) * 129 + j;
                worst_sph = std::max(worst_sph, std::abs(sfac[p][k] - std::abs(scurv.K[p][k])));
            }
    c.gate(worst_sph <= 1e-4, "sphere_dev", worst_sph);

    // Total curvature of every shipped closed genus-0 surface within 1e-2 of
    // the topological value 4*pi.
    double gb = std::abs(gauss_bonnet_check(sph) - 4 * kPi);
    gb = std::max(gb, std::abs(gauss_bonnet_check(gen_ellipsoid(1, 1, 1.2, 129)) - 4 * kPi));
    gb = std::max(gb, std::abs(gauss_bonnet_check(gen_convex_blob(129, {{Vec3(1, 0.3, 0), 0.04}})) - 4 * kPi));
    gb = std::max(gb, std::abs(gauss_bonnet_check(swap_build().id_surface) - 4 * kPi));
    gb = std::max(gb, std::abs(gauss_bonnet_check(swap_build().moved_surface) - 4 * kPi));
    gb = std::max(gb, std::abs(gauss_bonnet_check(flip_pair().first) - 4 * kPi));
    gb = std::max(gb, std::abs(gauss_bonnet_check(flip_pair().second) - 4 * kPi));
    c.gate(gb <= 1e-2, "gauss_bonnet", gb);
    c.finish(0);
}

TEST_CASE("sphere rigidity probe separates ellipsoids and accepts translates") {
    Criterion c(7, "rigidity");
    RigidityReport ell = sphere_rigidity_probe(gen_ellipsoid(1, 1, 1.2, 65));
    c.gate(ell.distance > 0.05 && ell.exceeds_floor, "ellipsoid_dist", ell.distance);
    RigidityReport tr = sphere_rigidity_probe(translate(gen_sphere(65), Vec3(0.4, -0.2, 1.0)));
    c.gate(tr.distance <= 1e-10, "translate_dist", tr.distance);
    c.gate(tr.is_translate && tr.translate_residual <= 1e-10, "translate_resid", tr.translate_residual);
    c.finish(0);
}

TEST_CASE("convex uniqueness probe: translate certificate and curvature witness") {
    Criterion c(8, "convex");
    std::vector<SupportBump> bumps = {{Vec3(1, 0.2, -0.1).normalized(), 0.05},
                                      {Vec3(-0.3, 1, 0.4).normalized(), 0.03}};
    auto blob = gen_convex_blob(65, bumps);
    auto rep = convex_uniqueness_probe(blob, translate(blob, Vec3(0.7, 0.1, -0.4)), 1e-8);
    c.gate(rep.within_tolerance && rep.translates_match, "translate_ok", rep.within_tolerance ? 1.0 : 0.0);
    c.gate(rep.translate_residual <= 1e-10 * blob.bbox_diag(), "resid", rep.translate_residual);
    auto wit = convex_uniqueness_probe(gen_sphere(65), gen_ellipsoid(1, 1, 1.2, 65), 1e-8);
    c.gate(!wit.within_tolerance && wit.k_witness > 0, "k_witness", wit.k_witness);
    c.finish(0);
}

TEST_CASE("numerical order: FEM and curvature refine at 4x, flow steps at 8x") {
    Criterion c(9, "orders");

    // Manufactured Neumann problem on the annulus: the discrete solution must
    // refine at second order (error ratio in [3.5, 4.5] per mesh halving).
    const double r0 = 0.4, r1 = 1.0, s = kPi / (r1 - r0);
    double prev = 0, fem_lo = 1e30, fem_hi = 0;
    for (int nr : {16, 32, 64}) {
        FlatPlace fp{{Vec2(0, 0), r1}, {{Vec2(0, 0), r0}}};
        HoledDiscDomain dom{fp, triangulate_annulus(r0, r1, nr, int(10.5 * nr)), 0.05};
        const std::size_t n = dom.mesh.nodes.size();
        DensityField g;
        g.values.resize(n);
        std::vector<double> ustar(n);
        for (std::size_t i = 0; i < n; ++i) {
            double rho = dom.mesh.nodes[i].norm();
            ustar[i] = std::cos(s * (rho - r0));
            g.values[i] = -s * s * std::cos(s * (rho - r0)) - s * std::sin(s * (rho - r0)) / rho;
        }
        g.total = integrate_nodal(dom.mesh, g.values);
        NodalField u = solve_potential(dom, g, kPi * (r1 * r1 - r0 * r0));
        std::vector<double> one(n, 1.0), err2(n);
        double area = integrate_nodal(dom.mesh, one);
        double mean = integrate_nodal(dom.mesh, ustar) / area;
        for (std::size_t i = 0; i < n; ++i) {
            double dv = u.values[i] - (ustar[i] - mean);
            err2[i] = dv * dv;
        }
        double e = std::sqrt(integrate_nodal(dom.mesh, err2));
        if (prev > 0) {
            fem_lo = std::min(fem_lo, prev / e);
            fem_hi = std::max(fem_hi, prev / e);
        }
        prev = e;
    }
    c.gate(fem_lo >= 3.5 && fem_hi <= 4.5, "fem_ratio", fem_lo);

    // Discrete curvature of the sphere refines at the same order.
    auto max_K_dev = [](const SurfaceImmersion& f) {
        auto cf = gaussian_curvature(f);
        double worst = 0;
        for (const auto& patch : cf.K)
            for (double K : patch) worst = std::max(worst, std::abs(K - 1.0));
        return worst;
    };
    double ratio = max_K_dev(gen_sphere(65)) / max_K_dev(gen_sphere(129));
    c.gate(ratio >= 3.5 && ratio <= 4.5, "curv_ratio", ratio);

    // Step-halving of the flow integrator: the unit-determinant defect of a
    // density-scaled rotation field must fall by at least 8x per halving.
    FlatPlace fpa{{Vec2(0, 0), 0.85}, {{Vec2(0, 0), 0.25}}};
    HoledDiscDomain dom{fpa, triangulate_annulus(0.25, 0.85, 24, 96), 0.05};
    const std::size_t n = dom.mesh.nodes.size();
    TransportField eta;
    eta.base.resize(n);
    eta.rho0.assign(n, 1.0);
    eta.rho1.assign(n, 0.5);
    for (std::size_t i = 0; i < n; ++i)
        eta.base[i] = Vec2(-dom.mesh.nodes[i].y(), dom.mesh.nodes[i].x());
    double prev_det = 0, worst_gain = 1e30;
    for (int ns : {8, 16, 32, 64}) {
        PlanarMap f = integrate_flow(dom, eta, ns);
        double det = 0;
        for (double dd : f.tri_det) det = std::max(det, std::abs(dd - 1));
        if (prev_det > 0) worst_gain = std::min(worst_gain, prev_det / det);
        prev_det = det;
    }
    c.gate(worst_gain >= 8.0, "rk4_gain", worst_gain);
    c.finish(0);
}
