#include "srnf/assembly.hpp"

#include "srnf/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

namespace srnflab {

namespace {

Vec2 e2(double a) { return Vec2(std::cos(a), std::sin(a)); }
Vec2 rot90(const Vec2& v) { return Vec2(-v.y(), v.x()); }
Vec3 lift(const Vec2& p, double z) { return Vec3(p.x(), p.y(), z); }

enum class ZoneKind { Identity, Flat, CapTranslate, FlipInvert, FlipTwist };

struct ZoneTag {
    ZoneKind kind = ZoneKind::Identity;
    int disc = -1; // CapTranslate only
};

using HeightFn = std::function<double(const Vec2&)>;
using ShearFn = std::function<double(double)>;

struct Builder {
    SurfaceImmersion surf;
    std::vector<ZoneTag> tags; // one per patch

    void add(ParamPatch p, const ZoneTag& t) {
        surf.patches.push_back(std::move(p));
        tags.push_back(t);
    }
};

double height_or_zero(const HeightFn& h, const Vec2& q) { return h ? h(q) : 0.0; }

/* 12-patch conforming disc chart about `c`: four quadrant squares of
   half-side R_d/2 around the center and eight ruled sectors out to the rim
   circle, all sector rays at phase + 45-degree multiples; z = h(x, y). */
void add_disc12(Builder& b, const Vec2& c, double R_d, double phase, int n,
                const HeightFn& h, const ZoneTag& tag) {
    const double s0 = 0.5 * R_d;
    Vec2 ex[4], ey[4];
    ex[0] = e2(phase);
    ey[0] = rot90(ex[0]);
    for (int k = 1; k < 4; ++k) {
        ex[k] = rot90(ex[k - 1]);
        ey[k] = rot90(ey[k - 1]);
    }

    for (int k = 0; k < 4; ++k) {
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Vec2 q = c + (p.u_of(i) * s0) * ex[k] + (p.v_of(j) * s0) * ey[k];
                p.at(i, j) = lift(q, height_or_zero(h, q));
            }
        b.add(std::move(p), tag);
    }

    Vec2 perim[9]; // square-perimeter points on the eight 45-degree rays
    for (int m = 0; m < 8; ++m) {
        int k = m / 2;
        perim[m] = (m % 2 == 0) ? Vec2(c + s0 * ex[k]) : Vec2(c + s0 * (ex[k] + ey[k]));
    }
    perim[8] = perim[0];

    for (int m = 0; m < 8; ++m) {
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n, n);
        for (int i = 0; i < n; ++i) {
            double t = p.u_of(i);
            for (int j = 0; j < n; ++j) {
                double s = p.v_of(j);
                Vec2 inner = (1.0 - s) * perim[m] + s * perim[m + 1];
                Vec2 outer = c + R_d * e2((m + s) * (kPi / 4) + phase);
                Vec2 q = (1.0 - t) * inner + t * outer;
                p.at(i, j) = lift(q, height_or_zero(h, q));
            }
        }
        b.add(std::move(p), tag);
    }
}

/* Eight 45-degree sectors of the annulus [r0, r1] about `c`. Sample angles
   are (k + v) * pi/4 + phase + shear(r); a null shear gives a plain ring.
   u runs radially inner-to-outer, v counterclockwise. */
void add_ring8(Builder& b, const Vec2& c, double r0, double r1, double phase, int n_t, int n_s,
               const ShearFn& shear, const HeightFn& h, const ZoneTag& tag) {
    for (int k = 0; k < 8; ++k) {
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n_t, n_s);
        for (int i = 0; i < n_t; ++i) {
            double r = r0 + p.u_of(i) * (r1 - r0);
            double rowphase = phase + (shear ? shear(r) : 0.0);
            for (int j = 0; j < n_s; ++j) {
                double a = (k + p.v_of(j)) * (kPi / 4) + rowphase;
                Vec2 q = c + r * e2(a);
                p.at(i, j) = lift(q, height_or_zero(h, q));
            }
        }
        b.add(std::move(p), tag);
    }
}

/* Ruled ring morphing circle(c0, r0) into circle(c1, r1) along matching
   angles; injective when |c1 - c0| < r1 - r0 (callers check with margin). */
void add_morph8(Builder& b, const Vec2& c0, double r0, const Vec2& c1, double r1, double phase,
                int n_t, int n_s, const ZoneTag& tag) {
    for (int k = 0; k < 8; ++k) {
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n_t, n_s);
        for (int i = 0; i < n_t; ++i) {
            double t = p.u_of(i);
            Vec2 cc = (1.0 - t) * c0 + t * c1;
            double r = (1.0 - t) * r0 + t * r1;
            for (int j = 0; j < n_s; ++j) {
                double a = (k + p.v_of(j)) * (kPi / 4) + phase;
                p.at(i, j) = lift(cc + r * e2(a), 0.0);
            }
        }
        b.add(std::move(p), tag);
    }
}

/* One pants leg about `hole`: eight ruled sectors from circle(hole, r_in) to
   the composite outer boundary made of the far half of circle(M, R_p) and
   the cut chord through M perpendicular to (M - hole). Sector rays sit at
   absolute 45-degree multiples and (M - hole) must point along one of them;
   rays facing the cut land on the chord uniformly in the signed chord offset
   with breakpoints at 0, R_p/sqrt(2), R_p (the chord's own 45-degree points),
   so the two legs of a pants pair sample the chord identically. Rays facing
   away land on the circle at the matching center angle. */
void add_pants_leg(Builder& b, const Vec2& hole, double r_in, const Vec2& M, double R_p, int n,
                   const ZoneTag& tag) {
    Vec2 axis = M - hole;
    double ang = std::atan2(axis.y(), axis.x());
    long m8 = std::lround(ang / (kPi / 4));
    if (std::abs(ang - static_cast<double>(m8) * (kPi / 4)) > 1e-9)
        throw InvalidParam("pants cut axis must lie on the 45-degree tiling grid");
    Vec2 nhat = rot90(axis.normalized());

    const double inv_s2 = 1.0 / std::sqrt(2.0);
    // chord offsets at the cut rays lambda = -90, -45, 0, 45, 90 degrees
    const double gval[5] = {-R_p, -R_p * inv_s2, 0.0, R_p * inv_s2, R_p};

    for (int k = 0; k < 8; ++k) {
        int lk = static_cast<int>(((k - m8) % 8 + 8) % 8); // ray index relative to the axis
        bool cut = (lk == 6 || lk == 7 || lk == 0 || lk == 1);
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n, n);
        for (int i = 0; i < n; ++i) {
            double t = p.u_of(i);
            for (int j = 0; j < n; ++j) {
                double s = p.v_of(j);
                Vec2 inner = hole + r_in * e2((k + s) * (kPi / 4));
                Vec2 outer;
                if (cut) {
                    int block = (lk + 2) % 8; // 0..3 across lambda in [-90, 90]
                    double ga = gval[block], gb = gval[block + 1];
                    outer = M + (ga + s * (gb - ga)) * nhat;
                } else {
                    outer = M + R_p * e2((k + s) * (kPi / 4));
                }
                p.at(i, j) = lift((1.0 - t) * inner + t * outer, 0.0);
            }
        }
        b.add(std::move(p), tag);
    }
}

/* Profile of the rounded rim closure: unit-speed-in-tau curve starting at
   (R, 0) pointing radially outward whose tangent angle turns by -pi across
   tau in [0, 1] (C-infinity flat at both ends), scaled by L. It returns to
   radius R analytically and ends moving radially inward at depth z < 0. */
struct RimProfile {
    std::vector<double> rho, z;
};

RimProfile integrate_rim_profile(double R, double L, int n_t) {
    RimProfile pr;
    pr.rho.resize(n_t);
    pr.z.resize(n_t);
    pr.rho[0] = R;
    pr.z[0] = 0.0;
    auto dir = [](double tau) {
        double psi = -kPi * cinf_step(tau);
        return Vec2(std::cos(psi), std::sin(psi));
    };
    const double h = 1.0 / (n_t - 1);
    const int sub = 32;
    for (int i = 0; i + 1 < n_t; ++i) {
        double a = i * h;
        Vec2 acc = Vec2::Zero();
        double hs = h / sub;
        for (int m = 0; m < sub; ++m) {
            double x0 = a + m * hs;
            acc += (hs / 6.0) * (dir(x0) + 4.0 * dir(x0 + 0.5 * hs) + dir(x0 + hs));
        }
        pr.rho[i + 1] = pr.rho[i] + L * acc.x();
        pr.z[i + 1] = pr.z[i] + L * acc.y();
    }
    return pr;
}

/* Smooth closure of the outer circle: a surface-of-revolution rim ring whose
   profile wraps around the edge (tangent plane turning from horizontal back
   to horizontal), then a 12-patch bottom cap with an extra signed bulge h0. */
void add_rim_closure(Builder& b, const Vec2& c, double R, double L, double h0, int n_s,
                     const ZoneTag& tag) {
    // The radial direction is not shared with any other zone, so sample it
    // denser than the angular edges; the profile curvature dominates the
    // Gauss-Bonnet quadrature error otherwise.
    const int n_t = 2 * (n_s - 1) + 1;
    RimProfile pr = integrate_rim_profile(R, L, n_t);
    for (int k = 0; k < 8; ++k) {
        ParamPatch p({0.0, 1.0, 0.0, 1.0}, n_t, n_s);
        for (int i = 0; i < n_t; ++i)
            for (int j = 0; j < n_s; ++j) {
                double a = (k + p.v_of(j)) * (kPi / 4);
                p.at(i, j) = lift(c + pr.rho[i] * e2(a), pr.z[i]);
            }
        b.add(std::move(p), tag);
    }
    const double Rb = pr.rho.back(), zb = pr.z.back();
    HeightFn hb = [c, Rb, zb, h0](const Vec2& q) {
        return zb + h0 * cinf_bump((q - c).norm() / Rb);
    };
    add_disc12(b, c, Rb, 0.0, n_s, hb, tag);
}

struct StackPlan {
    const ArcFlow* band = nullptr; // the disc's own un-rotation arc, if any
    double rc = 0;                 // stack plateau radius (plain ring outer edge)
    double rs = 0;                 // stack support radius (sheared ring outer edge)
};

} // namespace

ChessboardBuild gen_chessboard_detailed(const ChessboardSpec& spec) {
    const FlatPlace& fp = spec.place;
    const int n_holes = static_cast<int>(fp.inner.size());
    const int n = spec.edge_samples;
    if (n_holes < 1 || n_holes > 2)
        throw InvalidParam("the conforming chessboard tiling covers one or two discs");
    if (static_cast<int>(spec.cap_heights.size()) != n_holes + 1)
        throw InvalidParam("cap_heights must hold the bottom bulge plus one height per disc");
    if (static_cast<int>(spec.translations.size()) != n_holes)
        throw InvalidParam("chessboard spec needs one translation per disc");
    if (n < 17 || n % 2 == 0) throw InvalidParam("edge_samples must be odd and at least 17");
    fp.validate();

    ChessboardBuild out;
    auto dom = std::make_shared<HoledDiscDomain>(make_domain(fp, spec.mesh_h, spec.collar_width));
    RearrangementResult rr = nested_rearrangement_diffeo(*dom, spec.translations);
    out.moser = flat_place_diffeo(*dom, spec.translations, rr);
    out.domain = dom;

    const Vec2 O = fp.outer.center;
    const double R = fp.outer.radius;
    const double cw = dom->collar_width;
    const std::vector<ArcFlow>& arcs = rr.diffeo.arcs();

    // Match every verified band chart to its disc stack; at most one band is
    // global (the carrier pivot about which the discs ride).
    std::vector<StackPlan> stacks(n_holes);
    const ArcFlow* g_arc = nullptr;
    Vec2 g_src = Vec2::Zero();
    for (const BandChart& bc : rr.bands) {
        bool matched = false;
        for (int d = 0; d < n_holes; ++d) {
            if ((bc.src_center - fp.inner[d].center).norm() <= 1e-9 * R) {
                if (stacks[d].band)
                    throw InvalidParam("rearrangement leaves two bands on one disc stack");
                stacks[d].band = &arcs[bc.arc];
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (g_arc) throw InvalidParam("rearrangement needs more than one carrier band");
        g_arc = &arcs[bc.arc];
        g_src = bc.src_center;
    }
    if (g_arc && (g_src - g_arc->center()).norm() > 1e-9 * R)
        throw InvalidParam("carrier band does not sit about its own arc center");
    for (int d = 0; d < n_holes; ++d) {
        StackPlan& sp = stacks[d];
        sp.rc = sp.band ? sp.band->plateau_outer() : fp.inner[d].radius + 1.2 * cw;
        sp.rs = sp.band ? sp.band->support_outer() : sp.rc;
    }

    Builder b;
    const ZoneTag flat_tag{ZoneKind::Flat, -1};

    auto stack_add = [&](int d, double phase_leg) {
        const Circle& hole = fp.inner[d];
        const StackPlan& sp = stacks[d];
        const ArcFlow* arc = sp.band;
        double phase_in = arc ? phase_leg - 0.5 * arc->angle() : phase_leg;
        Vec2 c = hole.center;
        double rd = hole.radius;
        double hcap = spec.cap_heights[1 + d];
        HeightFn hf = [c, rd, hcap](const Vec2& q) {
            return hcap * cinf_bump((q - c).norm() / rd);
        };
        add_disc12(b, c, rd, phase_in, n, hf, {ZoneKind::CapTranslate, d});
        add_ring8(b, c, rd, sp.rc, phase_in, n, n, {}, {}, flat_tag);
        if (arc)
            add_ring8(b, c, sp.rc, sp.rs, phase_leg, n, n,
                      [arc](double r) { return -0.5 * arc->angular_shift(r); }, {}, flat_tag);
    };

    if (rr.schedule.empty()) {
        for (int d = 0; d < n_holes; ++d) stack_add(d, 0.0);
        if (n_holes == 1) {
            const Circle& hole = fp.inner[0];
            if ((R - stacks[0].rc) - (hole.center - O).norm() < 1.05 * cw)
                throw InvalidParam("disc sits too close to the rim for the ring chart");
            add_morph8(b, hole.center, stacks[0].rc, O, R, 0.0, n, n, flat_tag);
        } else {
            Vec2 M = 0.5 * (fp.inner[0].center + fp.inner[1].center);
            double R_p = 0.0;
            for (int d = 0; d < 2; ++d)
                R_p = std::max(R_p, (fp.inner[d].center - M).norm() + stacks[d].rs + 0.01 * R);
            if ((M - O).norm() + R_p > R - 1.05 * cw)
                throw InvalidParam("discs sit too close to the rim for the pants chart");
            add_pants_leg(b, fp.inner[0].center, stacks[0].rs, M, R_p, n, flat_tag);
            add_pants_leg(b, fp.inner[1].center, stacks[1].rs, M, R_p, n, flat_tag);
            add_morph8(b, M, R_p, O, R, 0.0, n, n, flat_tag);
        }
    } else {
        if (!g_arc) throw InvalidParam("moving rearrangement lacks a carrier band");
        const double phase_leg = -0.5 * g_arc->angle();
        const Vec2 P = g_arc->center();
        const double plat = g_arc->plateau_outer();
        const double supp = g_arc->support_outer();

        if (n_holes == 1) {
            if (!stacks[0].band) throw InvalidParam("moving disc lacks its pair band");
            const Circle& hole = fp.inner[0];
            if ((plat - stacks[0].rs) - (P - hole.center).norm() < 0.004 * R)
                throw InvalidParam("carrier plateau does not nest the disc stack");
            stack_add(0, phase_leg);
            add_morph8(b, hole.center, stacks[0].rs, P, plat, phase_leg, n, n, flat_tag);
        } else {
            if (std::abs(std::remainder(g_arc->angle(), kPi)) > 1e-9)
                throw InvalidParam("two-disc tiling needs a half-turn carrier arc");
            for (int d = 0; d < 2; ++d) {
                if ((P - fp.inner[d].center).norm() + stacks[d].rs > plat - 0.004 * R)
                    throw InvalidParam("carrier plateau does not nest both disc stacks");
                stack_add(d, phase_leg);
            }
            add_pants_leg(b, fp.inner[0].center, stacks[0].rs, P, plat, n, flat_tag);
            add_pants_leg(b, fp.inner[1].center, stacks[1].rs, P, plat, n, flat_tag);
        }
        add_ring8(b, P, plat, supp, 0.0, n, n,
                  [g_arc](double r) { return -0.5 * g_arc->angular_shift(r); }, {}, flat_tag);
        if ((R - supp) - (P - O).norm() < 1.05 * cw)
            throw InvalidParam("carrier support sits too close to the rim");
        add_morph8(b, P, supp, O, R, 0.0, n, n, flat_tag);
    }

    add_rim_closure(b, O, R, 0.5 * R, spec.cap_heights[0], n, {ZoneKind::Identity, -1});

    SurfaceImmersion& id = b.surf;
    set_reference_density(id);
    id.seams = auto_build_seams(id, 1e-9 * id.bbox_diag());
    id.validate();
    if (!id.is_closed()) throw SpecInvalid("assembled chessboard surface is not closed");

    SurfaceImmersion moved = id;
    for (std::size_t pi = 0; pi < moved.patches.size(); ++pi) {
        ParamPatch& p = moved.patches[pi];
        const ZoneTag& tag = b.tags[pi];
        if (tag.kind == ZoneKind::CapTranslate) {
            Vec3 t3 = lift(spec.translations[tag.disc], 0.0);
            for (Vec3& q : p.pos) q += t3;
        } else if (tag.kind == ZoneKind::Flat) {
            for (Vec3& q : p.pos) {
                Vec2 im = out.moser.map.apply(Vec2(q.x(), q.y()));
                q = lift(im, 0.0);
            }
        }
    }
    moved.validate();

    for (std::size_t pi = 0; pi < id.patches.size(); ++pi)
        if (b.tags[pi].kind == ZoneKind::Flat)
            for (const Vec3& q : id.patches[pi].pos) out.flat_samples.emplace_back(q.x(), q.y());

    out.id_surface = std::move(id);
    out.moved_surface = std::move(moved);
    return out;
}

std::pair<SurfaceImmersion, SurfaceImmersion> gen_chessboard(const ChessboardSpec& spec) {
    ChessboardBuild build = gen_chessboard_detailed(spec);
    return {std::move(build.id_surface), std::move(build.moved_surface)};
}

double default_flip_twist(double rho, double inner_radius, double outer_radius) {
    double s = (rho - inner_radius) / (outer_radius - inner_radius);
    return kPi * (1.0 - cinf_step((s - 0.1) / 0.8));
}

std::pair<SurfaceImmersion, SurfaceImmersion> gen_flip(const FlipSpec& spec) {
    const double r1 = spec.inner_radius, r2 = spec.outer_radius;
    if (!(r1 > 0.0) || !(r2 > r1))
        throw InvalidParam("flip radii must satisfy 0 < inner < outer");
    const int n = spec.edge_samples;
    if (n < 17 || n % 2 == 0) throw InvalidParam("edge_samples must be odd and at least 17");
    std::function<double(double)> theta = spec.twist;
    if (!theta) theta = [r1, r2](double rho) { return default_flip_twist(rho, r1, r2); };

    const double t_in = theta(r1), t_out = theta(r2);
    if (std::abs(t_out) > 1e-10) throw ProfileInvalid("twist must vanish at the outer rim");
    if (spec.identity_branch) {
        if (std::abs(t_in) > 1e-10)
            throw ProfileInvalid("identity-branch twist must vanish at the inner rim");
    } else if (std::abs(t_in - kPi) > 1e-10) {
        throw ProfileInvalid("twist must equal pi at the inner rim (central inversion seam)");
    }

    Builder b;
    const Vec2 c = Vec2::Zero();
    const double phase_in = -0.5 * t_in;
    const Vec2 side_c(0.25 * r1, 0.1 * r1);
    const double h_main = 0.25 * r1, h_side = 0.1 * r1, r_side = 0.5 * r1;
    HeightFn h1 = [r1, side_c, h_main, h_side, r_side](const Vec2& q) {
        return h_main * cinf_bump(q.norm() / r1) + h_side * cinf_bump((q - side_c).norm() / r_side);
    };
    ZoneKind inner_kind = spec.identity_branch ? ZoneKind::Identity : ZoneKind::FlipInvert;
    add_disc12(b, c, r1, phase_in, n, h1, {inner_kind, -1});
    add_ring8(b, c, r1, r2, 0.0, n, n, [&theta](double r) { return -0.5 * theta(r); }, {},
              {ZoneKind::FlipTwist, -1});
    add_rim_closure(b, c, r2, 0.5 * r2, -0.6 * r2, n, {ZoneKind::Identity, -1});

    SurfaceImmersion& id = b.surf;
    set_reference_density(id);
    id.seams = auto_build_seams(id, 1e-9 * id.bbox_diag());
    id.validate();
    if (!id.is_closed()) throw SpecInvalid("assembled flip surface is not closed");

    SurfaceImmersion moved = id;
    for (std::size_t pi = 0; pi < moved.patches.size(); ++pi) {
        ParamPatch& p = moved.patches[pi];
        switch (b.tags[pi].kind) {
        case ZoneKind::FlipInvert:
            for (Vec3& q : p.pos) q = -q;
            break;
        case ZoneKind::FlipTwist:
            for (Vec3& q : p.pos) {
                Vec2 xy(q.x(), q.y());
                double a = theta(xy.norm());
                double ca = std::cos(a), sa = std::sin(a);
                q = Vec3(ca * xy.x() - sa * xy.y(), sa * xy.x() + ca * xy.y(), 0.0);
            }
            break;
        default:
            break;
        }
    }
    moved.validate();
    return {std::move(id), std::move(moved)};
}

double flip_twist_det_dev(const FlipSpec& spec, double h_st) {
    if (!(h_st > 0)) throw InvalidParam("flip_twist_det_dev: stencil width must be positive");
    const double r1 = spec.inner_radius, r2 = spec.outer_radius;
    if (!(r1 > 0.0) || !(r2 > r1))
        throw InvalidParam("flip radii must satisfy 0 < inner < outer");
    std::function<double(double)> theta = spec.twist;
    if (!theta) theta = [r1, r2](double rho) { return default_flip_twist(rho, r1, r2); };

    // Radii are clamped to the annulus before evaluating the profile, so the
    // stencil stays meaningful at the rims (where shipped profiles are flat).
    auto tw = [&](const Vec2& p) {
        double rho = p.norm();
        double a = theta(std::clamp(rho, r1, r2));
        double ca = std::cos(a), sa = std::sin(a);
        return Vec2(ca * p.x() - sa * p.y(), sa * p.x() + ca * p.y());
    };

    double dev = 0.0;
    const int nr = 320, na = 48;
    for (int i = 0; i <= nr; ++i) {
        double rho = r1 + (r2 - r1) * i / nr;
        for (int j = 0; j < na; ++j) {
            Vec2 p = rho * e2(2 * kPi * j / na + 0.37);
            Vec2 du = (tw(p + Vec2(h_st, 0)) - tw(p - Vec2(h_st, 0))) / (2 * h_st);
            Vec2 dv = (tw(p + Vec2(0, h_st)) - tw(p - Vec2(0, h_st))) / (2 * h_st);
            dev = std::max(dev, std::abs(du.x() * dv.y() - du.y() * dv.x() - 1.0));
        }
    }
    return dev;
}

} // namespace srnflab
