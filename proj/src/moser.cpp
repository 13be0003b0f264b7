#include "srnf/moser.hpp"
#include "srnf/profiles.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

namespace srnflab {

namespace {

/* Rotation matrix with entries snapped at exact 0/±1 so plateau maps of
   quarter- and half-turn arcs are exact rigid motions. */
Mat2 rot2(double a) {
    double c = std::cos(a), s = std::sin(a);
    auto snap = [](double v) {
        if (std::abs(v) < 1e-15) return 0.0;
        if (std::abs(v - 1.0) < 1e-15) return 1.0;
        if (std::abs(v + 1.0) < 1e-15) return -1.0;
        return v;
    };
    Mat2 r;
    r << snap(c), snap(-s), snap(s), snap(c);
    return r;
}

double signed_angle(const Vec2& u, const Vec2& v) {
    return std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v));
}

} // namespace

// ---------------------------------------------------------------- ArcFlow

ArcFlow::ArcFlow(const Vec2& center, double angle, double plateau_lo, double plateau_hi,
                 double tau_in, double tau_out)
    : center_(center), angle_(angle), lo_(plateau_lo), hi_(plateau_hi),
      tin_(plateau_lo > 0 ? tau_in : 0.0), tout_(tau_out) {
    if (!(hi_ > 0) || lo_ < 0 || !(hi_ > lo_))
        throw InvalidParam("arc flow: plateau interval must satisfy 0 <= lo < hi");
    if (lo_ > 0 && !(tin_ > 0 && tin_ <= lo_))
        throw InvalidParam("arc flow: tau_in must lie in (0, plateau_lo]");
    if (!(tout_ > 0)) throw InvalidParam("arc flow: tau_out must be positive");
    if (!std::isfinite(angle_)) throw InvalidParam("arc flow: angle must be finite");
    rot_plateau_ = rot2(angle_);
}

double ArcFlow::angular_shift(double rho) const {
    if (rho >= hi_) return angle_ * (1.0 - smoothstep5((rho - hi_) / tout_));
    if (lo_ <= 0 || rho >= lo_) return angle_;
    return angle_ * smoothstep5((rho - (lo_ - tin_)) / tin_);
}

double ArcFlow::angular_shift_d(double rho) const {
    if (rho >= hi_) return -angle_ * smoothstep5_d((rho - hi_) / tout_) / tout_;
    if (lo_ <= 0 || rho >= lo_) return 0.0;
    return angle_ * smoothstep5_d((rho - (lo_ - tin_)) / tin_) / tin_;
}

Vec2 ArcFlow::eval(const Vec2& x) const {
    Vec2 u = x - center_;
    double rho = u.norm();
    if (rho <= support_inner() || rho >= support_outer()) return x;
    if (rho >= lo_ && rho <= hi_) return center_ + rot_plateau_ * u;
    return center_ + rot2(angular_shift(rho)) * u;
}

Mat2 ArcFlow::jacobian(const Vec2& x) const {
    Vec2 u = x - center_;
    double rho = u.norm();
    if (rho <= support_inner() || rho >= support_outer()) return Mat2::Identity();
    if (rho >= lo_ && rho <= hi_) return rot_plateau_;
    double ad = angular_shift_d(rho);
    Vec2 ju(-u.y(), u.x());
    // d/dx [R(A(rho)) u] = R(A) (I + A'(rho)/rho * (J u) u^T); det = 1 since u^T J u = 0.
    Mat2 m = Mat2::Identity() + (ad / rho) * (ju * u.transpose());
    return rot2(angular_shift(rho)) * m;
}

double ArcFlow::support_gap(const Vec2& p) const {
    double rho = radius(p), si = support_inner(), so = support_outer();
    if (rho > so) return rho - so;
    if (rho < si) return si - rho;
    return lo_ > 0 ? -std::min(rho - si, so - rho) : -(so - rho);
}

// ------------------------------------------------------------ PlaneDiffeo

void PlaneDiffeo::set_corrector(const TriMesh* mesh, std::vector<Vec2> node_disp) {
    if (mesh == nullptr || node_disp.size() != mesh->nodes.size())
        throw InvalidParam("corrector: displacement count must match mesh nodes");
    corrector_mesh_ = mesh;
    corrector_disp_ = std::move(node_disp);
}

Vec2 PlaneDiffeo::corrector_apply(const Vec2& x) const {
    std::array<double, 3> b;
    int t = corrector_mesh_->locate(x, b);
    if (t < 0) return x; // displacement vanishes on collars, so identity off-mesh
    const auto& tri = corrector_mesh_->tris[t];
    return x + b[0] * corrector_disp_[tri[0]] + b[1] * corrector_disp_[tri[1]] +
           b[2] * corrector_disp_[tri[2]];
}

Mat2 PlaneDiffeo::corrector_jac(const Vec2& x) const {
    std::array<double, 3> b;
    int t = corrector_mesh_->locate(x, b);
    if (t < 0) return Mat2::Identity();
    const auto& tri = corrector_mesh_->tris[t];
    const Vec2& p0 = corrector_mesh_->nodes[tri[0]];
    Mat2 e;
    e.col(0) = corrector_mesh_->nodes[tri[1]] - p0;
    e.col(1) = corrector_mesh_->nodes[tri[2]] - p0;
    Mat2 einv = e.inverse();
    Vec2 g1 = einv.row(0), g2 = einv.row(1), g0 = -(g1 + g2);
    Mat2 j = Mat2::Identity();
    j += corrector_disp_[tri[0]] * g0.transpose();
    j += corrector_disp_[tri[1]] * g1.transpose();
    j += corrector_disp_[tri[2]] * g2.transpose();
    return j;
}

Vec2 PlaneDiffeo::apply(const Vec2& x) const {
    Vec2 y = has_corrector() ? corrector_apply(x) : x;
    for (const auto& a : arcs_) y = a.eval(y);
    return y;
}

double PlaneDiffeo::fd_det(const Vec2& x, double h_st) const {
    if (!(h_st > 0)) throw InvalidParam("fd_det: stencil width must be positive");
    Vec2 du = (apply(x + Vec2(h_st, 0)) - apply(x - Vec2(h_st, 0))) / (2 * h_st);
    Vec2 dv = (apply(x + Vec2(0, h_st)) - apply(x - Vec2(0, h_st))) / (2 * h_st);
    return du.x() * dv.y() - du.y() * dv.x();
}

double PlaneDiffeo::analytic_det(const Vec2& x) const {
    Mat2 j = Mat2::Identity();
    Vec2 y = x;
    if (has_corrector()) {
        j = corrector_jac(x);
        y = corrector_apply(x);
    }
    for (const auto& a : arcs_) {
        j = a.jacobian(y) * j;
        y = a.eval(y);
    }
    return j.determinant();
}

// ---------------------------------------------------------------- routing

namespace {

struct RouteState {
    std::vector<Circle> cur;  // current disc positions
    std::vector<double> rot;  // accumulated rotation per disc
    std::vector<ArcFlow> arcs;
    std::vector<MoveStep> executed;
};

struct RouteContext {
    const HoledDiscDomain* dom = nullptr;
    double r_outer = 0, cw = 0;
    double tau_floor = 0, tau_cap = 0;
    Vec2 outer_center = Vec2::Zero();

    double rc_plateau(const Circle& c) const { return c.radius + 1.2 * cw; }
    double rc_avoid(const Circle& c) const { return c.radius + cw; }
};

/* One cut-off rotation about O moving disc k along the arc from its current
   center to `to`. Discs whose inflated band overlaps the plateau are
   co-carried (plateau extended to contain them); all others must clear the
   support annulus. Returns false when no adequate transition widths exist. */
bool try_pivot(const RouteContext& cx, RouteState& st, int k, const Vec2& O, const Vec2& to) {
    const Vec2 from = st.cur[k].center;
    double rho_a = (from - O).norm(), rho_b = (to - O).norm();
    if (std::abs(rho_a - rho_b) > 1e-9 * cx.r_outer) return false;
    double theta = signed_angle(from - O, to - O);
    if (std::abs(theta) < 1e-14) return false;

    double lo = rho_a - cx.rc_plateau(st.cur[k]);
    double hi = rho_a + cx.rc_plateau(st.cur[k]);
    if (lo <= cx.tau_floor) return false; // pivot too close to the disc band

    const int n = static_cast<int>(st.cur.size());
    std::vector<char> carried(n, 0);
    carried[k] = 1;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int j = 0; j < n; ++j) {
            if (carried[j]) continue;
            double rj = (st.cur[j].center - O).norm();
            double blo = rj - cx.rc_plateau(st.cur[j]), bhi = rj + cx.rc_plateau(st.cur[j]);
            if (bhi < lo || blo > hi) continue;
            carried[j] = 1;
            if (blo < lo) lo = blo;
            if (bhi > hi) hi = bhi;
            grew = true;
        }
    }
    if (lo <= cx.tau_floor) return false;

    double tin_max = 0.9 * lo, tout_max = 1e100;
    for (int j = 0; j < n; ++j) {
        if (carried[j]) continue;
        double rj = (st.cur[j].center - O).norm(), av = cx.rc_avoid(st.cur[j]);
        if (rj + av <= lo)
            tin_max = std::min(tin_max, lo - (rj + av));
        else if (rj - av >= hi)
            tout_max = std::min(tout_max, (rj - av) - hi);
        else
            return false;
    }
    double dom_limit = (cx.r_outer - 1.1 * cx.cw) - ((O - cx.outer_center).norm() + hi);
    tout_max = std::min(tout_max, dom_limit);

    double tin = std::min(cx.tau_cap, 0.8 * tin_max);
    double tout = std::min(cx.tau_cap, 0.8 * tout_max);
    if (tin < cx.tau_floor || tout < cx.tau_floor) return false;

    ArcFlow arc(O, theta, lo, hi, tin, tout);
    for (int j = 0; j < n; ++j) {
        if (!carried[j]) continue;
        st.cur[j].center = arc.eval(st.cur[j].center);
        st.rot[j] += theta;
    }
    st.arcs.push_back(arc);
    return true;
}

/* Local rotation about `center` by `angle`, plateau covering radius rc.
   Used for arrival un-rotations and final rotation corrections. */
bool try_local_rotation(const RouteContext& cx, RouteState& st, int k, const Vec2& center,
                        double angle, double rc) {
    if (std::abs(angle) < 1e-14) return true;
    const int n = static_cast<int>(st.cur.size());
    double hi = rc;
    std::vector<char> carried(n, 0);
    carried[k] = 1;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int j = 0; j < n; ++j) {
            if (carried[j]) continue;
            double rj = (st.cur[j].center - center).norm();
            if (rj - cx.rc_plateau(st.cur[j]) > hi) continue;
            carried[j] = 1;
            hi = std::max(hi, rj + cx.rc_plateau(st.cur[j]));
            grew = true;
        }
    }
    double tout_max = (cx.r_outer - 1.1 * cx.cw) - ((center - cx.outer_center).norm() + hi);
    for (int j = 0; j < n; ++j) {
        if (carried[j]) continue;
        double rj = (st.cur[j].center - center).norm();
        tout_max = std::min(tout_max, (rj - cx.rc_avoid(st.cur[j])) - hi);
    }
    double tout = std::min(cx.tau_cap, 0.8 * tout_max);
    if (tout < cx.tau_floor) return false;

    ArcFlow arc(center, angle, 0.0, hi, 0.0, tout);
    for (int j = 0; j < n; ++j) {
        if (!carried[j]) continue;
        st.cur[j].center = arc.eval(st.cur[j].center);
        st.rot[j] += angle;
    }
    st.arcs.push_back(arc);
    return true;
}

/* Pivot-pair move: rotate about a pivot on the perpendicular bisector of
   (from, to), then un-rotate about the target so the disc arrives exactly
   translated. Pivots are tried from the chord midpoint outward. */
bool try_move(const RouteContext& cx, RouteState& st, int k, const Vec2& to) {
    const Vec2 from = st.cur[k].center;
    double d = (to - from).norm();
    if (d < 1e-14 * cx.r_outer) return true;
    Vec2 mid = 0.5 * (from + to);
    Vec2 dir = (to - from) / d;
    Vec2 nh(-dir.y(), dir.x());
    const double offs[] = {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0};
    for (double s : offs) {
        RouteState trial = st;
        Vec2 O = mid + s * d * nh;
        if (!try_pivot(cx, trial, k, O, to)) continue;
        double theta = trial.arcs.back().angle();
        if (!try_local_rotation(cx, trial, k, to, -theta, cx.rc_plateau(st.cur[k]))) continue;
        st = std::move(trial);
        st.executed.push_back({k, to});
        return true;
    }
    // Axis-aligned two-leg detours, each leg a pivot pair.
    const Vec2 ways[] = {Vec2(from.x(), to.y()), Vec2(to.x(), from.y())};
    for (const Vec2& w : ways) {
        if ((w - from).norm() < 1e-12 || (w - to).norm() < 1e-12) continue;
        RouteState trial = st;
        bool ok = true;
        for (const Vec2& leg : {w, to}) {
            const Vec2 cur = trial.cur[k].center;
            double dl = (leg - cur).norm();
            if (dl < 1e-14) continue;
            Vec2 m2 = 0.5 * (cur + leg), d2 = (leg - cur) / dl;
            Vec2 n2(-d2.y(), d2.x());
            bool leg_ok = false;
            for (double s : offs) {
                RouteState t2 = trial;
                if (!try_pivot(cx, t2, k, m2 + s * dl * n2, leg)) continue;
                double theta = t2.arcs.back().angle();
                if (!try_local_rotation(cx, t2, k, leg, -theta, cx.rc_plateau(trial.cur[k]))) continue;
                trial = std::move(t2);
                leg_ok = true;
                break;
            }
            if (!leg_ok) { ok = false; break; }
        }
        if (ok) {
            st = std::move(trial);
            st.executed.push_back({k, w});
            st.executed.push_back({k, to});
            return true;
        }
    }
    return false;
}

std::vector<double> deformed_tri_dets(const TriMesh& mesh, const std::vector<Vec2>& img) {
    std::vector<double> dets(mesh.tris.size());
    for (size_t t = 0; t < mesh.tris.size(); ++t) {
        const auto& tr = mesh.tris[t];
        Vec2 a = mesh.nodes[tr[1]] - mesh.nodes[tr[0]];
        Vec2 b = mesh.nodes[tr[2]] - mesh.nodes[tr[0]];
        Vec2 ia = img[tr[1]] - img[tr[0]];
        Vec2 ib = img[tr[2]] - img[tr[0]];
        dets[t] = (ia.x() * ib.y() - ia.y() * ib.x()) / (a.x() * b.y() - a.y() * b.x());
    }
    return dets;
}

PlanarMap sample_planar_map(const HoledDiscDomain& dom, const PlaneDiffeo& f,
                            const std::vector<Vec2>& translations) {
    PlanarMap map;
    map.node_images.resize(dom.mesh.nodes.size());
    for (size_t i = 0; i < dom.mesh.nodes.size(); ++i)
        map.node_images[i] = f.apply(dom.mesh.nodes[i]);
    // Closed-form dets at centroids: arc twists vary below mesh scale near
    // pivots, where deformed-vertex secant dets would misreport orientation.
    map.tri_det.resize(dom.mesh.tris.size());
    for (size_t t = 0; t < dom.mesh.tris.size(); ++t) {
        const auto& tr = dom.mesh.tris[t];
        Vec2 cen = (dom.mesh.nodes[tr[0]] + dom.mesh.nodes[tr[1]] + dom.mesh.nodes[tr[2]]) / 3.0;
        map.tri_det[t] = f.analytic_det(cen);
    }
    map.boundary_tags.push_back("identity");
    for (const Vec2& t : translations) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "translate(%.17g,%.17g)", t.x(), t.y());
        map.boundary_tags.push_back(buf);
    }
    return map;
}

} // namespace

RearrangementResult initial_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                 const std::vector<Vec2>& translations) {
    std::vector<MoveStep> schedule;
    for (size_t k = 0; k < translations.size(); ++k)
        if (translations[k].norm() > 0)
            schedule.push_back({static_cast<int>(k),
                                dom.geometry.inner[k].center + translations[k]});
    return initial_rearrangement_diffeo(dom, translations, schedule);
}

RearrangementResult initial_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                 const std::vector<Vec2>& translations,
                                                 const std::vector<MoveStep>& schedule) {
    const auto& fp = dom.geometry;
    if (translations.size() != fp.inner.size())
        throw InvalidParam("rearrangement: one translation per inner disc required");

    // Translated discs must again form a valid flat place.
    FlatPlace target = fp;
    for (size_t k = 0; k < translations.size(); ++k) target.inner[k].center += translations[k];
    target.validate();

    RouteContext cx;
    cx.dom = &dom;
    cx.r_outer = fp.outer.radius;
    cx.outer_center = fp.outer.center;
    cx.cw = dom.collar_width;
    cx.tau_floor = std::max(0.05 * cx.r_outer, 2.5 * cx.cw);
    cx.tau_cap = 0.25 * cx.r_outer;

    RouteState st;
    st.cur = fp.inner;
    st.rot.assign(fp.inner.size(), 0.0);

    for (const MoveStep& mv : schedule) {
        if (mv.disc < 0 || mv.disc >= static_cast<int>(fp.inner.size()))
            throw InvalidParam("rearrangement: schedule references unknown disc");
        if (!try_move(cx, st, mv.disc, mv.to))
            throw RoutingFailed("rearrangement: no collision-free arc pair for disc move");
    }

    // Co-carried discs may have drifted; give each one more chance to reach
    // its target, then undo accumulated rotations about the final centers.
    double tol = 1e-9 * cx.r_outer;
    for (int round = 0; round < 2; ++round) {
        bool all_ok = true;
        for (size_t k = 0; k < st.cur.size(); ++k) {
            Vec2 want = fp.inner[k].center + translations[k];
            if ((st.cur[k].center - want).norm() <= tol) continue;
            all_ok = false;
            if (round == 1 || !try_move(cx, st, static_cast<int>(k), want))
                throw RoutingFailed("rearrangement: disc cannot reach its target");
        }
        if (all_ok) break;
    }
    for (size_t k = 0; k < st.cur.size(); ++k) {
        double net = std::remainder(st.rot[k], 2 * kPi);
        if (std::abs(net) < 1e-12) continue;
        if (!try_local_rotation(cx, st, static_cast<int>(k), st.cur[k].center, -net,
                                cx.rc_plateau(st.cur[k])))
            throw RoutingFailed("rearrangement: no room for the rotation correction");
        st.rot[k] = 0.0;
    }

    RearrangementResult out;
    for (const auto& a : st.arcs) out.diffeo.push_arc(a);
    out.map = sample_planar_map(dom, out.diffeo, translations);
    out.schedule = std::move(st.executed);
    return out;
}

// ------------------------------------------------- nested-plateau planner

namespace {

/* Regime of the annulus ann(c,[a,b]) against one full-disc-plateau arc:
   +1 entirely inside the closed plateau disc, 0 entirely outside the
   support (disjoint from it or holding it inside the annulus hole),
   -1 anything else. */
int annulus_regime(const Vec2& c, double a, double b, const ArcFlow& f, double margin) {
    double d = (c - f.center()).norm();
    if (d + b <= f.plateau_outer() - margin) return +1;
    if (d - b >= f.support_outer() + margin) return 0;
    if (d + f.support_outer() <= a - margin) return 0;
    return -1;
}

/* Regime of the closed disc(c,rho): +1 inside plateau, 0 outside support,
   -1 straddling. Pins are placed exactly on plateau edges by construction,
   so the comparisons run with a roundoff allowance only. */
int disc_regime(const Vec2& c, double rho, const ArcFlow& f) {
    const double eps = 1e-9;
    double d = (c - f.center()).norm();
    if (d + rho <= f.plateau_outer() + eps) return +1;
    if (d - rho >= f.support_outer() - eps) return 0;
    return -1;
}

} // namespace

RearrangementResult nested_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                const std::vector<Vec2>& translations) {
    const FlatPlace& fp = dom.geometry;
    if (translations.size() != fp.inner.size())
        throw InvalidParam("rearrangement: one translation per inner disc required");
    FlatPlace target = fp;
    for (size_t k = 0; k < translations.size(); ++k) target.inner[k].center += translations[k];
    target.validate();

    const double R = fp.outer.radius;
    const Vec2 O = fp.outer.center;
    const double cw = dom.collar_width;
    const double margin = 1.2 * cw;       // rigid skirt kept around every pin
    const double eta = 0.01 * R;          // nesting slack between regions
    const double tau_floor = std::max(0.05 * R, 2.5 * cw);
    const size_t n = fp.inner.size();

    std::vector<double> rc(n), tl(n);     // local plateau radius / band width
    for (size_t i = 0; i < n; ++i) {
        rc[i] = fp.inner[i].radius + margin;
        tl[i] = std::clamp(0.75 * rc[i], tau_floor, 0.35 * R);
    }

    std::vector<Vec2> pos(n);
    std::vector<double> rot(n, 0.0);
    for (size_t i = 0; i < n; ++i) pos[i] = fp.inner[i].center;

    std::vector<ArcFlow> arcs;
    std::vector<MoveStep> executed;

    auto apply_arc = [&](const ArcFlow& a) {
        for (size_t e = 0; e < n; ++e) {
            int reg = disc_regime(pos[e], rc[e], a);
            if (reg == +1) {
                pos[e] = a.eval(pos[e]);
                rot[e] += a.angle();
            }
        }
    };

    auto place_move = [&](size_t k, const Vec2& to) -> bool {
        Vec2 from = pos[k];
        Vec2 mid = 0.5 * (from + to);
        Vec2 dir = (to - from).normalized();
        Vec2 nrm(-dir.y(), dir.x());
        for (double s : {0.0, 0.15 * R, -0.15 * R, 0.3 * R, -0.3 * R, 0.45 * R, -0.45 * R}) {
            Vec2 P = mid + s * nrm;
            double theta = signed_angle(from - P, to - P);
            double dom_limit = R - margin - (P - O).norm();
            std::vector<char> carried(n, 0);
            carried[k] = 1;
            double hi = 0, tau_out = 0;
            bool ok = true;
            for (bool again = true; again && ok;) {
                again = false;
                hi = 0;
                for (size_t e = 0; e < n; ++e)
                    if (carried[e]) hi = std::max(hi, (pos[e] - P).norm() + rc[e] + tl[e]);
                hi += eta;
                tau_out = dom_limit - hi;
                if (tau_out < tau_floor) { ok = false; break; }
                for (size_t e = 0; e < n; ++e) {
                    if (carried[e]) continue;
                    double d = (pos[e] - P).norm();
                    if (d - (rc[e] + tl[e]) >= hi + tau_out + eta) continue; // clear outside
                    carried[e] = 1;                                         // co-carry it
                    again = true;
                    break;
                }
            }
            if (!ok) continue;
            ArcFlow a(P, theta, 0.0, hi, 0.0, tau_out);
            apply_arc(a);
            arcs.push_back(a);
            executed.push_back({static_cast<int>(k), to});
            return true;
        }
        return false;
    };

    // Moves: two passes so a disc displaced by a later co-carry gets retried.
    double pos_tol = 1e-9 * R;
    for (int round = 0; round < 2; ++round) {
        bool all_ok = true;
        for (size_t k = 0; k < n; ++k) {
            Vec2 want = fp.inner[k].center + translations[k];
            if ((pos[k] - want).norm() <= pos_tol) continue;
            all_ok = false;
            if (!place_move(k, want))
                throw RoutingFailed("nested rearrangement: no pivot plateau nests the move");
        }
        if (all_ok) break;
        if (round == 1)
            for (size_t k = 0; k < n; ++k)
                if ((pos[k] - (fp.inner[k].center + translations[k])).norm() > pos_tol)
                    throw RoutingFailed("nested rearrangement: disc cannot reach its target");
    }

    // Undo accumulated rotations with local full-disc arcs about the targets.
    for (size_t k = 0; k < n; ++k) {
        double net = std::remainder(rot[k], 2 * kPi);
        if (std::abs(net) < 1e-12) continue;
        ArcFlow a(pos[k], -net, 0.0, rc[k], 0.0, tl[k]);
        for (size_t e = 0; e < n; ++e) {
            if (e == k) continue;
            if (disc_regime(pos[e], rc[e], a) != 0)
                throw RoutingFailed("nested rearrangement: rotation correction clips a disc");
        }
        apply_arc(a);
        arcs.push_back(a);
    }

    // ---- authoritative validation of the nested structure ----
    const double half_eta = 0.5 * eta;

    // (1) every pin disc must see each arc as exactly rigid; final state must
    //     be the requested translation with no residual rotation.
    for (size_t e = 0; e < n; ++e) {
        Vec2 p = fp.inner[e].center;
        double spin = 0;
        for (const ArcFlow& a : arcs) {
            int reg = disc_regime(p, fp.inner[e].radius + cw, a);
            if (reg < 0)
                throw RoutingFailed("nested rearrangement: an arc band crosses a disc collar");
            if (reg == +1) {
                p = a.eval(p);
                spin += a.angle();
            }
        }
        Vec2 want = fp.inner[e].center + translations[e];
        if ((p - want).norm() > pos_tol || std::abs(std::remainder(spin, 2 * kPi)) > 1e-9)
            throw RoutingFailed("nested rearrangement: composed map is not the pinned translation");
    }

    // (2,3) band charts: pull each band back to source coordinates and push
    //       it forward to the last arc; every crossing must be rigid.
    std::vector<BandChart> bands;
    for (size_t j = 0; j < arcs.size(); ++j) {
        double a_in = arcs[j].plateau_outer(), a_out = arcs[j].support_outer();
        Vec2 c = arcs[j].center();
        for (size_t q = j; q-- > 0;) {
            int reg = annulus_regime(c, a_in, a_out, arcs[q], half_eta);
            if (reg < 0)
                throw RoutingFailed("nested rearrangement: band straddles an earlier arc");
            if (reg == +1) c = arcs[q].center() + rot2(-arcs[q].angle()) * (c - arcs[q].center());
        }
        bands.push_back({static_cast<int>(j), c});
        Vec2 cf = arcs[j].center();
        for (size_t q = j + 1; q < arcs.size(); ++q) {
            int reg = annulus_regime(cf, a_in, a_out, arcs[q], half_eta);
            if (reg < 0)
                throw RoutingFailed("nested rearrangement: band straddles a later arc");
            if (reg == +1) cf = arcs[q].center() + rot2(arcs[q].angle()) * (cf - arcs[q].center());
        }
    }

    // (4) source bands are pairwise disjoint annuli.
    auto annuli_disjoint = [&](const Vec2& c1, double a1, double b1, const Vec2& c2, double a2,
                               double b2) {
        double d = (c1 - c2).norm();
        if (d >= b1 + b2 + half_eta) return true;
        if (d + b1 <= a2 - half_eta) return true;
        if (d + b2 <= a1 - half_eta) return true;
        return false;
    };
    for (size_t i = 0; i < bands.size(); ++i)
        for (size_t j = i + 1; j < bands.size(); ++j) {
            const ArcFlow& ai = arcs[bands[i].arc];
            const ArcFlow& aj = arcs[bands[j].arc];
            if (!annuli_disjoint(bands[i].src_center, ai.plateau_outer(), ai.support_outer(),
                                 bands[j].src_center, aj.plateau_outer(), aj.support_outer()))
                throw RoutingFailed("nested rearrangement: two bands overlap in source coordinates");
        }

    // (5) source bands avoid every pin disc; (6) supports respect the outer collar.
    for (const BandChart& bc : bands) {
        const ArcFlow& a = arcs[bc.arc];
        for (size_t e = 0; e < n; ++e) {
            double d = (bc.src_center - fp.inner[e].center).norm();
            double pin = fp.inner[e].radius + cw;
            bool hole = d + pin <= a.plateau_outer() - 0.1 * cw;
            bool away = d - pin >= a.support_outer() + 0.1 * cw;
            if (!hole && !away)
                throw RoutingFailed("nested rearrangement: a band meets a disc collar");
        }
    }
    for (const ArcFlow& a : arcs)
        if ((a.center() - O).norm() + a.support_outer() > R - 1.1 * cw)
            throw RoutingFailed("nested rearrangement: arc support reaches the outer collar");

    RearrangementResult out;
    for (const auto& a : arcs) out.diffeo.push_arc(a);
    out.map = sample_planar_map(dom, out.diffeo, translations);
    out.schedule = std::move(executed);
    out.bands = std::move(bands);
    return out;
}

// ---------------------------------------------------------------- pullback

namespace {

double interp_or_nearest(const TriMesh& mesh, const std::vector<double>& values, const Vec2& p) {
    std::array<double, 3> b;
    int t = mesh.locate(p, b);
    if (t >= 0) {
        const auto& tr = mesh.tris[t];
        return b[0] * values[tr[0]] + b[1] * values[tr[1]] + b[2] * values[tr[2]];
    }
    // Image points in vacated regions fall back to the nearest node value
    // (exact for constant densities, the pipeline case).
    double best = 1e300;
    int arg = 0;
    for (size_t i = 0; i < mesh.nodes.size(); ++i) {
        double d = (mesh.nodes[i] - p).squaredNorm();
        if (d < best) { best = d; arg = static_cast<int>(i); }
    }
    return values[arg];
}

} // namespace

DensityField pullback_density(const HoledDiscDomain& dom, const PlanarMap& F,
                              const DensityField& rho) {
    const TriMesh& mesh = dom.mesh;
    if (F.node_images.size() != mesh.nodes.size() || F.tri_det.size() != mesh.tris.size())
        throw InvalidParam("pullback: map not sampled on the domain mesh");
    if (rho.values.size() != mesh.nodes.size())
        throw InvalidParam("pullback: density not sampled on the domain mesh");
    for (double d : F.tri_det)
        if (!(d > 0)) throw NonPositiveJacobian("pullback: non-positive Jacobian determinant");

    std::vector<double> nd = F.node_det(mesh);
    DensityField out;
    out.values.resize(mesh.nodes.size());
    for (size_t i = 0; i < mesh.nodes.size(); ++i)
        out.values[i] = interp_or_nearest(mesh, rho.values, F.node_images[i]) * nd[i];
    out.total = integrate_nodal(mesh, out.values);
    return out;
}

DensityField pullback_density_exact(const HoledDiscDomain& dom, const PlaneDiffeo& F,
                                    const DensityField& rho) {
    const TriMesh& mesh = dom.mesh;
    if (rho.values.size() != mesh.nodes.size())
        throw InvalidParam("pullback: density not sampled on the domain mesh");
    DensityField out;
    out.values.resize(mesh.nodes.size());
    for (size_t i = 0; i < mesh.nodes.size(); ++i) {
        double det = F.analytic_det(mesh.nodes[i]);
        if (!(det > 0)) throw NonPositiveJacobian("pullback: non-positive Jacobian determinant");
        out.values[i] = interp_or_nearest(mesh, rho.values, F.apply(mesh.nodes[i])) * det;
    }
    out.total = integrate_nodal(mesh, out.values);
    return out;
}

// --------------------------------------------------------------------- FEM

namespace {

struct WeakSystem {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::VectorXd load;         // -M g, mean-projected
    Eigen::VectorXd lumped_mass;  // P1 row sums
};

WeakSystem assemble_weak(const TriMesh& mesh, const std::vector<double>& g) {
    const int n = static_cast<int>(mesh.nodes.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.tris.size() * 9);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n), m = Eigen::VectorXd::Zero(n);
    for (const auto& tr : mesh.tris) {
        const Vec2& p0 = mesh.nodes[tr[0]];
        Mat2 e;
        e.col(0) = mesh.nodes[tr[1]] - p0;
        e.col(1) = mesh.nodes[tr[2]] - p0;
        double det = e.determinant(), area = 0.5 * det;
        Mat2 einv = e.inverse();
        Vec2 grad[3];
        grad[1] = einv.row(0);
        grad[2] = einv.row(1);
        grad[0] = -(grad[1] + grad[2]);
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c)
                trips.emplace_back(tr[a], tr[c], area * grad[a].dot(grad[c]));
        // Consistent mass load: (M g)_a over this triangle.
        double ga = g[tr[0]], gb = g[tr[1]], gc = g[tr[2]];
        b[tr[0]] -= area / 12.0 * (2 * ga + gb + gc);
        b[tr[1]] -= area / 12.0 * (ga + 2 * gb + gc);
        b[tr[2]] -= area / 12.0 * (ga + gb + 2 * gc);
        for (int a = 0; a < 3; ++a) m[tr[a]] += area / 3.0;
    }
    WeakSystem w;
    w.stiffness.resize(n, n);
    w.stiffness.setFromTriplets(trips.begin(), trips.end());
    double s = b.sum(), mt = m.sum();
    w.load = b - (s / mt) * m;
    w.lumped_mass = std::move(m);
    return w;
}

} // namespace

NodalField solve_potential(const HoledDiscDomain& dom, const DensityField& g,
                           double integral_scale) {
    const TriMesh& mesh = dom.mesh;
    const int n = static_cast<int>(mesh.nodes.size());
    if (static_cast<int>(g.values.size()) != n)
        throw InvalidParam("potential solve: load not sampled on the domain mesh");

    std::vector<double> absg(g.values.size());
    for (size_t i = 0; i < g.values.size(); ++i) absg[i] = std::abs(g.values[i]);
    double integral = integrate_nodal(mesh, g.values);
    double l1 = integrate_nodal(mesh, absg);
    if (std::abs(integral) > std::max(1e-8 * std::abs(integral_scale), 0.05 * l1))
        throw IncompatibleData("potential solve: load violates the zero-mean condition");

    WeakSystem w = assemble_weak(mesh, g.values);

    // Pin node 0 to fix the constant mode; consistent because the projected
    // load is orthogonal to constants.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(w.stiffness.nonZeros() + 1);
    for (int c = 0; c < w.stiffness.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(w.stiffness, c); it; ++it)
            if (it.row() != 0 && it.col() != 0) trips.emplace_back(it.row(), it.col(), it.value());
    trips.emplace_back(0, 0, 1.0);
    Eigen::SparseMatrix<double> pinned(n, n);
    pinned.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd rhs = w.load;
    rhs[0] = 0.0;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(pinned);
    if (solver.info() != Eigen::Success)
        throw SolverFailure("potential solve: factorization failed");
    Eigen::VectorXd u = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw SolverFailure("potential solve: back substitution failed");

    u.array() -= u.dot(w.lumped_mass) / w.lumped_mass.sum();

    double bn = w.load.norm();
    double res = (w.stiffness * u - w.load).norm();
    if (bn > 0) res /= bn;
    if (res > 1e-10) throw SolverFailure("potential solve: residual exceeds 1e-10");

    NodalField out;
    out.values.assign(u.data(), u.data() + n);
    return out;
}

double weak_residual(const HoledDiscDomain& dom, const NodalField& u, const DensityField& g) {
    const int n = static_cast<int>(dom.mesh.nodes.size());
    if (static_cast<int>(u.values.size()) != n || static_cast<int>(g.values.size()) != n)
        throw InvalidParam("weak residual: fields not sampled on the domain mesh");
    WeakSystem w = assemble_weak(dom.mesh, g.values);
    Eigen::Map<const Eigen::VectorXd> uv(u.values.data(), n);
    double bn = w.load.norm();
    double res = (w.stiffness * uv - w.load).norm();
    return bn > 0 ? res / bn : res;
}

// ---------------------------------------------------------------- transport

TransportField transport_field(const HoledDiscDomain& dom, const NodalField& u,
                               const DensityField& rho0, const DensityField& rho1) {
    const TriMesh& mesh = dom.mesh;
    const size_t n = mesh.nodes.size();
    if (u.values.size() != n || rho0.values.size() != n || rho1.values.size() != n)
        throw InvalidParam("transport: fields not sampled on the domain mesh");
    for (size_t i = 0; i < n; ++i)
        if (!(rho0.values[i] > 0) || !(rho1.values[i] > 0))
            throw DegenerateInterpolation("transport: interpolated density loses positivity");

    // Area-weighted node gradients of u from the per-triangle P1 gradients.
    std::vector<Vec2> gsum(n, Vec2::Zero());
    std::vector<double> asum(n, 0.0);
    for (const auto& tr : mesh.tris) {
        const Vec2& p0 = mesh.nodes[tr[0]];
        Mat2 e;
        e.col(0) = mesh.nodes[tr[1]] - p0;
        e.col(1) = mesh.nodes[tr[2]] - p0;
        double area = 0.5 * e.determinant();
        Mat2 einv = e.inverse();
        Vec2 g1 = einv.row(0), g2 = einv.row(1);
        Vec2 grad = (u.values[tr[1]] - u.values[tr[0]]) * g1 +
                    (u.values[tr[2]] - u.values[tr[0]]) * g2;
        for (int a = 0; a < 3; ++a) {
            gsum[tr[a]] += area * grad;
            asum[tr[a]] += area;
        }
    }

    TransportField eta;
    eta.base.resize(n);
    eta.rho0 = rho0.values;
    eta.rho1 = rho1.values;
    eta.support_mask.assign(n, 0);

    double gradmax = 0;
    for (size_t i = 0; i < n; ++i) gradmax = std::max(gradmax, gsum[i].norm() / asum[i]);
    // Density-relative threshold: roundoff-level mass defects demand no
    // transport, so they must not trip the cutoff report.
    double scale = 0;
    for (size_t i = 0; i < n; ++i)
        scale = std::max({scale, std::abs(rho0.values[i]), std::abs(rho1.values[i])});

    for (size_t i = 0; i < n; ++i) {
        Vec2 grad = gsum[i] / asum[i];
        double cut = dom.collar_cutoff(mesh.nodes[i]);
        eta.base[i] = -grad * cut;
        eta.support_mask[i] = grad.norm() > 1e-14 * gradmax ? 1 : 0;
        double gi = std::abs(rho1.values[i] - rho0.values[i]);
        if (gi > 1e-12 * scale) eta.cutoff_residual = std::max(eta.cutoff_residual, std::abs(cut - 1.0));
    }
    return eta;
}

PlanarMap integrate_flow(const HoledDiscDomain& dom, const TransportField& eta, int nsteps) {
    const TriMesh& mesh = dom.mesh;
    const size_t n = mesh.nodes.size();
    if (eta.base.size() != n || eta.rho0.size() != n || eta.rho1.size() != n)
        throw InvalidParam("flow: transport field not sampled on the domain mesh");
    if (nsteps < 1) throw InvalidParam("flow: step count must be positive");
    mesh.build_locator();

    auto vel = [&](const Vec2& p, double t) -> Vec2 {
        std::array<double, 3> b;
        int tr = mesh.locate(p, b);
        // Stage points of boundary nodes may poke just past the mesh rim;
        // linear extrapolation from the nearest triangle keeps RK4 consistent
        // (and stays ~0 for properly cut-off fields).
        if (tr < 0) tr = mesh.locate_relaxed(p, b, -10.0);
        if (tr < 0) return Vec2::Zero();
        const auto& tri = mesh.tris[tr];
        return b[0] * eta.velocity(tri[0], t) + b[1] * eta.velocity(tri[1], t) +
               b[2] * eta.velocity(tri[2], t);
    };

    std::vector<Vec2> y(mesh.nodes.begin(), mesh.nodes.end());
    const double dt = 1.0 / nsteps;
    for (int s = 0; s < nsteps; ++s) {
        double t0 = s * dt;
        for (size_t i = 0; i < n; ++i) {
            Vec2 k1 = vel(y[i], t0);
            Vec2 k2 = vel(y[i] + 0.5 * dt * k1, t0 + 0.5 * dt);
            Vec2 k3 = vel(y[i] + 0.5 * dt * k2, t0 + 0.5 * dt);
            Vec2 k4 = vel(y[i] + dt * k3, t0 + dt);
            y[i] += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
            if (dom.boundary_distance(y[i]) < -1e-6)
                throw StepUnstable("flow: node left the domain");
        }
    }

    PlanarMap map;
    map.node_images = std::move(y);
    map.tri_det = deformed_tri_dets(mesh, map.node_images);
    for (size_t k = 0; k <= dom.geometry.inner.size(); ++k) map.boundary_tags.push_back("identity");
    return map;
}

// ---------------------------------------------------------------- pipeline

namespace {

[[noreturn]] void rethrow_staged(const char* stage, const Error& e) {
    std::string m = std::string(stage) + ": " + e.what();
#define SRNF_RETHROW(T) \
    if (dynamic_cast<const T*>(&e)) throw T(m);
    SRNF_RETHROW(SpecInvalid)
    SRNF_RETHROW(InvalidParam)
    SRNF_RETHROW(GridMismatch)
    SRNF_RETHROW(OutOfDomain)
    SRNF_RETHROW(NotARotation)
    SRNF_RETHROW(InsufficientSamples)
    SRNF_RETHROW(Overlap)
    SRNF_RETHROW(ProfileInvalid)
    SRNF_RETHROW(NotClosed)
    SRNF_RETHROW(NotConvex)
    SRNF_RETHROW(IncompatibleData)
    SRNF_RETHROW(DegenerateImmersion)
    SRNF_RETHROW(MeshFailure)
    SRNF_RETHROW(NonPositiveJacobian)
    SRNF_RETHROW(RoutingFailed)
    SRNF_RETHROW(SolverFailure)
    SRNF_RETHROW(DegenerateInterpolation)
    SRNF_RETHROW(StepUnstable)
#undef SRNF_RETHROW
    throw Error(m);
}

MoserRun finish_pipeline(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                         RearrangementResult rr) {
    MoserRun run;
    auto& stages = run.certificate.stages;
    stages.emplace_back("rearrangement");
    run.schedule = rr.schedule;

    stages.emplace_back("pullback");
    DensityField rho0 = constant_density(dom, 1.0);
    try {
        run.rho1 = pullback_density_exact(dom, rr.diffeo, rho0);
    } catch (const Error& e) {
        rethrow_staged("pullback", e);
    }
    run.certificate.density_defect = std::abs(run.rho1.total - rho0.total) / rho0.total;

    stages.emplace_back("potential");
    DensityField gf;
    gf.values.resize(rho0.values.size());
    for (size_t i = 0; i < gf.values.size(); ++i)
        gf.values[i] = run.rho1.values[i] - rho0.values[i];
    gf.total = integrate_nodal(dom.mesh, gf.values);
    try {
        run.potential = solve_potential(dom, gf, rho0.total);
    } catch (const Error& e) {
        rethrow_staged("potential", e);
    }
    run.certificate.weak_res = weak_residual(dom, run.potential, gf);

    stages.emplace_back("transport");
    try {
        run.eta = transport_field(dom, run.potential, rho0, run.rho1);
    } catch (const Error& e) {
        rethrow_staged("transport", e);
    }

    stages.emplace_back("flow");
    std::vector<Vec2> disp(dom.mesh.nodes.size());
    try {
        PlanarMap corr = integrate_flow(dom, run.eta, 64);
        for (size_t i = 0; i < disp.size(); ++i)
            disp[i] = corr.node_images[i] - dom.mesh.nodes[i];
    } catch (const Error& e) {
        rethrow_staged("flow", e);
    }

    stages.emplace_back("composition");
    run.map = rr.diffeo;
    run.map.set_corrector(&dom.mesh, std::move(disp));
    run.nodes = sample_planar_map(dom, run.map, translations);

    // Stencil width balancing truncation (grows with the cubed band stretch
    // of composed arcs) against roundoff; 2e-6 keeps both below 1e-5.
    const double h_st = 2e-6;
    double devj = 0, collar = 0;
    for (size_t i = 0; i < dom.mesh.nodes.size(); ++i) {
        const Vec2& p = dom.mesh.nodes[i];
        devj = std::max(devj, std::abs(run.map.fd_det(p, h_st) - 1.0));
        double bd = dom.boundary_distance(p);
        if (bd < dom.collar_width) {
            // Nearest boundary feature decides the pinned reference map.
            double best = dom.geometry.outer.radius - (p - dom.geometry.outer.center).norm();
            Vec2 want = p;
            for (size_t k = 0; k < dom.geometry.inner.size(); ++k) {
                const Circle& c = dom.geometry.inner[k];
                double dk = (p - c.center).norm() - c.radius;
                if (dk < best) {
                    best = dk;
                    want = p + translations[k];
                }
            }
            collar = std::max(collar, (run.nodes.node_images[i] - want).norm());
        }
    }
    run.certificate.max_detj_dev = devj;
    run.certificate.collar_dev = collar / dom.diameter();
    return run;
}

MoserRun run_pipeline(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                      const std::vector<MoveStep>* schedule) {
    RearrangementResult rr;
    try {
        rr = schedule ? initial_rearrangement_diffeo(dom, translations, *schedule)
                      : initial_rearrangement_diffeo(dom, translations);
    } catch (const Error& e) {
        rethrow_staged("rearrangement", e);
    }
    return finish_pipeline(dom, translations, std::move(rr));
}

} // namespace

MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations) {
    return run_pipeline(dom, translations, nullptr);
}

MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                           const std::vector<MoveStep>& schedule) {
    return run_pipeline(dom, translations, &schedule);
}

MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                           const RearrangementResult& initial) {
    return finish_pipeline(dom, translations, initial);
}

} // namespace srnflab
