#pragma once

#include "srnf/core.hpp"
#include <array>
#include <functional>
#include <string>
#include <vector>

namespace srnflab {

struct Circle {
    Vec2 center = Vec2::Zero();
    double radius = 0;

    double signed_gap(const Circle& other) const; // boundary-to-boundary gap
};

/* Planar disc with n disjoint open discs removed; the z = 0 region of the
   chessboard surfaces and the domain of the area-preserving construction. */
struct FlatPlace {
    Circle outer;
    std::vector<Circle> inner;

    /* Smallest boundary-to-boundary gap: inner-vs-inner and inner-vs-outer. */
    double clearance() const;

    /* Throws Overlap unless every inner disc is strictly inside the outer
       circle and the discs are pairwise disjoint (clearance > 0). */
    void validate() const;
};

/* Conforming triangulation with boundary-fitted nodes. node_circle[i] is -1
   for interior nodes, 0 for the outer circle, k for inner circle k-1. */
struct TriMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> tris; // CCW
    std::vector<int> node_circle;
    std::vector<std::vector<int>> boundary_loops; // node ids, in circle order

    double tri_area(int t) const;
    double total_area() const;
    double min_angle_deg() const;

    /* Point location for P1 interpolation; returns -1 when p is in no
       triangle. Built lazily over a uniform bin grid. */
    int locate(const Vec2& p, std::array<double, 3>& bary) const;

    /* Nearby-triangle location admitting barycentric extrapolation down to
       `deficit` (< 0); lets linear fields extend past the mesh rim. */
    int locate_relaxed(const Vec2& p, std::array<double, 3>& bary, double deficit) const;

    void build_locator() const;

private:
    mutable std::vector<std::vector<int>> bins_;
    mutable Vec2 bin_org_ = Vec2::Zero();
    mutable double bin_h_ = 0;
    mutable int bin_nx_ = 0, bin_ny_ = 0;
};

/* Unstructured Delaunay mesh of the holed disc: boundary circles sampled at
   spacing ~h, hexagonal interior seeding, Laplacian smoothing. Throws
   MeshFailure when conformity or the 15-degree quality floor fails. */
TriMesh triangulate_flat_place(const FlatPlace& fp, double target_h);

/* Structured annulus mesh (nr x ntheta quads split into triangles); exact
   h-halving for the order studies. */
TriMesh triangulate_annulus(double r0, double r1, int nr, int ntheta);

struct HoledDiscDomain {
    FlatPlace geometry;
    TriMesh mesh;
    double collar_width = 0;

    double diameter() const { return 2 * geometry.outer.radius; }
    /* Distance from p to the nearest boundary circle (positive inside). */
    double boundary_distance(const Vec2& p) const;
    /* C-infinity cutoff: 0 within the inner half of the collar band,
       1 at distance >= collar_width from the boundary. */
    double collar_cutoff(const Vec2& p) const;
    bool in_collar(const Vec2& p) const { return boundary_distance(p) < collar_width; }
};

/* Meshes the geometry and checks the collar bands are disjoint
   (collar_width <= 0.45 x clearance). */
HoledDiscDomain make_domain(const FlatPlace& fp, double target_h, double collar_width);

/* Per-node area density against dx^dy. */
struct DensityField {
    std::vector<double> values;
    double total = 0; // P1 quadrature of values over the mesh
};

DensityField constant_density(const HoledDiscDomain& dom, double value);
double integrate_nodal(const TriMesh& mesh, const std::vector<double>& values);

struct NodalField {
    std::vector<double> values;
};

/* Mesh-sampled planar map: node images plus the P1 per-triangle Jacobian
   determinants. boundary_tags[k] records the pinned behavior on circle k. */
struct PlanarMap {
    std::vector<Vec2> node_images;
    std::vector<double> tri_det;
    std::vector<std::string> boundary_tags;

    /* Node determinant: area-weighted average of incident triangles. */
    std::vector<double> node_det(const TriMesh& mesh) const;
};

/* Time-1 flow of a cut-off rotation field about `center`: the angular
   displacement is exactly `angle` on the radial plateau [plateau_lo,
   plateau_hi], falls smoothly to 0 across the transition bands of widths
   tau_in / tau_out, and the point is left untouched outside the support
   annulus. The field is divergence-free (Hamiltonian H = H(radius)), so the
   exact map is (rho, theta) -> (rho, theta + A(rho)) with det J = 1
   identically; eval and jacobian are closed-form everywhere. A plateau with
   plateau_lo = 0 rotates a full disc (tau_in is then ignored). */
class ArcFlow {
public:
    ArcFlow(const Vec2& center, double angle, double plateau_lo, double plateau_hi,
            double tau_in, double tau_out);

    Vec2 eval(const Vec2& x) const;
    Mat2 jacobian(const Vec2& x) const;

    /* Angular displacement profile and its radial derivative. */
    double angular_shift(double rho) const;
    double angular_shift_d(double rho) const;

    double radius(const Vec2& x) const { return (x - center_).norm(); }
    /* Signed radial gap from p to the support annulus (positive outside). */
    double support_gap(const Vec2& p) const;
    bool in_support(const Vec2& p) const { return support_gap(p) <= 0; }

    const Vec2& center() const { return center_; }
    double angle() const { return angle_; }
    double support_inner() const { return lo_ > 0 ? lo_ - tin_ : 0; }
    double support_outer() const { return hi_ + tout_; }
    double plateau_inner() const { return lo_; }
    double plateau_outer() const { return hi_; }

private:
    Vec2 center_;
    double angle_, lo_, hi_, tin_, tout_;
    Mat2 rot_plateau_; // snapped rotation by `angle` (exact at multiples of pi/2)

    friend struct ArcFlowTestAccess;
};

/* One scheduled disc move: which inner disc, and the center it moves to. */
struct MoveStep {
    int disc = 0;
    Vec2 to = Vec2::Zero();
};

/* Composition of arc flows plus an optional mesh-interpolated corrector;
   evaluable at arbitrary points of the plane (identity outside supports).
   The corrector acts FIRST: apply = arcs(corrector(x)), matching the
   composition f_tilde = F o f_1. */
class PlaneDiffeo {
public:
    void push_arc(const ArcFlow& a) { arcs_.push_back(a); }
    void set_corrector(const TriMesh* mesh, std::vector<Vec2> node_disp);

    Vec2 apply(const Vec2& x) const;
    double fd_det(const Vec2& x, double h_st) const; // plus-stencil
    double analytic_det(const Vec2& x) const;        // chain rule, closed form

    const std::vector<ArcFlow>& arcs() const { return arcs_; }
    bool has_corrector() const { return corrector_mesh_ != nullptr; }

private:
    std::vector<ArcFlow> arcs_;
    const TriMesh* corrector_mesh_ = nullptr;
    std::vector<Vec2> corrector_disp_;

    Vec2 corrector_apply(const Vec2& x) const;
    Mat2 corrector_jac(const Vec2& x) const;
};

/* Where one arc's transition band sits in source coordinates. `arc` indexes
   the owning diffeo's arc list; src_center is the arc center pulled back
   through the earlier arcs (the band annulus radii are the arc's
   plateau_outer / support_outer, which rigid pullbacks preserve). */
struct BandChart {
    int arc = -1;
    Vec2 src_center = Vec2::Zero();
};

struct RearrangementResult {
    PlaneDiffeo diffeo;
    PlanarMap map;                  // sampled at the domain mesh nodes
    std::vector<MoveStep> schedule; // the executed moves
    std::vector<BandChart> bands;   // filled by the nested planner only
};

/* Composition of time-1 arc flows realizing the disc rearrangement. Each
   move is a pivot pair: a rotation about a pivot on the perpendicular
   bisector of (from, to), followed by the inverse rotation about the target
   center, so the moved disc arrives exactly translated. Discs whose inflated
   annular band lies inside a rotation plateau are co-carried rigidly (their
   accumulated rotation is undone by a final local arc). Pivots are searched
   along the bisector; throws RoutingFailed when no pivot chain clears the
   other discs and the outer collar. Identity on the outer collar; equals the
   accumulated translation on each disc collar. */
RearrangementResult initial_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                 const std::vector<Vec2>& translations);
RearrangementResult initial_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                 const std::vector<Vec2>& translations,
                                                 const std::vector<MoveStep>& schedule);

/* Nested-plateau rearrangement. Every arc is a full-disc plateau: one pivot
   arc per move carries the moving disc (and any disc whose inflated annulus
   would meet the support) rigidly; final local arcs about the landing
   centers undo the accumulated rotations. Plateaus are sized so that every
   transition band is, in source coordinates, an annulus disjoint from all
   other bands and from every disc/outer collar; the verified charts are
   returned in `bands`. Inside any band the composed map is then a single
   closed-form angular shear conjugated by rigid motions, and it is rigid
   everywhere else. Throws RoutingFailed when no such nesting exists for the
   requested translations. */
RearrangementResult nested_rearrangement_diffeo(const HoledDiscDomain& dom,
                                                const std::vector<Vec2>& translations);

/* Node values rho(F(x)) * det J_F(x); P1 interpolation for rho at the image
   point (nearest-node value when the image leaves the mesh, exact for
   constant rho), P1 per-triangle determinants for J_F. Total integral is
   preserved exactly for piecewise-affine maps. Throws NonPositiveJacobian. */
DensityField pullback_density(const HoledDiscDomain& dom, const PlanarMap& F, const DensityField& rho);

/* Pullback through the functional map with closed-form determinants; used by
   the pipeline so the density defect is not polluted by P1 interpolation. */
DensityField pullback_density_exact(const HoledDiscDomain& dom, const PlaneDiffeo& F,
                                    const DensityField& rho);

/* P1 Neumann solve of  laplace(u) = g  with zero boundary flux; u returned
   mass-weighted mean-free. integral_scale sets the compatibility gate: the
   solve throws IncompatibleData when |integral of g| > max(1e-8 *
   integral_scale, 0.05 * L1-norm of g); smaller imbalances are projected
   out. Throws SolverFailure when the final residual exceeds 1e-10 relative. */
NodalField solve_potential(const HoledDiscDomain& dom, const DensityField& g, double integral_scale);

/* Relative residual |K u - b| / |b| of the assembled weak system after the
   mean projection of the load; the discrete statement that d(psi)
   reproduces g. */
double weak_residual(const HoledDiscDomain& dom, const NodalField& u, const DensityField& g);

/* eta_t(x) = -grad(u)(x) / rho_t(x) * collar cutoff, rho_t = rho0 + t*(rho1-rho0).
   Node velocities with the time dependence carried by the densities. */
struct TransportField {
    std::vector<Vec2> base;       // -grad(u) * cutoff at nodes
    std::vector<double> rho0, rho1;
    std::vector<char> support_mask;
    double cutoff_residual = 0;   // max |cutoff - 1| where |g| > 0

    Vec2 velocity(int node, double t) const {
        double r = rho0[node] + t * (rho1[node] - rho0[node]);
        return base[node] / r;
    }
};

TransportField transport_field(const HoledDiscDomain& dom, const NodalField& u,
                               const DensityField& rho0, const DensityField& rho1);

/* Runge-Kutta-4 time-1 flow of the mesh-interpolated field; per-triangle
   Jacobians from the deformed P1 mesh. Throws StepUnstable when a node
   leaves the domain by more than 1e-6. */
PlanarMap integrate_flow(const HoledDiscDomain& dom, const TransportField& eta, int nsteps = 64);

struct MoserCertificate {
    double max_detj_dev = 0;   // plus-stencil FD at mesh nodes
    double collar_dev = 0;     // vs the pinned map, relative to the diameter
    double density_defect = 0; // |total(rho1) - total(rho0)| / total(rho0)
    double weak_res = 0;
    std::vector<std::string> stages;
};

struct MoserRun {
    PlaneDiffeo map;     // final composed diffeomorphism (arcs + corrector)
    PlanarMap nodes;     // node images + P1 determinants of the composition
    MoserCertificate certificate;
    DensityField rho1;
    NodalField potential;
    TransportField eta;
    std::vector<MoveStep> schedule;
};

/* Full pipeline: rearrangement -> pullback -> potential -> transport -> flow
   -> composition, with the certificate evaluated at every mesh node. Errors
   from any stage are rethrown with the stage name prefixed. The returned
   map's corrector references dom.mesh, which must outlive it. */
MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations);
MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                           const std::vector<MoveStep>& schedule);

/* Same pipeline with a caller-built stage-1 rearrangement (for example the
   nested planner); runs pullback -> potential -> transport -> flow ->
   composition on top of it. */
MoserRun flat_place_diffeo(const HoledDiscDomain& dom, const std::vector<Vec2>& translations,
                           const RearrangementResult& initial);

} // namespace srnflab
