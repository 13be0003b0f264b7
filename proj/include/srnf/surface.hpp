#pragma once

#include "srnf/patch.hpp"
#include <optional>
#include <string>
#include <vector>

namespace srnflab {

/* Patch edge ids: 0 -> i==0, 1 -> i==nu-1, 2 -> j==0, 3 -> j==nv-1. */
enum Edge : int { EdgeU0 = 0, EdgeU1 = 1, EdgeV0 = 2, EdgeV1 = 3 };

const char* edge_name(int e);
int edge_from_name(const std::string& name);

struct Seam {
    int patch_a = 0, edge_a = 0;
    int patch_b = 0, edge_b = 0;
    bool reversed = false; // b traversed opposite to a
};

struct SurfaceImmersion {
    std::vector<ParamPatch> patches;
    int orientation = +1;
    std::vector<Seam> seams;

    double bbox_diag() const;
    double total_samples() const;

    /* Structural invariants: weight positivity/sums, orientation in {-1,+1},
       interior immersion condition, seam sample agreement within
       1e-9 * bbox_diag. Throws SpecInvalid / DegenerateImmersion. */
    void validate() const;

    /* True when every patch edge is either seam-identified or a wrapped
       periodic axis; gauss_bonnet and volume checks require this. */
    bool is_closed() const;
};

/* Edge sample positions of one patch in canonical (increasing index) order. */
std::vector<Vec3> edge_positions(const ParamPatch& p, int edge);

/* Pair up patch edges whose sample sequences coincide within tol (absolute).
   Periodic axes are honored (their two edges are excluded). */
std::vector<Seam> auto_build_seams(const SurfaceImmersion& surf, double tol);

struct RigidMotion {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    /* Throws NotARotation unless R^T R = I within 1e-12 and det R = +1. */
    void validate() const;
    Vec3 apply(const Vec3& x) const { return R * x + t; }
};

SurfaceImmersion apply_motion(const RigidMotion& m, const SurfaceImmersion& f);
SurfaceImmersion translate(const SurfaceImmersion& f, const Vec3& t);

/* Square-root normal field over the same grids as the source immersion.
   values[p][k] = sqrt(a) * n at sample k of patch p; rw[p][k] is the
   Riemannian quadrature weight used by every L2 operation. */
struct SrnfGridMeta {
    Rect domain;
    int nu = 0, nv = 0;
    bool periodic_u = false, periodic_v = false;
};

struct SrnfField {
    std::vector<SrnfGridMeta> meta;
    std::vector<std::vector<Vec3>> values;
    std::vector<std::vector<double>> rw;

    std::size_t patch_count() const { return values.size(); }
    double norm() const;
};

/* |q|^2 == area factor by construction; this recomputes the residual for
   property tests. */
double srnf_defect(const SrnfField& q, const std::vector<std::vector<double>>& area);

/* Cross product of the two grid tangents at every sample. Throws
   DegenerateImmersion when |cross| < 1e-14 * bbox_diag^2. */
std::vector<std::vector<Vec3>> tangent_cross(const SurfaceImmersion& f);

/* Area multiplication factor relative to the domain density. */
std::vector<std::vector<double>> area_factor(const SurfaceImmersion& f);
double area_factor(const SurfaceImmersion& f, int patch, int i, int j);

/* Oriented unit normal field. */
std::vector<std::vector<Vec3>> unit_normal(const SurfaceImmersion& f);
Vec3 unit_normal(const SurfaceImmersion& f, int patch, int i, int j);

// Sets density = |finite-difference tangent cross| of the current positions,
// making this immersion the metric reference (its own area factor becomes 1).
void set_reference_density(SurfaceImmersion& f);

SrnfField srnf(const SurfaceImmersion& f);

/* max_k |srnf(f + t) - srnf(f)| over all samples; exercises translation
   invariance of the map itself. */
double translate_invariance_check(const SurfaceImmersion& f, const Vec3& t);

} // namespace srnflab
