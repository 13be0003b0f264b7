#pragma once
#include "srnf/surface.hpp"

namespace srnflab {

struct CurvatureField {
    std::vector<std::vector<double>> K; // Gaussian curvature per sample
    std::vector<std::vector<double>> H; // mean curvature per sample
    std::vector<std::vector<char>> shape_operator_ok;
};

// K = det(II)/det(I), H = (eG − 2fF + gE)/(2 det I) from finite-difference
// fundamental forms.  Throws DegenerateImmersion on vanishing tangent cross.
CurvatureField gaussian_curvature(const SurfaceImmersion& f);

// Area factor of the Gauss map x ↦ n(x) relative to f's induced area:
// |n_u × n_v| / |f_u × f_v|.  Agrees with |K| up to finite-difference error.
std::vector<std::vector<double>> gauss_map_area_factor(const SurfaceImmersion& f);

// ∫ K dA over a closed immersion; equals 4π(1 − genus) up to quadrature
// error.  Throws NotClosed when some patch edge is unidentified.
double gauss_bonnet_check(const SurfaceImmersion& f);

struct RigidityReport {
    double distance = 0;          // d(Id_sphere, f)
    double floor = 0;             // decision floor on the distance
    bool exceeds_floor = false;
    Vec3 mean_translation = Vec3::Zero();
    double translate_residual = 0; // max |f(x) − x − t̄|
    bool is_translate = false;     // translate_residual ≤ 1e-10
};

// Compares f against the identity sphere rebuilt on f's own grids.
// Throws GridMismatch when f's patch layout is not the sphere layout.
RigidityReport sphere_rigidity_probe(const SurfaceImmersion& f, double floor = 0.05);

struct ConvexReport {
    double distance = 0;
    double tolerance = 0;
    bool within_tolerance = false;
    Vec3 mean_translation = Vec3::Zero();
    double translate_residual = 0;  // max |f1(x) − f2(x) − t̄|
    bool translates_match = false;  // residual ≤ 1e-6 × diagonal
    double k_witness = 0;           // max |K₁(x) − K₂(x̃)| matching by normals
};

// Checks both immersions are strictly convex (K > 1e-8/diag² everywhere,
// else NotConvex; adjacent-normal dispersion must resolve the Gauss map),
// then either certifies the translation conclusion (distance ≤ tolerance)
// or reports the curvature-versus-normal discrepancy witness.
ConvexReport convex_uniqueness_probe(const SurfaceImmersion& f1, const SurfaceImmersion& f2, double tolerance);

} // namespace srnflab
