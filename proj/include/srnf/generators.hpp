#pragma once
#include "srnf/rng.hpp"
#include "srnf/surface.hpp"
#include <functional>
#include <utility>

namespace srnflab {

// Unit cylinder x²+y²=1, 0≤z≤1 under the identity and under
// L(x,y,z) = (rx, ry, z/r); shared (angle × height) grid, angle periodic.
// The reference density comes from the identity immersion, so both copies
// have area factor 1 and equal SRNFs.
std::pair<SurfaceImmersion, SurfaceImmersion> gen_cylinder_pair(double r, int nu, int nv);

// Graph-style paraboloid B(x,y) = (x/a, y/b, x²/a + y²/b) sampled over `box`
// with the flat parameter metric (density 1).
SurfaceImmersion gen_paraboloid(double a, double b, Rect box, int nu, int nv);

// z = height(x,y) over `box`, flat parameter metric; single open patch.
SurfaceImmersion gen_graph_patch(Rect box, int nu, int nv,
                                 const std::function<double(double, double)>& height);

// Closed unit sphere as six equiangular gnomonic square patches (cube faces),
// n×n samples each, outward orientation, seams auto-identified.  Serves as
// the metric reference of the whole sphere family.
SurfaceImmersion gen_sphere(int n);

// Linear image A·sphere over the same grids, density inherited from the unit
// sphere.  A must be invertible.
SurfaceImmersion gen_linear_image(const SurfaceImmersion& reference, const Mat3& A);
SurfaceImmersion gen_ellipsoid(double a, double b, double c, int n);

// Sphere with one compactly-supported radial bump: r(u) = 1 + amp·ψ(∠(u,dir)/width).
SurfaceImmersion gen_bumped_sphere(int n, double amp, const Vec3& dir, double width);

// Smooth random radial perturbation of the unit sphere (recorded seed),
// rescaled so its finite-difference total area equals the reference sphere's.
SurfaceImmersion gen_perturbed_sphere(int n, std::uint64_t seed, double amp);

// Strictly convex blob from the support function
//   h(u) = 1 + Σ c_k (u·a_k)^4,
// realized as the gradient of its 1-homogeneous extension on the sphere grids.
struct SupportBump {
    Vec3 axis;
    double c;
};
SurfaceImmersion gen_convex_blob(int n, const std::vector<SupportBump>& bumps);

} // namespace srnflab
