#pragma once
#include "srnf/surface.hpp"
#include <functional>

namespace srnflab {

// Sampled orientation-preserving self-map of one patch's parameter rectangle.
// On a periodic axis the sampled target coordinates may run outside the
// rectangle (e.g. an angular shift); evaluation reduces them modulo the
// period.  On a non-periodic axis samples must stay inside within 1e-9.
struct ReparamPatch {
    SrnfGridMeta meta;
    std::vector<Vec2> phi;           // target parameter coordinates, v fastest
    std::vector<double> area_factor_b; // det of φ's Jacobian, strictly positive
};

struct Reparametrization {
    std::vector<ReparamPatch> patches;

    // Recomputes the finite-difference Jacobian determinant and checks the
    // stored area factor against it (1e-8 relative), positivity and the
    // domain containment rule above.
    void validate() const;
};

// Builds a Reparametrization by sampling `map` on each grid of `meta`;
// area_factor_b comes from the finite-difference Jacobian of the samples.
Reparametrization make_reparametrization(const std::vector<SrnfGridMeta>& meta,
                                         const std::function<Vec2(int patch, double u, double v)>& map);

// Catmull-Rom bicubic evaluation of a per-patch grid field; reproduces node
// values exactly, wraps on periodic axes, clamps the stencil at open edges.
Vec3 bicubic_eval(const SrnfGridMeta& meta, const std::vector<Vec3>& values, double u, double v);

// (q * φ)(x) = √b(x) · q(φ(x)).  Throws OutOfDomain if φ exits a non-periodic
// axis of the rectangle by more than 1e-9.
SrnfField reparam_act(const SrnfField& q, const Reparametrization& phi);

} // namespace srnflab
