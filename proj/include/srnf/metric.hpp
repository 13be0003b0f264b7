#pragma once
#include "srnf/surface.hpp"

namespace srnflab {

// L² inner product of two fields over identical grids: Σ ⟨q1,q2⟩ · rw.
// Throws GridMismatch when patch layouts or Riemannian weights differ.
double l2_inner(const SrnfField& q1, const SrnfField& q2);

// ‖Φ(f1) − Φ(f2)‖ over shared domain grids.
double srnf_distance(const SurfaceImmersion& f1, const SurfaceImmersion& f2);
double srnf_distance(const SrnfField& q1, const SrnfField& q2);

// Largest samplewise |q1 − q2|; companion diagnostic to the integrated distance.
double samplewise_max_dev(const SrnfField& q1, const SrnfField& q2);

// Rotation action (A * q)(x) = A q(x); only the rotation part of `m` is used.
SrnfField rotate_field(const SrnfField& q, const RigidMotion& m);

} // namespace srnflab
