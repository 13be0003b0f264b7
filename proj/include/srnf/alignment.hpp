#pragma once
#include "srnf/surface.hpp"

namespace srnflab {

struct AlignmentReport {
    RigidMotion best_motion; // maps f2's samples into f1's frame
    double rms_residual = 0; // RMS nearest-sample distance after alignment
    bool congruent = false;  // rms_residual <= threshold
    double threshold = 0;
};

// Weighted orthogonal-Procrustes fit: the rigid motion minimizing
// Σ wᵢ |R xᵢ + t − yᵢ|² over paired points.
RigidMotion kabsch(const std::vector<Vec3>& x, const std::vector<Vec3>& y, const std::vector<double>& w);

// Rigid-alignment certifier: Kabsch over the sample clouds (index-paired when
// the grids agree) refined by nearest-neighbor iteration, at least 10 rounds
// or until the residual change falls below 1e-10 of the diagonal.  A pair
// actually related by a rigid motion ends below 1e-8 × diagonal.  Throws
// InsufficientSamples when either cloud has fewer than 4096 samples.
AlignmentReport certify_noncongruent(const SurfaceImmersion& f1, const SurfaceImmersion& f2, double threshold);

// threshold = 1e-3 × bounding-box diagonal of f1.
AlignmentReport certify_noncongruent(const SurfaceImmersion& f1, const SurfaceImmersion& f2);

} // namespace srnflab
