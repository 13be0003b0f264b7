#pragma once

#include "srnf/moser.hpp"
#include "srnf/surface.hpp"
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace srnflab {

/* Closed "chessboard" surfaces: a planar place with holes, a bump cap over
   every hole, and a smooth rounded closure (rim ring + bottom cap) around
   the outer circle. gen_chessboard returns the identity embedding and its
   rearranged counterpart, which translates each cap by the scheduled
   translation, applies the area-preserving plane diffeomorphism on the flat
   region, and leaves the closure pointwise fixed. */
struct ChessboardSpec {
    FlatPlace place;
    std::vector<double> cap_heights; // [0] = bottom-cap bulge (signed), then one per hole
    std::vector<Vec2> translations;  // one per hole
    int edge_samples = 65;           // per-patch angular samples (odd, >= 17)
    double mesh_h = 0.05;            // Moser mesh target edge length
    double collar_width = 0.04;      // pinned-collar width of the plane map
};

struct ChessboardBuild {
    SurfaceImmersion id_surface;
    SurfaceImmersion moved_surface;
    MoserRun moser;                 // plane map, certificate, schedule
    std::vector<Vec2> flat_samples; // planar source points of the flat-zone samples
    /* The map's corrector interpolates over this mesh; keep it alive as long
       as `moser.map` is used. */
    std::shared_ptr<const HoledDiscDomain> domain;
};

/* Throws Overlap (bad source/target configuration), RoutingFailed (no nested
   arc plan), InvalidParam (configurations the conforming tiling does not
   cover: more than two holes, or a two-hole rearrangement that is neither
   zero nor an axis-aligned swap of equal discs). */
ChessboardBuild gen_chessboard_detailed(const ChessboardSpec& spec);
std::pair<SurfaceImmersion, SurfaceImmersion> gen_chessboard(const ChessboardSpec& spec);

/* Flip pair: a closed surface made of an inner cap M1 (radius `inner_radius`,
   asymmetric bumps), a flat annulus D, and an outer closure M0 (rim ring +
   bottom cap at `outer_radius`). The second output applies the identity on
   M0, the central inversion x -> -x on M1, and the in-plane twist
   (rho, phi) -> (rho, phi + twist(rho)) on D. */
struct FlipSpec {
    double inner_radius = 1.0;
    double outer_radius = 2.0;
    std::function<double(double)> twist; // empty -> default_flip_twist
    int edge_samples = 129;              // odd, >= 17
    bool identity_branch = false;        // replace the inversion on M1 by the identity
};

std::pair<SurfaceImmersion, SurfaceImmersion> gen_flip(const FlipSpec& spec);

/* Shipped twist profile: pi below rho = 1.1, 0 above rho = 1.9, monotone
   C-infinity in between (scaled to [inner_radius, outer_radius] endpoints
   when those differ from 1 and 2). */
double default_flip_twist(double rho, double inner_radius = 1.0, double outer_radius = 2.0);

/* max |det J - 1| of the in-plane twist over a dense radial/angular scan of
   the annulus, by the same plus-stencil finite difference the Moser
   certificate uses. */
double flip_twist_det_dev(const FlipSpec& spec, double h_st = 2e-6);

} // namespace srnflab
