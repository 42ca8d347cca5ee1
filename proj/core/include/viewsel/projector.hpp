#pragma once

#include <span>

#include "viewsel/geometry.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

/// Ray-driven cone-beam projector.
///
/// Each detector pixel integrates the volume along the segment from the source
/// to the pixel center. The segment is clipped to the voxel box, split into
/// equal steps no longer than half a voxel, and sampled at step midpoints with
/// clamp-to-edge trilinear interpolation. Samples are weighted by the step
/// length in mm, so a unit-attenuation path of L mm integrates to L.
///
/// back_project applies the exact transpose of the same weights, so the pair
/// passes a dot-product test up to float rounding.
Projection forward_project(const Volume& vol, const ConeBeamGeometry& geom, double angle_deg);

/// Unfiltered backprojection A^T y.
Volume back_project(const Projection& proj, const ConeBeamGeometry& geom, double angle_deg);

/// Forward projection written into an existing buffer of det_rows * det_cols.
void forward_project_into(std::span<const float> vol, const ConeBeamGeometry& geom,
                          double angle_deg, std::span<float> out);

/// acc += scale * A^T y, accumulated in double. `acc` has vol_shape().size()
/// entries. Accumulation order is fixed, so repeated calls are bit-identical
/// regardless of the worker count.
void back_project_add(std::span<const float> proj, const ConeBeamGeometry& geom,
                      double angle_deg, std::span<double> acc, double scale = 1.0);

}  // namespace viewsel
