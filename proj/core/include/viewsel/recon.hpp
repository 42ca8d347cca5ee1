#pragma once

#include <span>
#include <vector>

#include "viewsel/geometry.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

struct SirtParams {
  int iterations = 50;
  double relax = 1.0;  // (0, 2]
  bool nonneg = true;
};

/// Simultaneous iterative reconstruction:
///   x <- x + relax * C * A^T R (y - A x)
/// where R and C hold the reciprocal row and column sums of the system matrix
/// restricted to the supplied views. With `nonneg`, x is clamped at zero after
/// every update. Each projection carries its own angle.
///
/// `init` warm-starts the solve; `residual_norms`, when given, receives
/// ||y - A x_k||_2 for k = 0..iterations (one entry more than iterations).
Volume reconstruct_sirt(std::span<const Projection> projs, const ConeBeamGeometry& geom,
                        const SirtParams& params, const Volume* init = nullptr,
                        std::vector<double>* residual_norms = nullptr);

}  // namespace viewsel
