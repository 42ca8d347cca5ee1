#pragma once

#include "viewsel/volume.hpp"

namespace viewsel {

/// ||est - ref||_2 / ||ref||_2. Throws std::invalid_argument on shape mismatch
/// or an all-zero reference.
double nrmse(const Volume& est, const Volume& ref);

struct SsimParams {
  int window = 7;  // odd, >= 3
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every fully contained window of every axial slice, with
/// uniform windows, population statistics, and dynamic range
/// L = max(ref) - min(ref) taken over the whole reference volume.
/// Throws std::invalid_argument on shape mismatch, a bad window, or a constant
/// reference.
double ssim(const Volume& est, const Volume& ref, const SsimParams& params = {});

}  // namespace viewsel
