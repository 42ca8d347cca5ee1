#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "viewsel/volume.hpp"

namespace viewsel {

enum class ThresholdMode {
  kQuantile,  // thresholds are quantiles of the gradient-magnitude distribution
  kAbsolute,  // thresholds are gradient magnitudes (attenuation per voxel)
};

struct CannyParams {
  double sigma = 1.0;  // Gaussian smoothing, voxels
  double low = 0.80;
  double high = 0.90;
  ThresholdMode mode = ThresholdMode::kQuantile;
};

/// Binary edge map with the same grid as its source volume. Values are 0 or 1.
class EdgeVolume {
 public:
  EdgeVolume() = default;
  EdgeVolume(Shape3 shape, double voxel_pitch, std::vector<std::uint8_t> data);

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] double voxel_pitch() const { return voxel_pitch_; }
  [[nodiscard]] std::span<const std::uint8_t> data() const { return data_; }
  [[nodiscard]] std::uint8_t operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(k) * shape_.ny + j) * shape_.nx + i];
  }
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] std::size_t count_slice(int k) const;

  /// 0/1 attenuation volume, ready for the projector.
  [[nodiscard]] Volume to_volume() const;

 private:
  Shape3 shape_;
  double voxel_pitch_ = 1.0;
  std::vector<std::uint8_t> data_;
};

/// Canny edge detection applied to each axial slice independently: Gaussian
/// smoothing, Sobel gradient, non-maximum suppression, then hysteresis with
/// 8-connectivity. In quantile mode both thresholds are quantiles of the
/// gradient magnitude over all non-border voxels of the volume. The 1-voxel
/// volume border is always cleared.
///
/// Throws std::invalid_argument unless sigma > 0 and 0 < low < high (and
/// high <= 1 in quantile mode).
EdgeVolume canny_edges(const Volume& vol, const CannyParams& params = {});

/// Single-slice variant; quantiles are taken over the slice interior.
std::vector<std::uint8_t> canny_slice(std::span<const float> slice, int nx, int ny,
                                      const CannyParams& params = {});

}  // namespace viewsel
