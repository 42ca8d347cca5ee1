#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "viewsel/geometry.hpp"

namespace viewsel {

/// Dense 3D attenuation map in mm^-1. Index (i, j, k) maps to
/// (k * ny + j) * nx + i.
class Volume {
 public:
  Volume() = default;
  Volume(Shape3 shape, double voxel_pitch, float fill = 0.0f);
  Volume(Shape3 shape, double voxel_pitch, std::vector<float> data);

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] double voxel_pitch() const { return voxel_pitch_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }

  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * shape_.ny + j) * shape_.nx + i;
  }
  float& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  float operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

  /// Contiguous view of axial slice k (ny rows of nx values).
  [[nodiscard]] std::span<const float> slice(int k) const {
    return std::span<const float>(data_).subspan(k * shape_.slice_size(), shape_.slice_size());
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Shape3 shape_;
  double voxel_pitch_ = 1.0;
  std::vector<float> data_;
};

/// One detector frame of post-log line integrals. Row-major, rows along the
/// rotation axis (v), columns along u.
class Projection {
 public:
  Projection() = default;
  Projection(int rows, int cols, double angle_deg, float fill = 0.0f);
  Projection(int rows, int cols, double angle_deg, std::vector<float> data);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] double angle() const { return angle_deg_; }
  void set_angle(double angle_deg) { angle_deg_ = angle_deg; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }

  float& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  float operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  friend bool operator==(const Projection&, const Projection&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  double angle_deg_ = 0.0;
  std::vector<float> data_;
};

/// Throws std::invalid_argument when the volume does not match the geometry grid.
void check_volume_matches(const Volume& vol, const ConeBeamGeometry& geom);
/// Throws std::invalid_argument when the projection does not match the detector.
void check_projection_matches(const Projection& proj, const ConeBeamGeometry& geom);

}  // namespace viewsel
