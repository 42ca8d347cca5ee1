#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace viewsel {

/// Voxel grid dimensions. Storage order is x fastest, z slowest, so one
/// axial slice is a contiguous block of nx*ny values.
struct Shape3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  [[nodiscard]] std::size_t slice_size() const {
    return static_cast<std::size_t>(nx) * ny;
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct GeometryParams {
  double source_object_dist = 0.0;    // mm, source to rotation axis
  double source_detector_dist = 0.0;  // mm, source to detector plane
  int det_rows = 0;
  int det_cols = 0;
  double det_pitch = 0.0;  // mm
  Shape3 vol_shape;
  double voxel_pitch = 0.0;  // mm
};

/// Circular-trajectory flat-panel cone-beam scan. The rotation axis is the
/// volume z axis and the source travels in the z = 0 midplane.
///
/// Angles are object rotations in degrees: viewing the object at angle t is
/// the same as keeping the object fixed and placing the source at azimuth -t.
/// At t = 0 the source sits on the +x axis and the detector u axis points
/// along +y.
///
/// The field of view is the cylinder inscribed in the volume's xy footprint.
/// Construction guarantees every point of that cylinder projects onto the
/// detector at every angle; voxels in the square's corners may be truncated.
class ConeBeamGeometry {
 public:
  /// Validates `params`; throws std::invalid_argument on a non-physical
  /// geometry or when the field of view does not fit the detector.
  explicit ConeBeamGeometry(const GeometryParams& params);

  [[nodiscard]] const GeometryParams& params() const { return params_; }
  [[nodiscard]] double sod() const { return params_.source_object_dist; }
  [[nodiscard]] double sdd() const { return params_.source_detector_dist; }
  [[nodiscard]] int det_rows() const { return params_.det_rows; }
  [[nodiscard]] int det_cols() const { return params_.det_cols; }
  [[nodiscard]] double det_pitch() const { return params_.det_pitch; }
  [[nodiscard]] const Shape3& vol_shape() const { return params_.vol_shape; }
  [[nodiscard]] double voxel_pitch() const { return params_.voxel_pitch; }
  [[nodiscard]] double magnification() const { return sdd() / sod(); }
  [[nodiscard]] std::size_t det_size() const {
    return static_cast<std::size_t>(det_rows()) * det_cols();
  }

  /// Radius (mm) of the cylindrical field of view.
  [[nodiscard]] double fov_radius() const;

  /// Lab-frame position of voxel center (i, j, k) in mm.
  [[nodiscard]] std::array<double, 3> voxel_center(int i, int j, int k) const;

  /// Continuous detector coordinates (column, row) where the ray from the
  /// source through object point `p` (mm) lands at `angle_deg`.
  [[nodiscard]] std::array<double, 2> project_point(
      const std::array<double, 3>& p, double angle_deg) const;

  /// True when every voxel center inside the field of view lands on the
  /// detector at `angle_deg`. Exhaustive; intended for tests and tools.
  [[nodiscard]] bool fov_covered_at(double angle_deg) const;

 private:
  GeometryParams params_;
};

ConeBeamGeometry make_geometry(const GeometryParams& params);

/// Ordered, duplicate-free list of candidate view angles in [0, 360).
class AngleGrid {
 public:
  /// Throws std::invalid_argument unless `angles_deg` is strictly increasing
  /// and inside [0, 360).
  explicit AngleGrid(std::vector<double> angles_deg);

  [[nodiscard]] std::size_t size() const { return angles_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return angles_[i]; }
  [[nodiscard]] const std::vector<double>& angles() const { return angles_; }

 private:
  std::vector<double> angles_;
};

/// `count` angles uniformly spaced over [0, 360), starting at 0.
AngleGrid candidate_angles(int count);

}  // namespace viewsel
