#include "viewsel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace viewsel {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("geometry: " + what);
}

}  // namespace

ConeBeamGeometry::ConeBeamGeometry(const GeometryParams& params) : params_(params) {
  const auto& p = params_;
  require(p.source_object_dist > 0.0, "source_object_dist must be positive");
  require(p.source_detector_dist > 0.0, "source_detector_dist must be positive");
  require(p.source_detector_dist > p.source_object_dist,
          "source_detector_dist must exceed source_object_dist");
  require(p.det_rows > 0 && p.det_cols > 0, "detector must have at least one pixel");
  require(p.det_pitch > 0.0, "det_pitch must be positive");
  require(p.vol_shape.nx > 0 && p.vol_shape.ny > 0 && p.vol_shape.nz > 0,
          "vol_shape must be positive");
  require(p.voxel_pitch > 0.0, "voxel_pitch must be positive");

  const double half_x = 0.5 * p.vol_shape.nx * p.voxel_pitch;
  const double half_y = 0.5 * p.vol_shape.ny * p.voxel_pitch;
  const double half_z = 0.5 * p.vol_shape.nz * p.voxel_pitch;
  require(std::hypot(half_x, half_y) < p.source_object_dist,
          "volume half-diagonal must be smaller than source_object_dist");

  // Worst case over all angles: a cylinder point of radius r reaches
  // |u| = SDD r / sqrt(SOD^2 - r^2) and |v| peaks at the point nearest the source.
  const double r = fov_radius();
  const double sod = p.source_object_dist;
  const double sdd = p.source_detector_dist;
  const double u_max = sdd * r / std::sqrt(sod * sod - r * r);
  const double v_max = sdd * half_z / (sod - r);
  const double det_half_w = 0.5 * p.det_cols * p.det_pitch;
  const double det_half_h = 0.5 * p.det_rows * p.det_pitch;
  require(u_max <= det_half_w * (1.0 + 1e-12),
          "magnified field of view (" + std::to_string(2.0 * u_max) +
              " mm) exceeds detector width (" + std::to_string(2.0 * det_half_w) + " mm)");
  require(v_max <= det_half_h * (1.0 + 1e-12),
          "magnified field of view (" + std::to_string(2.0 * v_max) +
              " mm) exceeds detector height (" + std::to_string(2.0 * det_half_h) + " mm)");
}

double ConeBeamGeometry::fov_radius() const {
  const auto& s = params_.vol_shape;
  return 0.5 * std::min(s.nx, s.ny) * params_.voxel_pitch;
}

std::array<double, 3> ConeBeamGeometry::voxel_center(int i, int j, int k) const {
  const auto& s = params_.vol_shape;
  const double h = params_.voxel_pitch;
  return {(i - 0.5 * (s.nx - 1)) * h, (j - 0.5 * (s.ny - 1)) * h, (k - 0.5 * (s.nz - 1)) * h};
}

std::array<double, 2> ConeBeamGeometry::project_point(const std::array<double, 3>& p,
                                                      double angle_deg) const {
  const double phi = -angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const double depth = sod() - (p[0] * c + p[1] * s);
  const double scale = sdd() / depth;
  const double u = (-p[0] * s + p[1] * c) * scale;
  const double v = p[2] * scale;
  return {u / det_pitch() + 0.5 * (det_cols() - 1), v / det_pitch() + 0.5 * (det_rows() - 1)};
}

bool ConeBeamGeometry::fov_covered_at(double angle_deg) const {
  const auto& s = params_.vol_shape;
  const double r2 = fov_radius() * fov_radius();
  for (int k = 0; k < s.nz; ++k) {
    for (int j = 0; j < s.ny; ++j) {
      for (int i = 0; i < s.nx; ++i) {
        const auto p = voxel_center(i, j, k);
        if (p[0] * p[0] + p[1] * p[1] > r2) continue;
        const auto d = project_point(p, angle_deg);
        // Pixel centers sit at integer coordinates; the panel spans +-0.5 beyond.
        if (d[0] < -0.5 || d[0] > det_cols() - 0.5) return false;
        if (d[1] < -0.5 || d[1] > det_rows() - 0.5) return false;
      }
    }
  }
  return true;
}

ConeBeamGeometry make_geometry(const GeometryParams& params) { return ConeBeamGeometry(params); }

AngleGrid::AngleGrid(std::vector<double> angles_deg) : angles_(std::move(angles_deg)) {
  for (std::size_t i = 0; i < angles_.size(); ++i) {
    if (!(angles_[i] >= 0.0 && angles_[i] < 360.0)) {
      throw std::invalid_argument("angle grid: angles must lie in [0, 360)");
    }
    if (i > 0 && !(angles_[i] > angles_[i - 1])) {
      throw std::invalid_argument("angle grid: angles must be strictly increasing");
    }
  }
}

AngleGrid candidate_angles(int count) {
  if (count < 2) throw std::invalid_argument("candidate_angles: count must be at least 2");
  std::vector<double> angles(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) angles[i] = 360.0 * i / count;
  return AngleGrid(std::move(angles));
}

}  // namespace viewsel
