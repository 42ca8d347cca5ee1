#include "viewsel/volume.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace viewsel {

Volume::Volume(Shape3 shape, double voxel_pitch, float fill)
    : shape_(shape), voxel_pitch_(voxel_pitch), data_(shape.size(), fill) {
  if (shape.nx <= 0 || shape.ny <= 0 || shape.nz <= 0) {
    throw std::invalid_argument("volume: shape must be positive");
  }
  if (!(voxel_pitch > 0.0)) throw std::invalid_argument("volume: voxel pitch must be positive");
}

Volume::Volume(Shape3 shape, double voxel_pitch, std::vector<float> data)
    : Volume(shape, voxel_pitch) {
  if (data.size() != shape.size()) {
    throw std::invalid_argument("volume: data size does not match shape");
  }
  data_ = std::move(data);
}

Projection::Projection(int rows, int cols, double angle_deg, float fill)
    : rows_(rows), cols_(cols), angle_deg_(angle_deg) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("projection: shape must be positive");
  data_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Projection::Projection(int rows, int cols, double angle_deg, std::vector<float> data)
    : Projection(rows, cols, angle_deg) {
  if (data.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("projection: data size does not match shape");
  }
  data_ = std::move(data);
}

void check_volume_matches(const Volume& vol, const ConeBeamGeometry& geom) {
  const auto& s = vol.shape();
  const auto& g = geom.vol_shape();
  if (!(s == g)) {
    throw std::invalid_argument("volume shape " + std::to_string(s.nx) + "x" +
                                std::to_string(s.ny) + "x" + std::to_string(s.nz) +
                                " does not match geometry " + std::to_string(g.nx) + "x" +
                                std::to_string(g.ny) + "x" + std::to_string(g.nz));
  }
  if (std::abs(vol.voxel_pitch() - geom.voxel_pitch()) > 1e-9 * geom.voxel_pitch()) {
    throw std::invalid_argument("volume voxel pitch does not match geometry");
  }
}

void check_projection_matches(const Projection& proj, const ConeBeamGeometry& geom) {
  if (proj.rows() != geom.det_rows() || proj.cols() != geom.det_cols()) {
    throw std::invalid_argument("projection shape " + std::to_string(proj.rows()) + "x" +
                                std::to_string(proj.cols()) + " does not match detector " +
                                std::to_string(geom.det_rows()) + "x" +
                                std::to_string(geom.det_cols()));
  }
}

}  // namespace viewsel
