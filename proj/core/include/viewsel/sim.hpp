#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "viewsel/geometry.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

enum class SolidKind { kBox, kCylinder, kSphere };

/// One primitive of the part. Positions and sizes are in mm, relative to the
/// volume center. The solid is rotated by `yaw_deg` about z around its center.
///   box:      size = half extents along local x, y, z
///   cylinder: size[0] = radius, size[2] = half length along `axis`
///   sphere:   size[0] = radius
/// Solids are painted in order, so a later solid with value 0 drills a hole.
struct Solid {
  SolidKind kind = SolidKind::kBox;
  std::array<double, 3> center{};
  std::array<double, 3> size{};
  char axis = 'z';
  double yaw_deg = 0.0;
  double value = 0.0;  // attenuation, mm^-1
};

struct PoreSpec {
  int count = 0;
  double radius_min = 1.0;  // voxels
  double radius_max = 3.0;  // voxels
  std::uint64_t seed = 0;
};

struct PhantomSpec {
  Shape3 shape;
  double voxel_pitch = 1.0;
  std::vector<Solid> solids;
  PoreSpec pores;
};

struct Phantom {
  Volume cad;    // nominal part
  Volume truth;  // part with pores
};

/// L-shaped bracket with drilled holes, yawed off the grid axes, plus 20
/// spherical pores of radius 1-3 voxels. Scales with the volume so it always
/// sits inside the cylindrical field of view.
PhantomSpec default_phantom_spec(Shape3 shape, double voxel_pitch, std::uint64_t seed = 1);

/// Voxelizes the solids (voxel-center sampling) into `cad`, then carves the
/// pores out of a copy to get `truth`. Each pore, grown by one voxel, must lie
/// inside the part and clear of earlier pores. Throws std::runtime_error when
/// a pore cannot be placed after bounded retries.
Phantom make_phantom(const PhantomSpec& spec);

/// Polychromatic source: each energy bin has a fluence weight and scales the
/// reference attenuation. Noise is additive Gaussian on the post-log data with
/// sigma = noise_relative * max of the noiseless projection.
struct SpectrumModel {
  std::vector<double> weights{1.0};
  std::vector<double> scales{1.0};
  double noise_relative = 0.0;

  /// Throws std::invalid_argument for a non-physical spectrum.
  void validate() const;
  /// Post-log response -log(sum_b w_b exp(-s_b l)) to a reference line integral l.
  [[nodiscard]] double response(double line_integral) const;
};

SpectrumModel default_spectrum();

/// Noisy post-log polychromatic projection of `truth`. The noise stream is a
/// pure function of (seed, angle).
Projection simulate_measurement(const Volume& truth, const ConeBeamGeometry& geom,
                                double angle_deg, const SpectrumModel& spectrum,
                                std::uint64_t seed);

/// Least-squares fit of the reference line integral as a polynomial in the
/// polychromatic response over [0, max_path]: l ~ sum_k c_k p^k with c_0 = 0.
/// Returns c_0..c_degree. Throws std::invalid_argument for max_path <= 0 or
/// degree < 1, and std::runtime_error when the fit is not monotone.
std::vector<double> calibrate_linearization(const SpectrumModel& spectrum, double max_path,
                                            int degree);

/// Applies p -> sum_k c_k p^k to every pixel. Throws std::runtime_error if the
/// polynomial is not increasing over the data range.
Projection linearize(const Projection& proj, std::span<const double> coeffs);

double eval_polynomial(std::span<const double> coeffs, double x);

}  // namespace viewsel
