#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "viewsel/geometry.hpp"
#include "viewsel/volume.hpp"

namespace testutil {

inline viewsel::GeometryParams cube_params(int n, double pitch = 1.0) {
  // Magnification 1.5 with a detector wide enough for the FOV cylinder.
  const double sod = 6.0 * n * pitch;
  const double sdd = 1.5 * sod;
  const int det = static_cast<int>(std::ceil(1.5 * n * 1.25)) + 2;
  return {sod, sdd, det, det, pitch, {n, n, n}, pitch};
}

inline viewsel::ConeBeamGeometry cube_geometry(int n, double pitch = 1.0) {
  return viewsel::ConeBeamGeometry(cube_params(n, pitch));
}

inline viewsel::Volume random_volume(const viewsel::Shape3& shape, double pitch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(shape.size());
  for (auto& x : v) x = u(rng);
  return viewsel::Volume(shape, pitch, std::move(v));
}

inline viewsel::Projection random_projection(int rows, int cols, double angle, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = u(rng);
  return viewsel::Projection(rows, cols, angle, std::move(v));
}

/// Smooth blob phantom: sum of a few Gaussians, zero outside the FOV cylinder.
inline viewsel::Volume blob_volume(const viewsel::Shape3& s, double pitch) {
  viewsel::Volume v(s, pitch);
  const double cx = 0.5 * (s.nx - 1);
  const double cy = 0.5 * (s.ny - 1);
  const double cz = 0.5 * (s.nz - 1);
  const double r = 0.5 * std::min(s.nx, s.ny);
  for (int k = 0; k < s.nz; ++k) {
    for (int j = 0; j < s.ny; ++j) {
      for (int i = 0; i < s.nx; ++i) {
        const double x = i - cx;
        const double y = j - cy;
        const double z = k - cz;
        const double a = std::exp(-((x - 0.2 * r) * (x - 0.2 * r) + y * y + z * z) / (0.08 * r * r));
        const double b = std::exp(-((x + 0.25 * r) * (x + 0.25 * r) + (y - 0.3 * r) * (y - 0.3 * r) +
                                    (z - 0.1 * r) * (z - 0.1 * r)) /
                                  (0.04 * r * r));
        v(i, j, k) = static_cast<float>(a + 0.5 * b);
      }
    }
  }
  return v;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

}  // namespace testutil
