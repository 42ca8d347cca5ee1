#include "viewsel/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace viewsel {

namespace {

constexpr int kChunkRows = 4;
constexpr double kStepFraction = 0.5;  // sampling step in voxel pitches

struct Axis {
  int n;
  double hi;    // clamp bound, n - 1
  int i_max;    // largest lower neighbor, max(n - 2, 0)
  long stride;  // offset to the upper neighbor, 0 for single-voxel axes

  void locate(double p, int& i0, double& f) const {
    const double c = p < 0.0 ? 0.0 : (p > hi ? hi : p);
    int i = static_cast<int>(c);
    if (i > i_max) i = i_max;
    i0 = i;
    f = c - i;
  }
};

struct Ray {
  double x, y, z;     // first sample, index coordinates
  double dx, dy, dz;  // step between samples, index coordinates
  double z_first, z_last;
  int samples = 0;
  double weight = 0.0;  // mm per sample
};

/// Per-angle constants that turn a detector pixel into a clipped ray.
class RayFactory {
 public:
  RayFactory(const ConeBeamGeometry& geom, double angle_deg) : geom_(geom) {
    const auto& s = geom.vol_shape();
    h_ = geom.voxel_pitch();
    center_ = {0.5 * (s.nx - 1), 0.5 * (s.ny - 1), 0.5 * (s.nz - 1)};
    upper_ = {s.nx - 0.5, s.ny - 0.5, s.nz - 0.5};
    const double phi = -angle_deg * std::numbers::pi / 180.0;
    cos_ = std::cos(phi);
    sin_ = std::sin(phi);
    const double sod = geom.sod();
    const double odd = geom.sdd() - sod;
    src_ = {sod * cos_, sod * sin_, 0.0};
    det_center_ = {-odd * cos_, -odd * sin_, 0.0};
    u0_ = -0.5 * (geom.det_cols() - 1) * geom.det_pitch();
    v0_ = -0.5 * (geom.det_rows() - 1) * geom.det_pitch();
  }

  bool make(int row, int col, Ray& ray) const {
    const double u = u0_ + col * geom_.det_pitch();
    const double v = v0_ + row * geom_.det_pitch();
    // Detector u axis is (-sin, cos, 0); v is +z.
    const double px = det_center_[0] - u * sin_;
    const double py = det_center_[1] + u * cos_;
    const double pz = v;
    const double d_mm[3] = {px - src_[0], py - src_[1], pz - src_[2]};
    const double length = std::sqrt(d_mm[0] * d_mm[0] + d_mm[1] * d_mm[1] + d_mm[2] * d_mm[2]);

    double o[3];
    double d[3];
    double t0 = 0.0;
    double t1 = 1.0;
    for (int a = 0; a < 3; ++a) {
      o[a] = src_[a] / h_ + center_[a];
      d[a] = d_mm[a] / h_;
      if (std::abs(d[a]) < 1e-12) {
        if (o[a] < -0.5 || o[a] > upper_[a]) return false;
        continue;
      }
      double ta = (-0.5 - o[a]) / d[a];
      double tb = (upper_[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (!(t1 > t0)) return false;

    const double chord = length * (t1 - t0);
    const int n = std::max(1, static_cast<int>(std::ceil(chord / (kStepFraction * h_) - 1e-9)));
    const double dt = (t1 - t0) / n;
    const double t_start = t0 + 0.5 * dt;
    ray.x = o[0] + d[0] * t_start;
    ray.y = o[1] + d[1] * t_start;
    ray.z = o[2] + d[2] * t_start;
    ray.dx = d[0] * dt;
    ray.dy = d[1] * dt;
    ray.dz = d[2] * dt;
    ray.z_first = ray.z;
    ray.z_last = ray.z + ray.dz * (n - 1);
    ray.samples = n;
    ray.weight = chord / n;
    return true;
  }

 private:
  const ConeBeamGeometry& geom_;
  double h_ = 1.0;
  double cos_ = 1.0;
  double sin_ = 0.0;
  std::array<double, 3> center_{};
  std::array<double, 3> upper_{};
  std::array<double, 3> src_{};
  std::array<double, 3> det_center_{};
  double u0_ = 0.0;
  double v0_ = 0.0;
};

struct Grid {
  Axis x, y, z;
  long slice;

  explicit Grid(const Shape3& s)
      : x{s.nx, s.nx - 1.0, std::max(s.nx - 2, 0), s.nx > 1 ? 1L : 0L},
        y{s.ny, s.ny - 1.0, std::max(s.ny - 2, 0), s.ny > 1 ? static_cast<long>(s.nx) : 0L},
        z{s.nz, s.nz - 1.0, std::max(s.nz - 2, 0),
          s.nz > 1 ? static_cast<long>(s.nx) * s.ny : 0L},
        slice(static_cast<long>(s.nx) * s.ny) {}
};

double integrate_ray(const float* vol, const Grid& g, const Ray& ray) {
  double sum = 0.0;
  double px = ray.x;
  double py = ray.y;
  double pz = ray.z;
  const long ox = g.x.stride;
  const long oy = g.y.stride;
  const long oz = g.z.stride;
  for (int k = 0; k < ray.samples; ++k) {
    int i, j, l;
    double fx, fy, fz;
    g.x.locate(px, i, fx);
    g.y.locate(py, j, fy);
    g.z.locate(pz, l, fz);
    const float* b = vol + (l * g.slice + static_cast<long>(j) * g.x.n + i);
    const double c00 = b[0] + fx * (b[ox] - b[0]);
    const double c10 = b[oy] + fx * (b[oy + ox] - b[oy]);
    const double c01 = b[oz] + fx * (b[oz + ox] - b[oz]);
    const double c11 = b[oz + oy] + fx * (b[oz + oy + ox] - b[oz + oy]);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    sum += c0 + fz * (c1 - c0);
    px += ray.dx;
    py += ray.dy;
    pz += ray.dz;
  }
  return sum * ray.weight;
}

// Transpose of integrate_ray. `acc` points at voxel (0, 0, z_offset).
void scatter_ray(double* acc, long z_offset, const Grid& g, const Ray& ray, double value) {
  const double w = value * ray.weight;
  double px = ray.x;
  double py = ray.y;
  double pz = ray.z;
  const long ox = g.x.stride;
  const long oy = g.y.stride;
  const long oz = g.z.stride;
  for (int k = 0; k < ray.samples; ++k) {
    int i, j, l;
    double fx, fy, fz;
    g.x.locate(px, i, fx);
    g.y.locate(py, j, fy);
    g.z.locate(pz, l, fz);
    double* b = acc + ((l - z_offset) * g.slice + static_cast<long>(j) * g.x.n + i);
    const double wz1 = w * fz;
    const double wz0 = w - wz1;
    const double w01 = wz0 * fy;
    const double w00 = wz0 - w01;
    const double w11 = wz1 * fy;
    const double w10 = wz1 - w11;
    b[0] += w00 - w00 * fx;
    b[ox] += w00 * fx;
    b[oy] += w01 - w01 * fx;
    b[oy + ox] += w01 * fx;
    b[oz] += w10 - w10 * fx;
    b[oz + ox] += w10 * fx;
    b[oz + oy] += w11 - w11 * fx;
    b[oz + oy + ox] += w11 * fx;
    px += ray.dx;
    py += ray.dy;
    pz += ray.dz;
  }
}

}  // namespace

void forward_project_into(std::span<const float> vol, const ConeBeamGeometry& geom,
                          double angle_deg, std::span<float> out) {
  if (vol.size() != geom.vol_shape().size()) {
    throw std::invalid_argument("forward_project: volume size does not match geometry");
  }
  if (out.size() != geom.det_size()) {
    throw std::invalid_argument("forward_project: output size does not match detector");
  }
  const RayFactory factory(geom, angle_deg);
  const Grid grid(geom.vol_shape());
  const int rows = geom.det_rows();
  const int cols = geom.det_cols();
  const float* v = vol.data();
  float* o = out.data();

#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    Ray ray;
    for (int c = 0; c < cols; ++c) {
      o[static_cast<std::size_t>(r) * cols + c] =
          factory.make(r, c, ray) ? static_cast<float>(integrate_ray(v, grid, ray)) : 0.0f;
    }
  }
}

Projection forward_project(const Volume& vol, const ConeBeamGeometry& geom, double angle_deg) {
  check_volume_matches(vol, geom);
  Projection proj(geom.det_rows(), geom.det_cols(), angle_deg);
  forward_project_into(vol.data(), geom, angle_deg, proj.data());
  return proj;
}

void back_project_add(std::span<const float> proj, const ConeBeamGeometry& geom,
                      double angle_deg, std::span<double> acc, double scale) {
  if (proj.size() != geom.det_size()) {
    throw std::invalid_argument("back_project: projection size does not match detector");
  }
  if (acc.size() != geom.vol_shape().size()) {
    throw std::invalid_argument("back_project: accumulator size does not match geometry");
  }
  const RayFactory factory(geom, angle_deg);
  const Grid grid(geom.vol_shape());
  const int rows = geom.det_rows();
  const int cols = geom.det_cols();
  const int nz = geom.vol_shape().nz;
  const int n_chunks = (rows + kChunkRows - 1) / kChunkRows;

  struct Band {
    int z_lo = 0;
    int z_hi = -1;
    std::vector<double> data;
  };

  // Chunks of detector rows scatter into private z-bands; bands are merged in
  // chunk order so every voxel sees the same addition sequence.
  int group = 1;
#ifdef _OPENMP
  group = std::max(1, omp_get_max_threads());
#endif
  std::vector<Band> bands(static_cast<std::size_t>(std::min(group, n_chunks)));

  for (int first = 0; first < n_chunks; first += group) {
    const int last = std::min(n_chunks, first + group);
#pragma omp parallel for schedule(static)
    for (int chunk = first; chunk < last; ++chunk) {
      Band& band = bands[chunk - first];
      const int r_begin = chunk * kChunkRows;
      const int r_end = std::min(rows, r_begin + kChunkRows);
      double z_min = 1e300;
      double z_max = -1e300;
      bool any = false;
      Ray ray;
      for (int r = r_begin; r < r_end; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (proj[static_cast<std::size_t>(r) * cols + c] == 0.0f) continue;
          if (!factory.make(r, c, ray)) continue;
          any = true;
          z_min = std::min({z_min, ray.z_first, ray.z_last});
          z_max = std::max({z_max, ray.z_first, ray.z_last});
        }
      }
      if (!any) {
        band.z_hi = band.z_lo - 1;
        continue;
      }
      band.z_lo = std::clamp(static_cast<int>(std::floor(z_min)) - 1, 0, nz - 1);
      band.z_hi = std::clamp(static_cast<int>(std::floor(z_max)) + 2, 0, nz - 1);
      band.data.assign(static_cast<std::size_t>(band.z_hi - band.z_lo + 1) * grid.slice, 0.0);
      for (int r = r_begin; r < r_end; ++r) {
        for (int c = 0; c < cols; ++c) {
          const float y = proj[static_cast<std::size_t>(r) * cols + c];
          if (y == 0.0f) continue;
          if (!factory.make(r, c, ray)) continue;
          scatter_ray(band.data.data(), band.z_lo, grid, ray, scale * y);
        }
      }
    }
    for (int chunk = first; chunk < last; ++chunk) {
      const Band& band = bands[chunk - first];
      if (band.z_hi < band.z_lo) continue;
      double* dst = acc.data() + static_cast<std::size_t>(band.z_lo) * grid.slice;
      const std::size_t n = band.data.size();
      for (std::size_t i = 0; i < n; ++i) dst[i] += band.data[i];
    }
  }
}

Volume back_project(const Projection& proj, const ConeBeamGeometry& geom, double angle_deg) {
  check_projection_matches(proj, geom);
  std::vector<double> acc(geom.vol_shape().size(), 0.0);
  back_project_add(proj.data(), geom, angle_deg, acc);
  std::vector<float> out(acc.begin(), acc.end());
  return Volume(geom.vol_shape(), geom.voxel_pitch(), std::move(out));
}

}  // namespace viewsel
