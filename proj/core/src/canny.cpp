#include "viewsel/edges.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace viewsel {

namespace {

// Relative slack for magnitude comparisons; keeps ties stable under affine
// intensity changes that only perturb the last few bits.
constexpr double kRelTol = 1e-9;

bool greater(double a, double b) { return a > b + kRelTol * (std::abs(a) + std::abs(b)); }
bool at_least(double a, double b) { return a >= b - kRelTol * (std::abs(a) + std::abs(b)); }

void validate(const CannyParams& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("canny: sigma must be positive");
  if (!(p.low > 0.0 && p.low < p.high)) {
    throw std::invalid_argument("canny: thresholds must satisfy 0 < low < high");
  }
  if (p.mode == ThresholdMode::kQuantile && p.high > 1.0) {
    throw std::invalid_argument("canny: quantile thresholds must not exceed 1");
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& w : k) w /= sum;
  return k;
}

/// Smoothed gradient magnitude of one slice plus its non-maximum-suppression mask.
void slice_gradient(std::span<const float> src, int nx, int ny, const std::vector<double>& kernel,
                    std::span<double> mag, std::span<std::uint8_t> peak) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto at = [nx](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };
  std::vector<double> tmp(src.size());
  std::vector<double> smooth(src.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        s += kernel[t + radius] * src[at(std::clamp(i + t, 0, nx - 1), j)];
      }
      tmp[at(i, j)] = s;
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        s += kernel[t + radius] * tmp[at(i, std::clamp(j + t, 0, ny - 1))];
      }
      smooth[at(i, j)] = s;
    }
  }

  std::vector<double> gx(src.size());
  std::vector<double> gy(src.size());
  const auto p = [&](int i, int j) {
    return smooth[at(std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1))];
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double dx = (p(i + 1, j - 1) + 2.0 * p(i + 1, j) + p(i + 1, j + 1)) -
                        (p(i - 1, j - 1) + 2.0 * p(i - 1, j) + p(i - 1, j + 1));
      const double dy = (p(i - 1, j + 1) + 2.0 * p(i, j + 1) + p(i + 1, j + 1)) -
                        (p(i - 1, j - 1) + 2.0 * p(i, j - 1) + p(i + 1, j - 1));
      gx[at(i, j)] = dx;
      gy[at(i, j)] = dy;
      mag[at(i, j)] = std::hypot(dx, dy);
    }
  }

  const double tan22 = std::tan(std::numbers::pi / 8.0);
  const auto m = [&](int i, int j) {
    return mag[at(std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1))];
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t idx = at(i, j);
      const double v = mag[idx];
      if (!(v > 0.0)) {
        peak[idx] = 0;
        continue;
      }
      const double ax = std::abs(gx[idx]);
      const double ay = std::abs(gy[idx]);
      int di = 0;
      int dj = 0;
      if (ay <= tan22 * ax) {
        di = gx[idx] > 0 ? 1 : -1;
      } else if (ax <= tan22 * ay) {
        dj = gy[idx] > 0 ? 1 : -1;
      } else {
        di = gx[idx] > 0 ? 1 : -1;
        dj = gy[idx] > 0 ? 1 : -1;
      }
      // Ties along the gradient keep only the uphill-facing pixel.
      const double ahead = m(i + di, j + dj);
      const double behind = m(i - di, j - dj);
      peak[idx] = (at_least(v, ahead) && greater(v, behind)) ? 1 : 0;
    }
  }
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - lo;
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + lo + 1, values.end());
  return a + frac * (b - a);
}

void hysteresis(std::span<const double> mag, std::span<const std::uint8_t> peak,
                std::span<const std::uint8_t> interior, int nx, int ny, double low,
                double high, std::span<std::uint8_t> out) {
  const auto at = [nx](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };
  const auto weak = [&](std::size_t idx) {
    return interior[idx] && peak[idx] && mag[idx] > 0.0 && at_least(mag[idx], low);
  };
  std::vector<int> stack;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t idx = at(i, j);
      if (out[idx] || !weak(idx) || !at_least(mag[idx], high)) continue;
      out[idx] = 1;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int ci = cur % nx;
        const int cj = cur / nx;
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            const int ni = ci + di;
            const int nj = cj + dj;
            if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
            const std::size_t nidx = at(ni, nj);
            if (out[nidx] || !weak(nidx)) continue;
            out[nidx] = 1;
            stack.push_back(static_cast<int>(nidx));
          }
        }
      }
    }
  }
}

std::vector<std::uint8_t> detect(std::span<const float> data, int nx, int ny, int nz,
                                 const CannyParams& params) {
  validate(params);
  const std::size_t slice = static_cast<std::size_t>(nx) * ny;
  const auto kernel = gaussian_kernel(params.sigma);
  std::vector<double> mag(data.size());
  std::vector<std::uint8_t> peak(data.size());

#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    slice_gradient(data.subspan(k * slice, slice), nx, ny, kernel,
                   std::span<double>(mag).subspan(k * slice, slice),
                   std::span<std::uint8_t>(peak).subspan(k * slice, slice));
  }

  const bool z_margin = nz >= 3;
  std::vector<std::uint8_t> interior(slice, 0);
  for (int j = 1; j + 1 < ny; ++j) {
    for (int i = 1; i + 1 < nx; ++i) interior[static_cast<std::size_t>(j) * nx + i] = 1;
  }
  const auto slice_used = [&](int k) { return !z_margin || (k > 0 && k + 1 < nz); };

  double low = params.low;
  double high = params.high;
  if (params.mode == ThresholdMode::kQuantile) {
    std::vector<double> population;
    for (int k = 0; k < nz; ++k) {
      if (!slice_used(k)) continue;
      for (std::size_t s = 0; s < slice; ++s) {
        if (interior[s]) population.push_back(mag[k * slice + s]);
      }
    }
    low = quantile(population, params.low);
    high = quantile(population, params.high);
  }

  std::vector<std::uint8_t> out(data.size(), 0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    if (!slice_used(k)) continue;
    hysteresis(std::span<const double>(mag).subspan(k * slice, slice),
               std::span<const std::uint8_t>(peak).subspan(k * slice, slice), interior, nx, ny,
               low, high, std::span<std::uint8_t>(out).subspan(k * slice, slice));
  }
  return out;
}

}  // namespace

EdgeVolume::EdgeVolume(Shape3 shape, double voxel_pitch, std::vector<std::uint8_t> data)
    : shape_(shape), voxel_pitch_(voxel_pitch), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("edge volume: data size does not match shape");
  }
  for (auto v : data_) {
    if (v > 1) throw std::invalid_argument("edge volume: values must be 0 or 1");
  }
}

std::size_t EdgeVolume::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::size_t EdgeVolume::count_slice(int k) const {
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(k * shape_.slice_size());
  return static_cast<std::size_t>(
      std::count(first, first + static_cast<std::ptrdiff_t>(shape_.slice_size()), std::uint8_t{1}));
}

Volume EdgeVolume::to_volume() const {
  std::vector<float> values(data_.begin(), data_.end());
  return Volume(shape_, voxel_pitch_, std::move(values));
}

EdgeVolume canny_edges(const Volume& vol, const CannyParams& params) {
  const auto& s = vol.shape();
  return EdgeVolume(s, vol.voxel_pitch(), detect(vol.data(), s.nx, s.ny, s.nz, params));
}

std::vector<std::uint8_t> canny_slice(std::span<const float> slice, int nx, int ny,
                                      const CannyParams& params) {
  if (slice.size() != static_cast<std::size_t>(nx) * ny) {
    throw std::invalid_argument("canny: slice size does not match dimensions");
  }
  return detect(slice, nx, ny, 1, params);
}

}  // namespace viewsel
