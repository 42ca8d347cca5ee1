#include "viewsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace viewsel {

namespace {

void check_same_shape(const Volume& a, const Volume& b) {
  if (!(a.shape() == b.shape())) throw std::invalid_argument("metrics: volume shapes differ");
}

// Summed-area table with a zero first row and column.
void integral(const float* src, int nx, int ny, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(nx + 1) * (ny + 1), 0.0);
  for (int j = 0; j < ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < nx; ++i) {
      row += src[static_cast<std::size_t>(j) * nx + i];
      out[static_cast<std::size_t>(j + 1) * (nx + 1) + i + 1] =
          out[static_cast<std::size_t>(j) * (nx + 1) + i + 1] + row;
    }
  }
}

}  // namespace

double nrmse(const Volume& est, const Volume& ref) {
  check_same_shape(est, ref);
  double err = 0.0;
  double norm = 0.0;
  const auto e = est.data();
  const auto r = ref.data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = static_cast<double>(e[i]) - r[i];
    err += d * d;
    norm += static_cast<double>(r[i]) * r[i];
  }
  if (norm == 0.0) throw std::invalid_argument("nrmse: reference is identically zero");
  return std::sqrt(err / norm);
}

double ssim(const Volume& est, const Volume& ref, const SsimParams& params) {
  check_same_shape(est, ref);
  const int w = params.window;
  if (w < 3 || w % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 3");
  const auto& s = ref.shape();
  if (s.nx < w || s.ny < w) throw std::invalid_argument("ssim: slice smaller than window");
  const auto [lo, hi] = std::minmax_element(ref.data().begin(), ref.data().end());
  const double range = static_cast<double>(*hi) - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("ssim: reference has zero dynamic range");
  const double c1 = (params.k1 * range) * (params.k1 * range);
  const double c2 = (params.k2 * range) * (params.k2 * range);
  const double inv_n = 1.0 / (static_cast<double>(w) * w);
  const int out_x = s.nx - w + 1;
  const int out_y = s.ny - w + 1;

  std::vector<double> slice_mean(s.nz, 0.0);
#pragma omp parallel
  {
    std::vector<double> sx, sy, sxx, syy, sxy;
    std::vector<float> xx(s.slice_size()), yy(s.slice_size()), xy(s.slice_size());
#pragma omp for schedule(static)
    for (int k = 0; k < s.nz; ++k) {
      const float* x = est.slice(k).data();
      const float* y = ref.slice(k).data();
      for (std::size_t i = 0; i < s.slice_size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      integral(x, s.nx, s.ny, sx);
      integral(y, s.nx, s.ny, sy);
      integral(xx.data(), s.nx, s.ny, sxx);
      integral(yy.data(), s.nx, s.ny, syy);
      integral(xy.data(), s.nx, s.ny, sxy);
      const int stride = s.nx + 1;
      const auto box = [&](const std::vector<double>& t, int i, int j) {
        return t[static_cast<std::size_t>(j + w) * stride + i + w] -
               t[static_cast<std::size_t>(j) * stride + i + w] -
               t[static_cast<std::size_t>(j + w) * stride + i] +
               t[static_cast<std::size_t>(j) * stride + i];
      };
      double acc = 0.0;
      for (int j = 0; j < out_y; ++j) {
        for (int i = 0; i < out_x; ++i) {
          const double mx = box(sx, i, j) * inv_n;
          const double my = box(sy, i, j) * inv_n;
          const double vx = std::max(0.0, box(sxx, i, j) * inv_n - mx * mx);
          const double vy = std::max(0.0, box(syy, i, j) * inv_n - my * my);
          const double cxy = box(sxy, i, j) * inv_n - mx * my;
          acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
      }
      slice_mean[k] = acc / (static_cast<double>(out_x) * out_y);
    }
  }
  double total = 0.0;
  for (const double v : slice_mean) total += v;
  return total / s.nz;
}

}  // namespace viewsel
