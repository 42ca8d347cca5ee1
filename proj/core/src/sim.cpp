#include "viewsel/sim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "viewsel/projector.hpp"

namespace viewsel {

namespace {

constexpr int kPoreAttempts = 2000;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool inside(const Solid& s, const std::array<double, 3>& p) {
  const double yaw = s.yaw_deg * std::numbers::pi / 180.0;
  const double c = std::cos(yaw);
  const double sn = std::sin(yaw);
  const double dx = p[0] - s.center[0];
  const double dy = p[1] - s.center[1];
  const double q[3] = {c * dx + sn * dy, -sn * dx + c * dy, p[2] - s.center[2]};
  switch (s.kind) {
    case SolidKind::kBox:
      return std::abs(q[0]) <= s.size[0] && std::abs(q[1]) <= s.size[1] &&
             std::abs(q[2]) <= s.size[2];
    case SolidKind::kSphere:
      return q[0] * q[0] + q[1] * q[1] + q[2] * q[2] <= s.size[0] * s.size[0];
    case SolidKind::kCylinder: {
      const int a = s.axis == 'x' ? 0 : (s.axis == 'y' ? 1 : 2);
      double r2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (k != a) r2 += q[k] * q[k];
      }
      return r2 <= s.size[0] * s.size[0] && std::abs(q[a]) <= s.size[2];
    }
  }
  return false;
}

std::array<double, 3> center_mm(const Shape3& s, double h, int i, int j, int k) {
  return {(i - 0.5 * (s.nx - 1)) * h, (j - 0.5 * (s.ny - 1)) * h, (k - 0.5 * (s.nz - 1)) * h};
}

}  // namespace

PhantomSpec default_phantom_spec(Shape3 shape, double voxel_pitch, std::uint64_t seed) {
  const double r = 0.5 * std::min(shape.nx, shape.ny) * voxel_pitch;
  const double hz = 0.5 * shape.nz * voxel_pitch;
  const double yaw = 25.0;
  const double yaw_rad = yaw * std::numbers::pi / 180.0;
  // Part-local offsets rotated into the volume frame.
  const auto at = [&](double lx, double ly, double z) {
    return std::array<double, 3>{std::cos(yaw_rad) * lx - std::sin(yaw_rad) * ly,
                                 std::sin(yaw_rad) * lx + std::cos(yaw_rad) * ly, z};
  };
  constexpr double mu = 0.02;

  PhantomSpec spec;
  spec.shape = shape;
  spec.voxel_pitch = voxel_pitch;
  // Base plate and upright of the bracket.
  spec.solids.push_back({SolidKind::kBox, at(0.0, -0.10 * r, 0.0),
                         {0.62 * r, 0.22 * r, 0.60 * hz}, 'z', yaw, mu});
  spec.solids.push_back({SolidKind::kBox, at(0.40 * r, 0.22 * r, 0.0),
                         {0.22 * r, 0.20 * r, 0.60 * hz}, 'z', yaw, mu});
  // Through holes along z in the plate, a cross hole in the upright.
  spec.solids.push_back({SolidKind::kCylinder, at(-0.32 * r, -0.10 * r, 0.0),
                         {0.09 * r, 0.0, hz}, 'z', yaw, 0.0});
  spec.solids.push_back({SolidKind::kCylinder, at(0.05 * r, -0.10 * r, 0.0),
                         {0.06 * r, 0.0, hz}, 'z', yaw, 0.0});
  spec.solids.push_back({SolidKind::kCylinder, at(0.40 * r, 0.22 * r, 0.25 * hz),
                         {0.08 * r, 0.0, 0.30 * r}, 'x', yaw, 0.0});
  spec.pores = {20, 1.0, 3.0, seed};
  return spec;
}

Phantom make_phantom(const PhantomSpec& spec) {
  const auto& s = spec.shape;
  const double h = spec.voxel_pitch;
  if (spec.pores.count < 0) throw std::invalid_argument("phantom: pore count must be >= 0");
  if (spec.pores.count > 0 &&
      !(spec.pores.radius_min > 0.0 && spec.pores.radius_min <= spec.pores.radius_max)) {
    throw std::invalid_argument("phantom: pore radii must satisfy 0 < min <= max");
  }
  for (const auto& solid : spec.solids) {
    if (!(solid.value >= 0.0) || !std::isfinite(solid.value)) {
      throw std::invalid_argument("phantom: solid attenuation must be finite and >= 0");
    }
  }

  Volume cad(s, h);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < s.nz; ++k) {
    for (int j = 0; j < s.ny; ++j) {
      for (int i = 0; i < s.nx; ++i) {
        const auto p = center_mm(s, h, i, j, k);
        float v = 0.0f;
        for (const auto& solid : spec.solids) {
          if (inside(solid, p)) v = static_cast<float>(solid.value);
        }
        cad(i, j, k) = v;
      }
    }
  }

  Volume truth = cad;
  std::vector<std::uint8_t> pore(s.size(), 0);
  std::mt19937_64 rng(spec.pores.seed);
  std::uniform_int_distribution<int> pick_x(0, s.nx - 1);
  std::uniform_int_distribution<int> pick_y(0, s.ny - 1);
  std::uniform_int_distribution<int> pick_z(0, s.nz - 1);
  std::uniform_real_distribution<double> pick_r(spec.pores.radius_min, spec.pores.radius_max);

  for (int placed = 0; placed < spec.pores.count; ++placed) {
    bool ok = false;
    for (int attempt = 0; attempt < kPoreAttempts && !ok; ++attempt) {
      const int ci = pick_x(rng);
      const int cj = pick_y(rng);
      const int ck = pick_z(rng);
      const double radius = pick_r(rng);
      const double guard = radius + 1.0;
      const int reach = static_cast<int>(std::ceil(guard));
      if (ci - reach < 0 || cj - reach < 0 || ck - reach < 0 || ci + reach >= s.nx ||
          cj + reach >= s.ny || ck + reach >= s.nz) {
        continue;
      }
      ok = true;
      for (int dk = -reach; dk <= reach && ok; ++dk) {
        for (int dj = -reach; dj <= reach && ok; ++dj) {
          for (int di = -reach; di <= reach && ok; ++di) {
            if (di * di + dj * dj + dk * dk > guard * guard) continue;
            const std::size_t idx = cad.index(ci + di, cj + dj, ck + dk);
            if (!(cad.data()[idx] > 0.0f) || pore[idx]) ok = false;
          }
        }
      }
      if (!ok) continue;
      const int r_in = static_cast<int>(std::ceil(radius));
      for (int dk = -r_in; dk <= r_in; ++dk) {
        for (int dj = -r_in; dj <= r_in; ++dj) {
          for (int di = -r_in; di <= r_in; ++di) {
            if (di * di + dj * dj + dk * dk > radius * radius) continue;
            const std::size_t idx = cad.index(ci + di, cj + dj, ck + dk);
            truth.data()[idx] = 0.0f;
            pore[idx] = 1;
          }
        }
      }
    }
    if (!ok) {
      throw std::runtime_error("phantom: could not place pore " + std::to_string(placed + 1) +
                               " of " + std::to_string(spec.pores.count) +
                               "; the part is too small for the requested pores");
    }
  }
  return {std::move(cad), std::move(truth)};
}

void SpectrumModel::validate() const {
  if (weights.empty() || weights.size() != scales.size()) {
    throw std::invalid_argument("spectrum: weights and scales must be non-empty and equal length");
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    if (!(weights[b] > 0.0) || !std::isfinite(weights[b])) {
      throw std::invalid_argument("spectrum: weights must be positive");
    }
    if (!(scales[b] > 0.0) || !std::isfinite(scales[b])) {
      throw std::invalid_argument("spectrum: scales must be positive");
    }
    sum += weights[b];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("spectrum: weights must sum to 1");
  if (!(noise_relative >= 0.0) || !std::isfinite(noise_relative)) {
    throw std::invalid_argument("spectrum: noise_relative must be finite and >= 0");
  }
}

double SpectrumModel::response(double l) const {
  if (weights.size() == 1) return scales[0] * l;
  // log-sum-exp over bins
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < weights.size(); ++b) {
    peak = std::max(peak, std::log(weights[b]) - scales[b] * l);
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    sum += std::exp(std::log(weights[b]) - scales[b] * l - peak);
  }
  return -(peak + std::log(sum));
}

SpectrumModel default_spectrum() {
  SpectrumModel m;
  m.weights = {0.6, 0.4};
  m.scales = {1.0, 0.6};
  m.noise_relative = 0.005;
  return m;
}

Projection simulate_measurement(const Volume& truth, const ConeBeamGeometry& geom,
                                double angle_deg, const SpectrumModel& spectrum,
                                std::uint64_t seed) {
  spectrum.validate();
  Projection proj = forward_project(truth, geom, angle_deg);
  auto data = proj.data();
  float peak = 0.0f;
  for (float& v : data) {
    v = static_cast<float>(spectrum.response(v));
    peak = std::max(peak, v);
  }
  const double sigma = spectrum.noise_relative * peak;
  if (sigma > 0.0) {
    const auto angle_bits = std::bit_cast<std::uint64_t>(angle_deg);
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(angle_bits)));
    std::normal_distribution<double> noise(0.0, sigma);
    for (float& v : data) v = static_cast<float>(v + noise(rng));
  }
  return proj;
}

double eval_polynomial(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

namespace {

double eval_derivative(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * x + k * coeffs[k];
  return acc;
}

bool increasing_on(std::span<const double> coeffs, double lo, double hi) {
  constexpr int kProbes = 256;
  for (int i = 0; i <= kProbes; ++i) {
    const double x = lo + (hi - lo) * i / kProbes;
    if (!(eval_derivative(coeffs, x) > 0.0)) return false;
  }
  return true;
}

}  // namespace

std::vector<double> calibrate_linearization(const SpectrumModel& spectrum, double max_path,
                                            int degree) {
  spectrum.validate();
  if (!(max_path > 0.0) || !std::isfinite(max_path)) {
    throw std::invalid_argument("linearization: max_path must be positive");
  }
  if (degree < 1) throw std::invalid_argument("linearization: degree must be >= 1");

  constexpr int kSamples = 512;
  const double p_max = spectrum.response(max_path);
  Eigen::MatrixXd design(kSamples, degree);
  Eigen::VectorXd target(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    const double l = max_path * i / (kSamples - 1);
    const double t = spectrum.response(l) / p_max;  // scaled for conditioning
    double power = 1.0;
    for (int k = 0; k < degree; ++k) {
      power *= t;
      design(i, k) = power;
    }
    target(i) = l;
  }
  const Eigen::VectorXd a = design.colPivHouseholderQr().solve(target);
  std::vector<double> coeffs(degree + 1, 0.0);
  double scale = 1.0;
  for (int k = 0; k < degree; ++k) {
    scale *= p_max;
    coeffs[k + 1] = a(k) / scale;
  }
  for (const double c : coeffs) {
    if (!std::isfinite(c)) throw std::runtime_error("linearization: degenerate fit");
  }
  if (!increasing_on(coeffs, 0.0, p_max)) {
    throw std::runtime_error("linearization: fitted map is not monotone over the calibrated range");
  }
  return coeffs;
}

Projection linearize(const Projection& proj, std::span<const double> coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("linearization: empty coefficient list");
  const auto data = proj.data();
  if (!data.empty()) {
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    if (!increasing_on(coeffs, *lo, *hi)) {
      throw std::runtime_error("linearization: calibration is not monotone over the data range");
    }
  }
  Projection out = proj;
  for (float& v : out.data()) v = static_cast<float>(eval_polynomial(coeffs, v));
  return out;
}

}  // namespace viewsel
