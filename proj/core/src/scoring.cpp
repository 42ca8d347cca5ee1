#include "viewsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "viewsel/projector.hpp"

namespace viewsel {

namespace {

std::vector<float> cad_backprojection(const Volume& cad, const ConeBeamGeometry& geom,
                                      double angle_deg) {
  std::vector<float> proj(geom.det_size());
  forward_project_into(cad.data(), geom, angle_deg, proj);
  std::vector<double> acc(cad.size(), 0.0);
  back_project_add(proj, geom, angle_deg, acc);
  return std::vector<float>(acc.begin(), acc.end());
}

double mean_abs_difference(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(static_cast<double>(a[i]) - b[i]);
  return sum / static_cast<double>(n);
}

}  // namespace

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n * n) throw std::invalid_argument("distance matrix: size must be n*n");
  for (std::size_t i = 0; i < n; ++i) {
    if (values_[i * n + i] != 0.0) {
      throw std::invalid_argument("distance matrix: diagonal must be zero");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values_[i * n + j];
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("distance matrix: entries must be finite and non-negative");
      }
      if (v != values_[j * n + i]) throw std::invalid_argument("distance matrix: not symmetric");
    }
  }
}

double DistanceMatrix::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double DistanceMatrix::median_offdiagonal() const {
  std::vector<double> upper;
  upper.reserve(n_ * (n_ - 1) / 2);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) upper.push_back(values_[i * n_ + j]);
  }
  if (upper.empty()) return 0.0;
  const std::size_t mid = upper.size() / 2;
  std::nth_element(upper.begin(), upper.begin() + mid, upper.end());
  const double hi = upper[mid];
  if (upper.size() % 2 == 1) return hi;
  const double lo = *std::max_element(upper.begin(), upper.begin() + mid);
  return 0.5 * (lo + hi);
}

std::vector<double> softmax_weights(std::span<const float> y, const SoftmaxParams& params) {
  if (!(params.beta >= 0.0) || !std::isfinite(params.beta)) {
    throw std::invalid_argument("softmax: beta must be finite and non-negative");
  }
  std::vector<double> w(y.size());
  if (y.empty()) return w;
  const double peak = params.beta * *std::max_element(y.begin(), y.end());
  double sum = 0.0;
  for (std::size_t s = 0; s < y.size(); ++s) {
    w[s] = std::exp(params.beta * y[s] - peak);
    sum += w[s];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> softmax_weights(const Projection& y, const SoftmaxParams& params) {
  return softmax_weights(y.data(), params);
}

double softmax_weighted_mean(std::span<const float> y, const SoftmaxParams& params) {
  if (!(params.beta >= 0.0) || !std::isfinite(params.beta)) {
    throw std::invalid_argument("softmax: beta must be finite and non-negative");
  }
  if (y.empty()) return 0.0;
  const double peak = params.beta * *std::max_element(y.begin(), y.end());
  double num = 0.0;
  double den = 0.0;
  for (const float v : y) {
    const double e = std::exp(params.beta * v - peak);
    num += e * v;
    den += e;
  }
  return num / den;
}

double edge_alignment_score(const EdgeVolume& edges, const ConeBeamGeometry& geom,
                            double angle_deg, const SoftmaxParams& params) {
  const Volume vol = edges.to_volume();
  const Projection proj = forward_project(vol, geom, angle_deg);
  return softmax_weighted_mean(proj.data(), params);
}

std::vector<double> edge_alignment_scores(const Volume& edge_volume, const ConeBeamGeometry& geom,
                                          const AngleGrid& grid,
                                          std::span<const std::size_t> indices,
                                          const SoftmaxParams& params) {
  check_volume_matches(edge_volume, geom);
  std::vector<double> scores(indices.size(), 0.0);
  const long n = static_cast<long>(indices.size());
#pragma omp parallel
  {
    std::vector<float> proj(geom.det_size());
#pragma omp for schedule(dynamic)
    for (long k = 0; k < n; ++k) {
      forward_project_into(edge_volume.data(), geom, grid[indices[k]], proj);
      scores[k] = softmax_weighted_mean(proj, params);
    }
  }
  return scores;
}

double pairwise_view_distance(const Volume& cad, const ConeBeamGeometry& geom, double theta_i,
                              double theta_j) {
  check_volume_matches(cad, geom);
  if (theta_i == theta_j) return 0.0;
  const auto a = cad_backprojection(cad, geom, theta_i);
  const auto b = cad_backprojection(cad, geom, theta_j);
  return mean_abs_difference(a, b);
}

DistanceMatrix build_distance_matrix(const Volume& cad, const ConeBeamGeometry& geom,
                                     const AngleGrid& grid, std::size_t memory_budget_bytes,
                                     DistanceBuildStats* stats) {
  check_volume_matches(cad, geom);
  const std::size_t n = grid.size();
  const std::size_t bytes_per_bp = cad.size() * sizeof(float);
  const std::size_t capacity = std::max<std::size_t>(1, memory_budget_bytes / bytes_per_bp);
  const std::size_t tile = capacity >= n ? n : std::max<std::size_t>(1, capacity / 2);
  const std::size_t n_tiles = (n + tile - 1) / tile;

  std::vector<double> values(n * n, 0.0);
  std::size_t bp_count = 0;

  const auto compute_tile = [&](std::size_t t) {
    const std::size_t first = t * tile;
    const std::size_t count = std::min(tile, n - first);
    std::vector<std::vector<float>> bps(count);
    const long c = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < c; ++k) bps[k] = cad_backprojection(cad, geom, grid[first + k]);
    bp_count += count;
    return bps;
  };

  const auto fill_pairs = [&](const std::vector<std::vector<float>>& a, std::size_t a_first,
                              const std::vector<std::vector<float>>& b, std::size_t b_first,
                              bool same) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j) pairs.emplace_back(i, j);
    }
    const long np = static_cast<long>(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long p = 0; p < np; ++p) {
      const auto [i, j] = pairs[p];
      const double d = mean_abs_difference(a[i], b[j]);
      values[(a_first + i) * n + (b_first + j)] = d;
      values[(b_first + j) * n + (a_first + i)] = d;
    }
  };

  for (std::size_t ta = 0; ta < n_tiles; ++ta) {
    const auto tile_a = compute_tile(ta);
    fill_pairs(tile_a, ta * tile, tile_a, ta * tile, true);
    for (std::size_t tb = ta + 1; tb < n_tiles; ++tb) {
      const auto tile_b = compute_tile(tb);
      fill_pairs(tile_a, ta * tile, tile_b, tb * tile, false);
    }
  }
  if (stats != nullptr) stats->backprojections = bp_count;
  return DistanceMatrix(n, std::move(values));
}

double dispersion_score(std::size_t theta_index, std::span<const std::size_t> selected,
                        const DistanceMatrix& dmat, const DispersionParams& params) {
  if (!(params.gamma > 0.0) || !(params.epsilon_d > 0.0)) {
    throw std::invalid_argument("dispersion: gamma and epsilon_d must be positive");
  }
  if (theta_index >= dmat.size()) throw std::out_of_range("dispersion: index outside grid");
  double sum = 0.0;
  for (const std::size_t j : selected) {
    if (j == theta_index) {
      throw std::invalid_argument("dispersion: candidate " + std::to_string(theta_index) +
                                  " is already selected");
    }
    sum += 1.0 / std::max(dmat(theta_index, j), params.epsilon_d);
  }
  return std::exp(-params.gamma * sum);
}

DispersionParams auto_dispersion_params(const DistanceMatrix& dmat, double gamma_scale,
                                        double epsilon_scale) {
  DispersionParams p;
  const double median = dmat.median_offdiagonal();
  const double max = dmat.max();
  p.gamma = median > 0.0 ? gamma_scale * median : gamma_scale;
  p.epsilon_d = max > 0.0 ? epsilon_scale * max : epsilon_scale;
  return p;
}

double lambda_schedule(int n, int n_init, int n_budget) {
  if (n_budget <= n_init) {
    throw std::invalid_argument("lambda_schedule: budget must exceed the initialization count");
  }
  const double lambda = static_cast<double>(n_budget - n) / (n_budget - n_init);
  return std::clamp(lambda, 0.0, 1.0);
}

ScoreBreakdown combine_scores(double i_cad, double i_recon, double dispersion, double lambda) {
  ScoreBreakdown b;
  b.i_cad = i_cad;
  b.i_recon = i_recon;
  b.dispersion = dispersion;
  b.lambda = lambda;
  b.total = lambda * i_cad + (1.0 - lambda) * i_recon + dispersion;
  return b;
}

bool SelectionState::is_selected(std::size_t index) const {
  return std::find(selected.begin(), selected.end(), index) != selected.end();
}

std::vector<std::size_t> SelectionState::candidates() const {
  std::vector<bool> taken(grid.size(), false);
  for (const auto s : selected) taken.at(s) = true;
  std::vector<std::size_t> out;
  out.reserve(grid.size() - selected.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

double alignment_scale(std::span<const double> cad_scores) {
  double peak = 0.0;
  for (const double v : cad_scores) peak = std::max(peak, v);
  return peak > 0.0 ? peak : 1.0;
}

ScoreBreakdown objective(std::size_t theta_index, const SelectionState& state,
                         const EdgeVolume& edge_cad, const EdgeVolume& edge_recon,
                         const ConeBeamGeometry& geom, const ObjectiveParams& params) {
  if (theta_index >= state.grid.size()) throw std::out_of_range("objective: index outside grid");
  if (state.is_selected(theta_index)) {
    throw std::invalid_argument("objective: candidate " + std::to_string(theta_index) +
                                " is already selected");
  }
  if (!state.dmat) throw std::invalid_argument("objective: state has no distance matrix");
  const double angle = state.grid[theta_index];
  const double i_cad =
      edge_alignment_score(edge_cad, geom, angle, params.softmax) / params.alignment_scale;
  const double i_recon =
      edge_alignment_score(edge_recon, geom, angle, params.softmax) / params.alignment_scale;
  const double d = dispersion_score(theta_index, state.selected, *state.dmat, params.dispersion);
  return combine_scores(i_cad, i_recon, d, params.lambda);
}

}  // namespace viewsel
