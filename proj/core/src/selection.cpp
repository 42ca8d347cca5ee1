#include "viewsel/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace viewsel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_checkpoint(const SelectionConfig& config, int n) {
  return std::find(config.checkpoints.begin(), config.checkpoints.end(), n) !=
         config.checkpoints.end();
}

QualityReport checkpoint(MeasurementSource& source, std::span<const std::size_t> views,
                         const SelectionConfig& config) {
  if (!config.on_checkpoint) {
    return evaluate_views(source, views, config.checkpoint_recon, config.ssim);
  }
  Volume recon;
  const auto report = evaluate_views(source, views, config.checkpoint_recon, config.ssim, &recon);
  config.on_checkpoint(static_cast<int>(views.size()), recon);
  return report;
}

void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("selection." + field + ": " + why);
}

/// In-loop reconstruction from the views selected so far.
class LoopReconstructor {
 public:
  LoopReconstructor(MeasurementSource& source, const SelectionConfig& config)
      : source_(source), config_(config) {}

  const Volume& update(std::span<const std::size_t> selected) {
    const auto projs = source_.gather(selected);
    const bool warm = config_.warm_start && current_.size() > 0;
    current_ = reconstruct_sirt(projs, source_.geometry(), config_.loop_recon,
                                warm ? &current_ : nullptr);
    return current_;
  }

 private:
  MeasurementSource& source_;
  const SelectionConfig& config_;
  Volume current_;
};

}  // namespace

MeasurementSource::MeasurementSource(const Volume& truth, const ConeBeamGeometry& geom,
                                     const AngleGrid& grid, SpectrumModel spectrum,
                                     std::vector<double> linearization, std::uint64_t seed)
    : truth_(truth),
      geom_(geom),
      grid_(grid),
      spectrum_(std::move(spectrum)),
      linearization_(std::move(linearization)),
      seed_(seed),
      cache_(grid.size()) {
  check_volume_matches(truth, geom);
  spectrum_.validate();
}

Projection MeasurementSource::simulate(std::size_t grid_index) const {
  const Projection raw =
      simulate_measurement(truth_, geom_, grid_[grid_index], spectrum_, seed_);
  return linearization_.empty() ? raw : linearize(raw, linearization_);
}

const Projection& MeasurementSource::get(std::size_t grid_index) {
  auto& slot = cache_.at(grid_index);
  if (!slot) slot = simulate(grid_index);
  return *slot;
}

void MeasurementSource::prefetch(std::span<const std::size_t> grid_indices) {
  std::vector<std::size_t> missing;
  for (const auto i : grid_indices) {
    if (!cache_.at(i)) missing.push_back(i);
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  std::vector<Projection> fresh(missing.size());
  const long n = static_cast<long>(missing.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) fresh[k] = simulate(missing[k]);
  for (std::size_t k = 0; k < missing.size(); ++k) cache_[missing[k]] = std::move(fresh[k]);
}

std::vector<Projection> MeasurementSource::gather(std::span<const std::size_t> grid_indices) {
  prefetch(grid_indices);
  std::vector<Projection> out;
  out.reserve(grid_indices.size());
  for (const auto i : grid_indices) out.push_back(get(i));
  return out;
}

QualityReport evaluate_views(MeasurementSource& source, std::span<const std::size_t> grid_indices,
                             const SirtParams& recon, const SsimParams& ssim_params,
                             Volume* recon_out) {
  const auto projs = source.gather(grid_indices);
  Volume x = reconstruct_sirt(projs, source.geometry(), recon);
  const QualityReport report{nrmse(x, source.truth()), ssim(x, source.truth(), ssim_params)};
  if (recon_out) *recon_out = std::move(x);
  return report;
}

void SelectionConfig::validate(std::size_t grid_size) const {
  if (n_init < 1) fail("n_init", "must be at least 1");
  if (budget < n_init) fail("budget", "must be at least n_init");
  if (static_cast<std::size_t>(budget) > grid_size) {
    fail("budget", "exceeds the number of candidate angles (" + std::to_string(grid_size) + ")");
  }
  if (!(softmax.beta >= 0.0) || !std::isfinite(softmax.beta)) {
    fail("beta", "must be finite and non-negative");
  }
  if (!(gamma_scale > 0.0)) fail("gamma_scale", "must be positive");
  if (!(epsilon_scale > 0.0)) fail("epsilon_scale", "must be positive");
  if (!(eavs_band_width > 0.0)) fail("eavs_band_width", "must be positive");
  if (!(eavs_gamma_scale > 0.0)) fail("eavs_gamma_scale", "must be positive");
  if (loop_recon.iterations < 1) fail("loop_iterations", "must be at least 1");
  if (checkpoint_recon.iterations < 1) fail("checkpoint_iterations", "must be at least 1");
  for (const int c : checkpoints) {
    if (c < 1 || c > budget) fail("checkpoints", "entries must lie in [1, budget]");
  }
}

std::vector<std::size_t> SelectionTrace::selected() const {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.grid_index);
  return out;
}

std::optional<double> SelectionTrace::mean_select_seconds() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (!r.recon_driven || !r.select_seconds) continue;
    sum += *r.select_seconds;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

const TraceRecord* SelectionTrace::at_step(int step) const {
  for (const auto& r : records) {
    if (r.step == step) return &r;
  }
  return nullptr;
}

CadModel prepare_cad_model(const Volume& cad, const ConeBeamGeometry& geom, const AngleGrid& grid,
                           const CannyParams& canny, const SoftmaxParams& softmax,
                           std::shared_ptr<const DistanceMatrix> dmat) {
  if (!dmat || dmat->size() != grid.size()) {
    throw std::invalid_argument("cad model: distance matrix does not match the angle grid");
  }
  CadModel model;
  model.cad = &cad;
  model.edges = canny_edges(cad, canny);
  model.edge_volume = model.edges.to_volume();
  model.dmat = std::move(dmat);
  std::vector<std::size_t> all(grid.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  model.alignment = edge_alignment_scores(model.edge_volume, geom, grid, all, softmax);
  model.alignment_scale = alignment_scale(model.alignment);
  return model;
}

std::size_t argmax_candidate(std::span<const std::size_t> candidates,
                             std::span<const ScoreBreakdown> scores) {
  if (candidates.empty()) throw std::invalid_argument("selection: no candidate views left");
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    // Candidates arrive in increasing angle order; strict > keeps the smallest on ties.
    if (scores[k].total > scores[best].total) best = k;
  }
  return candidates[best];
}

std::size_t select_next_view(const SelectionState& state, const EdgeVolume& edge_cad,
                             const EdgeVolume& edge_recon, const ConeBeamGeometry& geom,
                             const ObjectiveParams& params) {
  const auto candidates = state.candidates();
  if (candidates.empty()) throw std::invalid_argument("selection: no candidate views left");
  if (!state.dmat) throw std::invalid_argument("selection: state has no distance matrix");
  const auto cad_scores =
      edge_alignment_scores(edge_cad.to_volume(), geom, state.grid, candidates, params.softmax);
  const auto recon_scores =
      edge_alignment_scores(edge_recon.to_volume(), geom, state.grid, candidates, params.softmax);
  std::vector<ScoreBreakdown> scores(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double d =
        dispersion_score(candidates[k], state.selected, *state.dmat, params.dispersion);
    scores[k] = combine_scores(cad_scores[k] / params.alignment_scale,
                               recon_scores[k] / params.alignment_scale, d, params.lambda);
  }
  return argmax_candidate(candidates, scores);
}

SelectionTrace run_epvs(MeasurementSource& source, const CadModel& cad,
                        const SelectionConfig& config) {
  const auto& grid = source.grid();
  const auto& geom = source.geometry();
  config.validate(grid.size());
  if (!cad.dmat || cad.dmat->size() != grid.size() || cad.alignment.size() != grid.size()) {
    throw std::invalid_argument("epvs: CAD model does not match the angle grid");
  }
  const DispersionParams dispersion =
      auto_dispersion_params(*cad.dmat, config.gamma_scale, config.epsilon_scale);

  SelectionTrace trace;
  trace.policy = "epvs";
  SelectionState state;
  state.grid = grid;
  state.dmat = cad.dmat;

  const auto acquire = [&](std::size_t index, const ScoreBreakdown& best,
                           std::optional<double> seconds, bool recon_driven) {
    state.selected.push_back(index);
    state.step = static_cast<int>(state.selected.size());
    TraceRecord rec;
    rec.step = state.step;
    rec.grid_index = index;
    rec.angle = grid[index];
    rec.scores = best;
    rec.select_seconds = config.record_timing ? seconds : std::nullopt;
    rec.recon_driven = recon_driven;
    if (is_checkpoint(config, state.step)) {
      rec.quality = checkpoint(source, state.selected, config);
    }
    trace.records.push_back(rec);
  };

  // Initialization: CAD alignment plus dispersion, lambda = 1.
  for (int n = 1; n <= config.n_init; ++n) {
    const auto start = Clock::now();
    const auto candidates = state.candidates();
    std::vector<ScoreBreakdown> scores(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const std::size_t c = candidates[k];
      scores[k] = combine_scores(cad.alignment[c] / cad.alignment_scale, 0.0,
                                 dispersion_score(c, state.selected, *cad.dmat, dispersion), 1.0);
    }
    const std::size_t pick = argmax_candidate(candidates, scores);
    const auto pos = std::find(candidates.begin(), candidates.end(), pick) - candidates.begin();
    acquire(pick, scores[pos], seconds_since(start), false);
  }

  LoopReconstructor recon(source, config);
  for (int n = config.n_init + 1; n <= config.budget; ++n) {
    const Volume* edge_source = nullptr;
    if (!config.cad_only) {
      state.recon = recon.update(state.selected);
      edge_source = &state.recon;
    }

    const auto start = Clock::now();
    const Volume edge_recon_volume =
        edge_source != nullptr ? canny_edges(*edge_source, config.canny).to_volume()
                               : cad.edge_volume;
    const auto candidates = state.candidates();
    const auto recon_scores =
        edge_alignment_scores(edge_recon_volume, geom, grid, candidates, config.softmax);
    const double lambda = lambda_schedule(n, config.n_init, config.budget);
    std::vector<ScoreBreakdown> scores(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const std::size_t c = candidates[k];
      scores[k] = combine_scores(cad.alignment[c] / cad.alignment_scale,
                                 recon_scores[k] / cad.alignment_scale,
                                 dispersion_score(c, state.selected, *cad.dmat, dispersion),
                                 lambda);
    }
    const std::size_t pick = argmax_candidate(candidates, scores);
    const double elapsed = seconds_since(start);
    const auto pos = std::find(candidates.begin(), candidates.end(), pick) - candidates.begin();
    acquire(pick, scores[pos], elapsed, true);
  }
  return trace;
}

std::vector<std::size_t> uniform_indices(int count, std::size_t grid_size) {
  if (count < 1 || static_cast<std::size_t>(count) > grid_size) {
    throw std::invalid_argument("uniform_indices: count must lie in [1, grid size]");
  }
  std::vector<std::size_t> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double pos = static_cast<double>(k) * grid_size / count;
    out[k] = static_cast<std::size_t>(std::llround(pos)) % grid_size;
  }
  return out;
}

SelectionTrace run_uniform(MeasurementSource& source, const SelectionConfig& config) {
  const auto& grid = source.grid();
  config.validate(grid.size());
  SelectionTrace trace;
  trace.policy = "uniform";
  const auto picks = uniform_indices(config.budget, grid.size());
  for (int n = 1; n <= config.budget; ++n) {
    TraceRecord rec;
    rec.step = n;
    rec.grid_index = picks[n - 1];
    rec.angle = grid[rec.grid_index];
    rec.recon_driven = false;
    if (is_checkpoint(config, n)) {
      const auto views = uniform_indices(n, grid.size());
      rec.quality = checkpoint(source, views, config);
    }
    trace.records.push_back(rec);
  }
  return trace;
}

double wrap180(double delta_deg) {
  double r = std::fmod(std::abs(delta_deg), 180.0);
  return std::min(r, 180.0 - r);
}

double mask_alignment(std::span<const std::uint8_t> edge_slice, int nx, int ny, double angle_deg,
                      double band_width) {
  if (edge_slice.size() != static_cast<std::size_t>(nx) * ny) {
    throw std::invalid_argument("mask_alignment: slice size does not match dimensions");
  }
  if (!(band_width > 0.0)) throw std::invalid_argument("mask_alignment: band width must be > 0");
  const double phi = -angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const double cx = 0.5 * (nx - 1);
  const double cy = 0.5 * (ny - 1);
  const double reach = std::hypot(cx, cy) + 1.0;
  const int n_bands = static_cast<int>(std::ceil(2.0 * reach / band_width)) + 1;
  std::vector<int> overlap(static_cast<std::size_t>(n_bands), 0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!edge_slice[static_cast<std::size_t>(j) * nx + i]) continue;
      // Offset across the view direction (cos, sin).
      const double across = -(i - cx) * s + (j - cy) * c;
      const int band = static_cast<int>(std::floor((across + reach) / band_width));
      ++overlap[std::clamp(band, 0, n_bands - 1)];
    }
  }
  return *std::max_element(overlap.begin(), overlap.end());
}

SelectionTrace run_eavs(MeasurementSource& source, const SelectionConfig& config) {
  const auto& grid = source.grid();
  const auto& geom = source.geometry();
  config.validate(grid.size());

  std::vector<double> wrapped(grid.size() * grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      wrapped[i * grid.size() + j] = wrapped[j * grid.size() + i] = wrap180(grid[i] - grid[j]);
    }
  }
  const DistanceMatrix angular(grid.size(), std::move(wrapped));
  const double median = angular.median_offdiagonal();
  const double max_dist = angular.max();
  const double gamma = median > 0.0 ? config.eavs_gamma_scale * median : config.eavs_gamma_scale;
  const double epsilon = max_dist > 0.0 ? config.epsilon_scale * max_dist : config.epsilon_scale;

  SelectionTrace trace;
  trace.policy = "eavs";
  std::vector<std::size_t> selected;

  const auto acquire = [&](std::size_t index, std::optional<ScoreBreakdown> best,
                           std::optional<double> seconds, bool recon_driven) {
    selected.push_back(index);
    TraceRecord rec;
    rec.step = static_cast<int>(selected.size());
    rec.grid_index = index;
    rec.angle = grid[index];
    rec.scores = best;
    rec.select_seconds = config.record_timing ? seconds : std::nullopt;
    rec.recon_driven = recon_driven;
    if (is_checkpoint(config, rec.step)) {
      rec.quality = checkpoint(source, selected, config);
    }
    trace.records.push_back(rec);
  };

  for (const auto index : uniform_indices(config.n_init, grid.size())) {
    acquire(index, std::nullopt, std::nullopt, false);
  }

  const auto& shape = geom.vol_shape();
  const int center_slice = shape.nz / 2;
  LoopReconstructor recon(source, config);
  for (int n = config.n_init + 1; n <= config.budget; ++n) {
    const Volume& current = recon.update(selected);

    const auto start = Clock::now();
    const auto edges = canny_slice(current.slice(center_slice), shape.nx, shape.ny, config.canny);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::find(selected.begin(), selected.end(), i) == selected.end()) {
        candidates.push_back(i);
      }
    }
    std::vector<double> align(candidates.size());
    double peak = 0.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      align[k] = mask_alignment(edges, shape.nx, shape.ny, grid[candidates[k]],
                                config.eavs_band_width);
      peak = std::max(peak, align[k]);
    }
    std::vector<ScoreBreakdown> scores(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      double sum = 0.0;
      for (const auto j : selected) {
        sum += 1.0 / std::max(wrap180(grid[candidates[k]] - grid[j]), epsilon);
      }
      const double a = peak > 0.0 ? align[k] / peak : 0.0;
      scores[k] = combine_scores(0.0, a, std::exp(-gamma * sum), 0.0);
    }
    const std::size_t pick = argmax_candidate(candidates, scores);
    const double elapsed = seconds_since(start);
    const auto pos = std::find(candidates.begin(), candidates.end(), pick) - candidates.begin();
    acquire(pick, scores[pos], elapsed, true);
  }
  return trace;
}

}  // namespace viewsel
