#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viewsel/edges.hpp"
#include "viewsel/geometry.hpp"
#include "viewsel/metrics.hpp"
#include "viewsel/recon.hpp"
#include "viewsel/scoring.hpp"
#include "viewsel/sim.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

/// Simulated scanner: produces the linearized measurement at any grid angle,
/// computing each one once.
class MeasurementSource {
 public:
  MeasurementSource(const Volume& truth, const ConeBeamGeometry& geom, const AngleGrid& grid,
                    SpectrumModel spectrum, std::vector<double> linearization,
                    std::uint64_t seed);

  const Projection& get(std::size_t grid_index);
  std::vector<Projection> gather(std::span<const std::size_t> grid_indices);
  /// Computes every listed measurement not yet cached, in parallel.
  void prefetch(std::span<const std::size_t> grid_indices);

  [[nodiscard]] const ConeBeamGeometry& geometry() const { return geom_; }
  [[nodiscard]] const AngleGrid& grid() const { return grid_; }
  [[nodiscard]] const Volume& truth() const { return truth_; }

 private:
  Projection simulate(std::size_t grid_index) const;

  const Volume& truth_;
  const ConeBeamGeometry& geom_;
  const AngleGrid& grid_;
  SpectrumModel spectrum_;
  std::vector<double> linearization_;
  std::uint64_t seed_;
  std::vector<std::optional<Projection>> cache_;
};

struct QualityReport {
  double nrmse = 0.0;
  double ssim = 0.0;
};

/// Cold-start reconstruction from the listed views, scored against the truth.
QualityReport evaluate_views(MeasurementSource& source, std::span<const std::size_t> grid_indices,
                             const SirtParams& recon, const SsimParams& ssim_params,
                             Volume* recon_out = nullptr);

struct SelectionConfig {
  int n_init = 5;
  int budget = 35;
  SoftmaxParams softmax;
  double gamma_scale = 0.1;      // gamma = gamma_scale * median off-diagonal distance
  double epsilon_scale = 1e-12;  // epsilon_d = epsilon_scale * max distance
  CannyParams canny;
  /// Per-step reconstruction inside the selection loop.
  SirtParams loop_recon{50, 1.0, true};
  bool warm_start = true;
  /// Reconstruction used for quality checkpoints; always cold-started.
  SirtParams checkpoint_recon{50, 1.0, true};
  SsimParams ssim;
  std::vector<int> checkpoints;  // view counts at which NRMSE/SSIM are recorded
  double eavs_band_width = 3.0;  // pixels
  double eavs_gamma_scale = 0.1;
  bool record_timing = true;
  /// Regression hook: score the reconstruction term with the CAD edges so the
  /// EPVS path never looks at measurements.
  bool cad_only = false;
  /// Called with the checkpoint reconstruction whenever quality is recorded.
  std::function<void(int views, const Volume& recon)> on_checkpoint;

  /// Throws std::invalid_argument naming the offending field.
  void validate(std::size_t grid_size) const;
};

struct TraceRecord {
  int step = 0;  // number of views acquired including this one
  std::size_t grid_index = 0;
  double angle = 0.0;
  std::optional<ScoreBreakdown> scores;
  std::optional<QualityReport> quality;
  std::optional<double> select_seconds;
  bool recon_driven = false;
};

struct SelectionTrace {
  std::string policy;
  std::vector<TraceRecord> records;

  [[nodiscard]] std::vector<std::size_t> selected() const;
  /// Mean selection time over recon-driven steps; nullopt when there are none
  /// or timing was not recorded.
  [[nodiscard]] std::optional<double> mean_select_seconds() const;
  [[nodiscard]] const TraceRecord* at_step(int step) const;
};

/// Everything EPVS precomputes from the CAD model once per experiment.
struct CadModel {
  const Volume* cad = nullptr;
  EdgeVolume edges;
  Volume edge_volume;
  std::shared_ptr<const DistanceMatrix> dmat;
  std::vector<double> alignment;  // raw I(theta, x_cad) per grid index
  double alignment_scale = 1.0;
};

CadModel prepare_cad_model(const Volume& cad, const ConeBeamGeometry& geom, const AngleGrid& grid,
                           const CannyParams& canny, const SoftmaxParams& softmax,
                           std::shared_ptr<const DistanceMatrix> dmat);

/// Candidate maximizing the objective; ties go to the smallest angle. Throws
/// std::invalid_argument when no candidate is left.
std::size_t select_next_view(const SelectionState& state, const EdgeVolume& edge_cad,
                             const EdgeVolume& edge_recon, const ConeBeamGeometry& geom,
                             const ObjectiveParams& params);

/// Argmax over precomputed breakdowns; `candidates[k]` owns `scores[k]`.
std::size_t argmax_candidate(std::span<const std::size_t> candidates,
                             std::span<const ScoreBreakdown> scores);

/// Edge projection-based view selection: n_init CAD-only picks (lambda = 1),
/// then reconstruct, detect edges, and pick with the scheduled lambda until
/// the budget is reached.
SelectionTrace run_epvs(MeasurementSource& source, const CadModel& cad,
                        const SelectionConfig& config);

/// `count` grid indices nearest to an even spread over the grid:
/// round(k * grid_size / count) mod grid_size.
std::vector<std::size_t> uniform_indices(int count, std::size_t grid_size);

/// Uniform baseline. The trace lists the budget-sized uniform set; the quality
/// at a checkpoint of n views is that of the n-view uniform set.
SelectionTrace run_uniform(MeasurementSource& source, const SelectionConfig& config);

/// Angular distance where views 180 degrees apart coincide: result in [0, 90].
double wrap180(double delta_deg);

/// Edge-overlap score of the mask baseline: the slice is cut into bands of
/// `band_width` pixels running along the view direction, and the score is the
/// largest number of edge pixels inside one band.
double mask_alignment(std::span<const std::uint8_t> edge_slice, int nx, int ny, double angle_deg,
                      double band_width);

/// Edge alignment-based baseline on the central axial slice: band-mask overlap
/// with the slice's edges plus an angular dispersion term. Starts from
/// uniform views.
SelectionTrace run_eavs(MeasurementSource& source, const SelectionConfig& config);

}  // namespace viewsel
