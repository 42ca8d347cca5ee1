#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "viewsel/edges.hpp"
#include "viewsel/geometry.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

struct SoftmaxParams {
  double beta = 1.0;  // sharpness, >= 0
};

struct DispersionParams {
  double gamma = 1.0;      // decay rate, > 0
  double epsilon_d = 1e-12;  // floor applied to distances before inversion
};

/// Symmetric matrix of backprojection distances between candidate views,
/// indexed by AngleGrid position.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  /// Takes a row-major n*n array; throws std::invalid_argument unless it is
  /// square, symmetric, finite, non-negative and zero on the diagonal.
  DistanceMatrix(std::size_t n, std::vector<double> values);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] double max() const;
  [[nodiscard]] double median_offdiagonal() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// Softmax over the flattened detector: w_s = exp(beta y_s) / sum_k exp(beta y_k),
/// evaluated with max subtraction.
std::vector<double> softmax_weights(std::span<const float> y, const SoftmaxParams& params);
std::vector<double> softmax_weights(const Projection& y, const SoftmaxParams& params);

/// sum_s w_s y_s with the softmax weights above, without materializing them.
double softmax_weighted_mean(std::span<const float> y, const SoftmaxParams& params);

/// Edge alignment I(angle): softmax-weighted mean of the forward projection of
/// the binary edge volume. Large when many rays run along edges.
double edge_alignment_score(const EdgeVolume& edges, const ConeBeamGeometry& geom,
                            double angle_deg, const SoftmaxParams& params);

/// Edge alignment at each listed grid index; entry k belongs to indices[k].
std::vector<double> edge_alignment_scores(const Volume& edge_volume, const ConeBeamGeometry& geom,
                                          const AngleGrid& grid,
                                          std::span<const std::size_t> indices,
                                          const SoftmaxParams& params);

/// Mean absolute voxel difference between the unfiltered backprojections of
/// the CAD projections at the two angles.
double pairwise_view_distance(const Volume& cad, const ConeBeamGeometry& geom, double theta_i,
                              double theta_j);

struct DistanceBuildStats {
  std::size_t backprojections = 0;
};

/// Every pairwise distance over `grid`. Backprojections are cached in memory
/// up to `memory_budget_bytes`; beyond that, tiles are recomputed.
DistanceMatrix build_distance_matrix(const Volume& cad, const ConeBeamGeometry& geom,
                                     const AngleGrid& grid,
                                     std::size_t memory_budget_bytes = std::size_t{1} << 30,
                                     DistanceBuildStats* stats = nullptr);

/// Dispersion D = exp(-gamma * sum_j 1 / max(d(theta, theta_j), epsilon_d)).
/// Throws std::invalid_argument if theta_index is already selected.
double dispersion_score(std::size_t theta_index, std::span<const std::size_t> selected,
                        const DistanceMatrix& dmat, const DispersionParams& params);

/// gamma = gamma_scale * median off-diagonal distance,
/// epsilon_d = epsilon_scale * max distance.
DispersionParams auto_dispersion_params(const DistanceMatrix& dmat, double gamma_scale = 0.1,
                                        double epsilon_scale = 1e-12);

/// Linear decay from 1 at n_init to 0 at n_budget, clamped to [0, 1].
/// Throws std::invalid_argument unless n_budget > n_init.
double lambda_schedule(int n, int n_init, int n_budget);

struct ScoreBreakdown {
  double i_cad = 0.0;
  double i_recon = 0.0;
  double dispersion = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

/// total = lambda * i_cad + (1 - lambda) * i_recon + dispersion.
ScoreBreakdown combine_scores(double i_cad, double i_recon, double dispersion, double lambda);

/// Selected views so far plus everything the objective needs to score the rest.
struct SelectionState {
  AngleGrid grid{std::vector<double>{}};
  std::vector<std::size_t> selected;  // in acquisition order
  std::shared_ptr<const DistanceMatrix> dmat;
  Volume recon;  // reconstruction from the selected views
  int step = 0;  // number of views acquired

  [[nodiscard]] bool is_selected(std::size_t index) const;
  /// Grid indices not yet selected, in increasing angle order.
  [[nodiscard]] std::vector<std::size_t> candidates() const;
};

struct ObjectiveParams {
  SoftmaxParams softmax;
  DispersionParams dispersion;
  double lambda = 1.0;
  /// Both alignment terms are divided by this so they are commensurate with
  /// the dispersion term (see alignment_scale()).
  double alignment_scale = 1.0;
};

/// Largest CAD edge alignment over the whole grid; 1 when every score is 0.
double alignment_scale(std::span<const double> cad_scores);

/// Full objective for one candidate. Throws std::invalid_argument if the
/// candidate was already selected.
ScoreBreakdown objective(std::size_t theta_index, const SelectionState& state,
                         const EdgeVolume& edge_cad, const EdgeVolume& edge_recon,
                         const ConeBeamGeometry& geom, const ObjectiveParams& params);

}  // namespace viewsel
