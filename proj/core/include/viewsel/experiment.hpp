#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "viewsel/config.hpp"
#include "viewsel/geometry.hpp"
#include "viewsel/scoring.hpp"
#include "viewsel/selection.hpp"
#include "viewsel/sim.hpp"

namespace viewsel {

/// Everything the policies share: scanner, phantom and measurement model.
struct ExperimentSetup {
  ConeBeamGeometry geometry;
  AngleGrid grid;
  Phantom phantom;
  SpectrumModel spectrum;
  std::vector<double> linearization;  // empty when linearization is off
};

PhantomSpec phantom_spec(const ExperimentConfig& config);
ExperimentSetup build_setup(const ExperimentConfig& config);

/// Hex digest of the inputs the distance matrix depends on (geometry, grid,
/// CAD description). Used to validate cached matrices.
std::string distance_fingerprint(const ExperimentConfig& config);

/// Loads the matrix from config.dmat_cache when its fingerprint matches,
/// otherwise builds it (and writes the cache if one is configured).
std::shared_ptr<const DistanceMatrix> obtain_distance_matrix(const ExperimentConfig& config,
                                                             const ExperimentSetup& setup,
                                                             std::ostream* log = nullptr);

MeasurementSource make_source(const ExperimentConfig& config, const ExperimentSetup& setup);

struct ExperimentResult {
  std::vector<SelectionTrace> traces;
  std::optional<QualityReport> dense_reference;
  std::vector<std::filesystem::path> files;
};

/// Runs every configured policy on the same phantom and measurements and
/// writes trace_<policy>.csv and summary.csv into config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace viewsel
