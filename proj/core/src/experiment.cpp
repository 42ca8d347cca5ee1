#include "viewsel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "viewsel/io.hpp"

namespace viewsel {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void note(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << std::endl;
}

double max_line_integral(const Volume& cad) {
  const auto& s = cad.shape();
  const auto d = cad.data();
  const float peak = d.empty() ? 0.0f : *std::max_element(d.begin(), d.end());
  const double diag = cad.voxel_pitch() * std::sqrt(static_cast<double>(s.nx) * s.nx +
                                                    static_cast<double>(s.ny) * s.ny +
                                                    static_cast<double>(s.nz) * s.nz);
  return peak * diag;
}

}  // namespace

PhantomSpec phantom_spec(const ExperimentConfig& config) {
  const auto& g = config.geometry;
  PhantomSpec spec;
  if (config.default_phantom) {
    spec = default_phantom_spec(g.vol_shape, g.voxel_pitch, config.pores.seed);
  } else {
    spec.shape = g.vol_shape;
    spec.voxel_pitch = g.voxel_pitch;
    spec.solids = config.solids;
  }
  spec.pores = config.pores;
  return spec;
}

ExperimentSetup build_setup(const ExperimentConfig& config) {
  ExperimentSetup setup{ConeBeamGeometry(config.geometry), candidate_angles(config.grid_size),
                        make_phantom(phantom_spec(config)), config.spectrum, {}};
  if (config.linearize) {
    const double max_path = max_line_integral(setup.phantom.cad);
    if (max_path > 0.0) {
      setup.linearization =
          calibrate_linearization(config.spectrum, max_path, config.linearization_degree);
    }
  }
  return setup;
}

std::string distance_fingerprint(const ExperimentConfig& config) {
  const auto& g = config.geometry;
  std::ostringstream key;
  key << "geometry " << format_number(g.source_object_dist) << ' '
      << format_number(g.source_detector_dist) << ' ' << g.det_rows << ' ' << g.det_cols << ' '
      << format_number(g.det_pitch) << ' ' << g.vol_shape.nx << ' ' << g.vol_shape.ny << ' '
      << g.vol_shape.nz << ' ' << format_number(g.voxel_pitch) << "\ngrid " << config.grid_size
      << "\nphantom ";
  if (config.default_phantom) {
    key << "default";
  } else {
    for (const auto& s : config.solids) {
      key << static_cast<int>(s.kind);
      for (const double v : s.center) key << ' ' << format_number(v);
      for (const double v : s.size) key << ' ' << format_number(v);
      key << ' ' << s.axis << ' ' << format_number(s.yaw_deg) << ' ' << format_number(s.value)
          << ';';
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(key.str())));
  return buf;
}

std::shared_ptr<const DistanceMatrix> obtain_distance_matrix(const ExperimentConfig& config,
                                                             const ExperimentSetup& setup,
                                                             std::ostream* log) {
  const std::string tag = "fingerprint " + distance_fingerprint(config);
  if (!config.dmat_cache.empty() && std::filesystem::exists(config.dmat_cache)) {
    try {
      std::string found;
      auto dmat = read_distance_matrix(config.dmat_cache, &found);
      if (found == tag && dmat.size() == setup.grid.size()) {
        note(log, "distance matrix: loaded " + config.dmat_cache.string());
        return std::make_shared<const DistanceMatrix>(std::move(dmat));
      }
      note(log, "distance matrix: cache does not match this setup, rebuilding");
    } catch (const IoError& e) {
      note(log, std::string("distance matrix: ignoring unreadable cache (") + e.what() + ")");
    }
  }
  note(log, "distance matrix: building " + std::to_string(setup.grid.size()) + " x " +
                std::to_string(setup.grid.size()));
  auto dmat = std::make_shared<const DistanceMatrix>(build_distance_matrix(
      setup.phantom.cad, setup.geometry, setup.grid, config.dmat_memory_bytes));
  if (!config.dmat_cache.empty()) {
    if (config.dmat_cache.has_parent_path()) {
      std::filesystem::create_directories(config.dmat_cache.parent_path());
    }
    write_distance_matrix(config.dmat_cache, *dmat, tag);
  }
  return dmat;
}

MeasurementSource make_source(const ExperimentConfig& config, const ExperimentSetup& setup) {
  return MeasurementSource(setup.phantom.truth, setup.geometry, setup.grid, setup.spectrum,
                           setup.linearization, config.noise_seed);
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  const ExperimentSetup setup = build_setup(config);
  MeasurementSource source = make_source(config, setup);

  const bool needs_dmat =
      std::find(config.policies.begin(), config.policies.end(), "epvs") != config.policies.end();
  std::optional<CadModel> cad;
  if (needs_dmat) {
    auto dmat = obtain_distance_matrix(config, setup, log);
    cad = prepare_cad_model(setup.phantom.cad, setup.geometry, setup.grid, config.selection.canny,
                            config.selection.softmax, std::move(dmat));
  }

  ExperimentResult result;
  std::vector<SummaryRow> summary;
  for (const auto& policy : config.policies) {
    note(log, "policy " + policy + ": running");
    SelectionConfig sel = config.selection;
    if (config.snapshots) {
      const auto dir = config.out_dir / "snapshots";
      std::filesystem::create_directories(dir);
      sel.on_checkpoint = [dir, policy, &result](int views, const Volume& recon) {
        const auto path = dir / (policy + "_" + std::to_string(views) + ".vol");
        write_volume(path, recon);
        result.files.push_back(path);
      };
    }
    SelectionTrace trace;
    if (policy == "epvs") {
      trace = run_epvs(source, *cad, sel);
    } else if (policy == "uniform") {
      trace = run_uniform(source, sel);
    } else {
      trace = run_eavs(source, sel);
    }
    const auto path = config.out_dir / ("trace_" + policy + ".csv");
    write_file_atomic(path, trace_csv(trace));
    result.files.push_back(path);
    const auto rows = summarize(trace);
    summary.insert(summary.end(), rows.begin(), rows.end());
    for (const auto& row : rows) {
      note(log, "policy " + policy + ": " + std::to_string(row.views) +
                    " views nrmse=" + format_number(row.nrmse) + " ssim=" + format_number(row.ssim));
    }
    result.traces.push_back(std::move(trace));
  }

  if (config.dense_reference) {
    note(log, "dense reference: reconstructing from all " + std::to_string(setup.grid.size()) +
                  " views");
    const auto all = uniform_indices(static_cast<int>(setup.grid.size()), setup.grid.size());
    result.dense_reference =
        evaluate_views(source, all, config.selection.checkpoint_recon, config.selection.ssim);
    summary.push_back({"dense", static_cast<int>(all.size()), result.dense_reference->nrmse,
                       result.dense_reference->ssim, std::nullopt});
  }

  const auto summary_path = config.out_dir / "summary.csv";
  write_file_atomic(summary_path, summary_csv(summary));
  result.files.push_back(summary_path);
  return result;
}

}  // namespace viewsel
