// viewsel: run view-selection experiments and inspect their pieces.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "viewsel/config.hpp"
#include "viewsel/experiment.hpp"
#include "viewsel/io.hpp"
#include "viewsel/parallel.hpp"
#include "viewsel/projector.hpp"
#include "viewsel/recon.hpp"
#include "viewsel/scoring.hpp"
#include "viewsel/selection.hpp"

namespace fs = std::filesystem;
using namespace viewsel;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

/// Thrown for bad command-line values that parse but make no sense.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig config = load_config(c.config);
  if (c.seed) {
    config.pores.seed = *c.seed;
    config.noise_seed = *c.seed;
  }
  return config;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::size_t grid_index_of(const AngleGrid& grid, double angle) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - angle) < 1e-9) return i;
  }
  throw UsageError("angle " + format_number(angle) + " is not on the candidate grid");
}

int cmd_run(const Common& c, const std::string& policies, const std::string& out) {
  ExperimentConfig config = load(c);
  if (!policies.empty()) {
    config.policies = split_list(policies);
    config.key_lines.erase("selection.policies");
  }
  if (!out.empty()) config.out_dir = out;
  config.validate();
  const auto result = run_experiment(config, &std::cerr);
  for (const auto& f : result.files) std::cout << f.string() << '\n';
  return 0;
}

int cmd_phantom(const Common& c, const std::string& out) {
  const auto config = load(c);
  const auto phantom = make_phantom(phantom_spec(config));
  const fs::path dir = out.empty() ? config.out_dir : fs::path(out);
  fs::create_directories(dir);
  write_volume(dir / "cad.vol", phantom.cad);
  write_volume(dir / "truth.vol", phantom.truth);
  std::cout << (dir / "cad.vol").string() << '\n' << (dir / "truth.vol").string() << '\n';
  return 0;
}

int cmd_project(const Common& c, double angle, const std::string& input, bool noiseless,
                const std::string& out) {
  auto config = load(c);
  if (noiseless) config.spectrum.noise_relative = 0.0;
  const auto setup = build_setup(config);
  const Volume truth = input.empty() ? setup.phantom.truth : read_volume(input);
  check_volume_matches(truth, setup.geometry);
  Projection p = simulate_measurement(truth, setup.geometry, angle, setup.spectrum,
                                      config.noise_seed);
  if (!setup.linearization.empty()) p = linearize(p, setup.linearization);
  ensure_parent(out);
  write_projection(out, p);
  return 0;
}

int cmd_reconstruct(const Common& c, const std::vector<std::string>& inputs,
                    std::optional<int> iterations, const std::string& out) {
  const auto config = load(c);
  const ConeBeamGeometry geom(config.geometry);
  std::vector<Projection> projs;
  for (const auto& f : inputs) {
    projs.push_back(read_projection(f));
    check_projection_matches(projs.back(), geom);
  }
  SirtParams params = config.selection.checkpoint_recon;
  if (iterations) {
    if (*iterations < 1) throw UsageError("--iterations must be at least 1");
    params.iterations = *iterations;
  }
  const Volume x = reconstruct_sirt(projs, geom, params);
  ensure_parent(out);
  write_volume(out, x);
  return 0;
}

int cmd_score(const Common& c, const std::string& selected_text, const std::string& recon_path,
              std::optional<double> lambda_opt, const std::string& out) {
  const auto config = load(c);
  const auto setup = build_setup(config);
  std::vector<std::size_t> selected;
  for (const auto& item : split_list(selected_text)) {
    double angle = 0.0;
    try {
      std::size_t used = 0;
      angle = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--selected: '" + item + "' is not an angle");
    }
    const auto idx = grid_index_of(setup.grid, angle);
    if (std::find(selected.begin(), selected.end(), idx) != selected.end()) {
      throw UsageError("--selected: angle " + item + " listed twice");
    }
    selected.push_back(idx);
  }
  if (selected.size() >= setup.grid.size()) throw UsageError("--selected leaves no candidates");

  auto dmat = obtain_distance_matrix(config, setup, &std::cerr);
  const auto cad = prepare_cad_model(setup.phantom.cad, setup.geometry, setup.grid,
                                     config.selection.canny, config.selection.softmax, dmat);
  Volume recon;
  if (!recon_path.empty()) {
    recon = read_volume(recon_path);
    check_volume_matches(recon, setup.geometry);
  } else if (!selected.empty()) {
    auto source = make_source(config, setup);
    recon = reconstruct_sirt(source.gather(selected), setup.geometry, config.selection.loop_recon);
  } else {
    recon = Volume(setup.geometry.vol_shape(), setup.geometry.voxel_pitch());
  }

  const int n = static_cast<int>(selected.size()) + 1;
  double lambda = 1.0;
  if (lambda_opt) {
    lambda = *lambda_opt;
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("--lambda must lie in [0, 1]");
  } else if (n > config.selection.n_init && config.selection.budget > config.selection.n_init) {
    lambda = lambda_schedule(n, config.selection.n_init, config.selection.budget);
  }

  SelectionState state;
  state.grid = setup.grid;
  state.selected = selected;
  state.dmat = dmat;
  state.step = static_cast<int>(selected.size());
  const auto candidates = state.candidates();
  const auto recon_edges = canny_edges(recon, config.selection.canny).to_volume();
  const auto i_recon = edge_alignment_scores(recon_edges, setup.geometry, setup.grid, candidates,
                                             config.selection.softmax);
  const auto dispersion = auto_dispersion_params(*dmat, config.selection.gamma_scale,
                                                 config.selection.epsilon_scale);

  std::string csv = "grid_index,angle,i_cad,i_recon,dispersion,lambda,total\r\n";
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto c_idx = candidates[k];
    const auto b = combine_scores(cad.alignment[c_idx] / cad.alignment_scale,
                                  i_recon[k] / cad.alignment_scale,
                                  dispersion_score(c_idx, selected, *dmat, dispersion), lambda);
    csv += std::to_string(c_idx) + ',' + format_number(setup.grid[c_idx]) + ',' +
           format_number(b.i_cad) + ',' + format_number(b.i_recon) + ',' +
           format_number(b.dispersion) + ',' + format_number(b.lambda) + ',' +
           format_number(b.total) + "\r\n";
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    ensure_parent(out);
    write_file_atomic(out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-projection view selection for sparse-view cone-beam CT"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(VIEWSEL_VERSION));

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: VIEWSEL_THREADS or all cores)");

  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Override the phantom and noise seeds");
  };

  std::string policies;
  std::string out;
  auto* run = app.add_subcommand("run", "Run the configured policies and write CSV results");
  add_common(run);
  run->add_option("--policies", policies, "Comma-separated subset of epvs,uniform,eavs");
  run->add_option("--out", out, "Output directory (overrides [output] dir)");

  auto* phantom = app.add_subcommand("phantom", "Write the CAD and truth volumes");
  add_common(phantom);
  phantom->add_option("--out", out, "Output directory (overrides [output] dir)");

  double angle = 0.0;
  std::string input;
  bool noiseless = false;
  auto* project = app.add_subcommand("project", "Simulate the measurement at one angle");
  add_common(project);
  project->add_option("--angle", angle, "View angle in degrees")->required();
  project->add_option("--input", input, "Volume to project (default: the truth phantom)")
      ->check(CLI::ExistingFile);
  project->add_flag("--noiseless", noiseless, "Disable detector noise");
  project->add_option("--out", out, "Output projection file")->required();

  std::vector<std::string> inputs;
  std::optional<int> iterations;
  auto* reconstruct = app.add_subcommand("reconstruct", "SIRT reconstruction from projection files");
  add_common(reconstruct);
  reconstruct->add_option("projections", inputs, "Projection files")
      ->required()
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--iterations", iterations, "SIRT iterations (default: [recon] iterations)");
  reconstruct->add_option("--out", out, "Output volume file")->required();

  std::string selected;
  std::string recon_path;
  std::optional<double> lambda;
  auto* score = app.add_subcommand("score", "Print the objective breakdown for every candidate");
  add_common(score);
  score->add_option("--selected", selected, "Comma-separated angles already acquired");
  score->add_option("--recon", recon_path, "Reconstruction volume (default: SIRT of --selected)")
      ->check(CLI::ExistingFile);
  score->add_option("--lambda", lambda, "Override the scheduled lambda");
  score->add_option("--out", out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  try {
    if (threads > 0) {
      set_num_threads(threads);
    } else {
      apply_thread_env();
    }
    if (*run) return cmd_run(common, policies, out);
    if (*phantom) return cmd_phantom(common, out);
    if (*project) return cmd_project(common, angle, input, noiseless, out);
    if (*reconstruct) return cmd_reconstruct(common, inputs, iterations, out);
    if (*score) return cmd_score(common, selected, recon_path, lambda, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}
