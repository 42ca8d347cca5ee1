#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "viewsel/geometry.hpp"
#include "viewsel/selection.hpp"
#include "viewsel/sim.hpp"

namespace viewsel {

/// Parse or validation failure. `line()` is the 1-based config line the
/// problem refers to, or 0 when it is not tied to one line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0, const std::string& source = {});
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string detail_;
};

struct ExperimentConfig {
  GeometryParams geometry{192.0, 288.0, 80, 80, 1.5, {64, 64, 64}, 1.0};
  int grid_size = 180;

  bool default_phantom = true;
  std::vector<Solid> solids;  // used when default_phantom is false
  PoreSpec pores{20, 1.0, 3.0, 1};

  SpectrumModel spectrum = default_spectrum();
  std::uint64_t noise_seed = 7;
  bool linearize = true;
  int linearization_degree = 3;

  SelectionConfig selection;
  std::size_t dmat_memory_bytes = std::size_t{1} << 30;

  std::vector<std::string> policies{"epvs", "uniform", "eavs"};
  std::filesystem::path out_dir = "viewsel_out";
  bool snapshots = false;
  bool dense_reference = false;
  std::filesystem::path dmat_cache;  // empty: no cache

  /// Line on which each `section.key` was set; used to point validation
  /// errors at the offending entry.
  std::map<std::string, int> key_lines;

  /// Cross-field validation. Throws ConfigError naming the field.
  void validate() const;
  [[nodiscard]] int line_of(const std::string& field) const;
};

ExperimentConfig parse_config(const std::string& text);
/// Reads and validates a config file. Throws ConfigError, whose message starts
/// with `path:line:` when a line is known.
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace viewsel
