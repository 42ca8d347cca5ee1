#include "viewsel/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <utility>

namespace viewsel {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void bad(int line, const std::string& field, const std::string& why) {
  throw ConfigError("[" + field.substr(0, field.find('.')) + "] " + field.substr(field.find('.') + 1) +
                        ": " + why,
                    line);
}

double to_double(const std::string& v, int line, const std::string& field) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) bad(line, field, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& v, int line, const std::string& field) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) bad(line, field, "expected an integer, got '" + v + "'");
  return out;
}

int to_int32(const std::string& v, int line, const std::string& field) {
  const long long x = to_int(v, line, field);
  if (x < -2147483647LL || x > 2147483647LL) bad(line, field, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& v, int line, const std::string& field) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    bad(line, field, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v, int line, const std::string& field) {
  const std::string s = lower(v);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  bad(line, field, "expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& v, int line, const std::string& field) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(item, line, field));
  if (out.empty()) bad(line, field, "expected a comma-separated list of numbers");
  return out;
}

Solid to_solid(const std::string& v, int line) {
  std::istringstream in(v);
  std::vector<std::string> tok;
  for (std::string t; in >> t;) tok.push_back(t);
  const std::string field = "phantom.solid";
  if (tok.size() != 10) {
    bad(line, field, "expected 'kind cx cy cz s0 s1 s2 axis yaw value' (10 fields), got " +
                         std::to_string(tok.size()));
  }
  Solid s;
  const std::string kind = lower(tok[0]);
  if (kind == "box") {
    s.kind = SolidKind::kBox;
  } else if (kind == "cylinder") {
    s.kind = SolidKind::kCylinder;
  } else if (kind == "sphere") {
    s.kind = SolidKind::kSphere;
  } else {
    bad(line, field, "unknown solid kind '" + tok[0] + "'");
  }
  for (int a = 0; a < 3; ++a) {
    s.center[a] = to_double(tok[1 + a], line, field);
    s.size[a] = to_double(tok[4 + a], line, field);
    if (!(s.size[a] >= 0.0)) bad(line, field, "sizes must be non-negative");
  }
  const std::string axis = lower(tok[7]);
  if (axis != "x" && axis != "y" && axis != "z") bad(line, field, "axis must be x, y or z");
  s.axis = axis[0];
  s.yaw_deg = to_double(tok[8], line, field);
  s.value = to_double(tok[9], line, field);
  if (!(s.value >= 0.0)) bad(line, field, "attenuation must be non-negative");
  return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    const auto num = [&t](const std::string& key, auto member) {
      t[key] = [key, member](ExperimentConfig& c, const std::string& v, int line) {
        member(c) = to_double(v, line, key);
      };
    };
    const auto integer = [&t](const std::string& key, auto member) {
      t[key] = [key, member](ExperimentConfig& c, const std::string& v, int line) {
        member(c) = to_int32(v, line, key);
      };
    };
    const auto flag = [&t](const std::string& key, auto member) {
      t[key] = [key, member](ExperimentConfig& c, const std::string& v, int line) {
        member(c) = to_bool(v, line, key);
      };
    };

    num("geometry.sod", [](ExperimentConfig& c) -> double& { return c.geometry.source_object_dist; });
    num("geometry.sdd", [](ExperimentConfig& c) -> double& { return c.geometry.source_detector_dist; });
    integer("geometry.det_rows", [](ExperimentConfig& c) -> int& { return c.geometry.det_rows; });
    integer("geometry.det_cols", [](ExperimentConfig& c) -> int& { return c.geometry.det_cols; });
    num("geometry.det_pitch", [](ExperimentConfig& c) -> double& { return c.geometry.det_pitch; });
    integer("geometry.nx", [](ExperimentConfig& c) -> int& { return c.geometry.vol_shape.nx; });
    integer("geometry.ny", [](ExperimentConfig& c) -> int& { return c.geometry.vol_shape.ny; });
    integer("geometry.nz", [](ExperimentConfig& c) -> int& { return c.geometry.vol_shape.nz; });
    num("geometry.voxel_pitch", [](ExperimentConfig& c) -> double& { return c.geometry.voxel_pitch; });
    integer("geometry.angles", [](ExperimentConfig& c) -> int& { return c.grid_size; });

    t["phantom.kind"] = [](ExperimentConfig& c, const std::string& v, int line) {
      const std::string s = lower(v);
      if (s == "default") {
        c.default_phantom = true;
      } else if (s == "custom") {
        c.default_phantom = false;
      } else {
        bad(line, "phantom.kind", "expected default or custom, got '" + v + "'");
      }
    };
    t["phantom.solid"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.solids.push_back(to_solid(v, line));
    };
    integer("phantom.pores", [](ExperimentConfig& c) -> int& { return c.pores.count; });
    num("phantom.pore_radius_min", [](ExperimentConfig& c) -> double& { return c.pores.radius_min; });
    num("phantom.pore_radius_max", [](ExperimentConfig& c) -> double& { return c.pores.radius_max; });
    t["phantom.seed"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.pores.seed = to_u64(v, line, "phantom.seed");
    };

    t["spectrum.weights"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.spectrum.weights = to_doubles(v, line, "spectrum.weights");
    };
    t["spectrum.scales"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.spectrum.scales = to_doubles(v, line, "spectrum.scales");
    };
    num("spectrum.noise", [](ExperimentConfig& c) -> double& { return c.spectrum.noise_relative; });
    t["spectrum.seed"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.noise_seed = to_u64(v, line, "spectrum.seed");
    };
    flag("spectrum.linearize", [](ExperimentConfig& c) -> bool& { return c.linearize; });
    integer("spectrum.degree", [](ExperimentConfig& c) -> int& { return c.linearization_degree; });

    num("scoring.beta", [](ExperimentConfig& c) -> double& { return c.selection.softmax.beta; });
    num("scoring.gamma_scale", [](ExperimentConfig& c) -> double& { return c.selection.gamma_scale; });
    num("scoring.epsilon_scale", [](ExperimentConfig& c) -> double& { return c.selection.epsilon_scale; });
    num("scoring.canny_sigma", [](ExperimentConfig& c) -> double& { return c.selection.canny.sigma; });
    num("scoring.canny_low", [](ExperimentConfig& c) -> double& { return c.selection.canny.low; });
    num("scoring.canny_high", [](ExperimentConfig& c) -> double& { return c.selection.canny.high; });
    t["scoring.canny_thresholds"] = [](ExperimentConfig& c, const std::string& v, int line) {
      const std::string s = lower(v);
      if (s == "quantile") {
        c.selection.canny.mode = ThresholdMode::kQuantile;
      } else if (s == "absolute") {
        c.selection.canny.mode = ThresholdMode::kAbsolute;
      } else {
        bad(line, "scoring.canny_thresholds", "expected quantile or absolute, got '" + v + "'");
      }
    };
    t["scoring.dmat_memory_mb"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.dmat_memory_bytes = to_u64(v, line, "scoring.dmat_memory_mb") << 20;
    };
    num("scoring.eavs_band_width", [](ExperimentConfig& c) -> double& { return c.selection.eavs_band_width; });
    num("scoring.eavs_gamma_scale", [](ExperimentConfig& c) -> double& { return c.selection.eavs_gamma_scale; });

    integer("selection.n_init", [](ExperimentConfig& c) -> int& { return c.selection.n_init; });
    integer("selection.budget", [](ExperimentConfig& c) -> int& { return c.selection.budget; });
    t["selection.checkpoints"] = [](ExperimentConfig& c, const std::string& v, int line) {
      c.selection.checkpoints.clear();
      for (const auto& item : split_list(v)) {
        c.selection.checkpoints.push_back(to_int32(item, line, "selection.checkpoints"));
      }
    };
    t["selection.policies"] = [](ExperimentConfig& c, const std::string& v, int) {
      c.policies.clear();
      for (const auto& item : split_list(v)) c.policies.push_back(lower(item));
    };
    flag("selection.cad_only", [](ExperimentConfig& c) -> bool& { return c.selection.cad_only; });

    integer("recon.iterations", [](ExperimentConfig& c) -> int& { return c.selection.checkpoint_recon.iterations; });
    integer("recon.loop_iterations", [](ExperimentConfig& c) -> int& { return c.selection.loop_recon.iterations; });
    t["recon.relax"] = [](ExperimentConfig& c, const std::string& v, int line) {
      const double r = to_double(v, line, "recon.relax");
      c.selection.loop_recon.relax = r;
      c.selection.checkpoint_recon.relax = r;
    };
    t["recon.nonneg"] = [](ExperimentConfig& c, const std::string& v, int line) {
      const bool b = to_bool(v, line, "recon.nonneg");
      c.selection.loop_recon.nonneg = b;
      c.selection.checkpoint_recon.nonneg = b;
    };
    flag("recon.warm_start", [](ExperimentConfig& c) -> bool& { return c.selection.warm_start; });
    integer("recon.ssim_window", [](ExperimentConfig& c) -> int& { return c.selection.ssim.window; });

    t["output.dir"] = [](ExperimentConfig& c, const std::string& v, int line) {
      if (v.empty()) bad(line, "output.dir", "must not be empty");
      c.out_dir = v;
    };
    flag("output.record_timing", [](ExperimentConfig& c) -> bool& { return c.selection.record_timing; });
    flag("output.snapshots", [](ExperimentConfig& c) -> bool& { return c.snapshots; });
    flag("output.dense_reference", [](ExperimentConfig& c) -> bool& { return c.dense_reference; });
    t["output.dmat_cache"] = [](ExperimentConfig& c, const std::string& v, int) { c.dmat_cache = v; };
    return t;
  }();
  return table;
}

const std::set<std::string> kSections = {"geometry", "phantom", "spectrum", "scoring",
                                         "selection", "recon", "output"};

// SelectionConfig::validate names fields by their own names; map them back to
// the config keys that set them.
std::string config_key_for(const std::string& selection_field) {
  static const std::map<std::string, std::string> keys = {
      {"n_init", "selection.n_init"},
      {"budget", "selection.budget"},
      {"checkpoints", "selection.checkpoints"},
      {"beta", "scoring.beta"},
      {"gamma_scale", "scoring.gamma_scale"},
      {"epsilon_scale", "scoring.epsilon_scale"},
      {"eavs_band_width", "scoring.eavs_band_width"},
      {"eavs_gamma_scale", "scoring.eavs_gamma_scale"},
      {"loop_iterations", "recon.loop_iterations"},
      {"checkpoint_iterations", "recon.iterations"},
  };
  const auto it = keys.find(selection_field);
  return it == keys.end() ? "selection." + selection_field : it->second;
}

}  // namespace

ConfigError::ConfigError(const std::string& message, int line, const std::string& source)
    : std::runtime_error(source.empty()
                             ? (line > 0 ? "line " + std::to_string(line) + ": " + message : message)
                             : source + ":" + (line > 0 ? std::to_string(line) + ":" : "") + " " +
                                   message),
      line_(line),
      detail_(message) {}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int ExperimentConfig::line_of(const std::string& field) const {
  const auto it = key_lines.find(field);
  return it == key_lines.end() ? 0 : it->second;
}

void ExperimentConfig::validate() const {
  const auto fail = [this](const std::string& field, const std::string& why) {
    bad(line_of(field), field, why);
  };

  try {
    ConeBeamGeometry check(geometry);
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    if (msg.rfind("geometry: ", 0) == 0) msg = msg.substr(10);
    throw ConfigError("[geometry] " + msg);
  }
  if (grid_size < 2) fail("geometry.angles", "must be at least 2");

  if (!default_phantom && solids.empty()) fail("phantom.kind", "custom phantom needs at least one solid");
  if (pores.count < 0) fail("phantom.pores", "must be non-negative");
  if (!(pores.radius_min > 0.0)) fail("phantom.pore_radius_min", "must be positive");
  if (pores.radius_max < pores.radius_min) fail("phantom.pore_radius_max", "must be >= pore_radius_min");

  try {
    spectrum.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[spectrum] ") + e.what(), line_of("spectrum.weights"));
  }
  if (linearization_degree < 1) fail("spectrum.degree", "must be at least 1");

  const auto& canny = selection.canny;
  if (!(canny.sigma > 0.0)) fail("scoring.canny_sigma", "must be positive");
  if (!(canny.low > 0.0)) fail("scoring.canny_low", "must be positive");
  if (!(canny.high > canny.low)) fail("scoring.canny_high", "must exceed canny_low");
  if (canny.mode == ThresholdMode::kQuantile && canny.high > 1.0) {
    fail("scoring.canny_high", "quantile thresholds must not exceed 1");
  }

  try {
    selection.validate(static_cast<std::size_t>(grid_size));
  } catch (const std::invalid_argument& e) {
    // Messages look like "selection.<field>: why".
    const std::string msg = e.what();
    const auto dot = msg.find('.');
    const auto colon = msg.find(": ");
    if (dot != std::string::npos && colon != std::string::npos && colon > dot) {
      fail(config_key_for(msg.substr(dot + 1, colon - dot - 1)), msg.substr(colon + 2));
    }
    throw ConfigError(msg);
  }
  if (!(selection.loop_recon.relax > 0.0 && selection.loop_recon.relax <= 2.0)) {
    fail("recon.relax", "must lie in (0, 2]");
  }
  const int w = selection.ssim.window;
  if (w < 3 || w % 2 == 0) fail("recon.ssim_window", "must be odd and at least 3");
  if (w > geometry.vol_shape.nx || w > geometry.vol_shape.ny) {
    fail("recon.ssim_window", "larger than the volume slice");
  }

  if (policies.empty()) fail("selection.policies", "at least one policy is required");
  std::set<std::string> seen;
  for (const auto& p : policies) {
    if (p != "epvs" && p != "uniform" && p != "eavs") {
      fail("selection.policies", "unknown policy '" + p + "' (expected epvs, uniform or eavs)");
    }
    if (!seen.insert(p).second) fail("selection.policies", "policy '" + p + "' listed twice");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  config.selection.checkpoints = {5, 15, 25, 35};
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(std::string_view(raw).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header '" + s + "'", line);
      section = lower(trim(std::string_view(s).substr(1, s.size() - 2)));
      if (!kSections.count(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = lower(trim(std::string_view(s).substr(0, eq)));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    const std::string field = section + "." + key;
    const auto it = schema().find(field);
    if (it == schema().end()) throw ConfigError("[" + section + "] unknown key '" + key + "'", line);
    if (field != "phantom.solid" && config.key_lines.count(field)) {
      throw ConfigError("[" + section + "] " + key + ": duplicate key (first set on line " +
                            std::to_string(config.key_lines[field]) + ")",
                        line);
    }
    config.key_lines[field] = line;
    it->second(config, value, line);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.detail(), e.line(), path.string());
  }
}

}  // namespace viewsel
