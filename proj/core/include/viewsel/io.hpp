#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "viewsel/scoring.hpp"
#include "viewsel/selection.hpp"
#include "viewsel/volume.hpp"

namespace viewsel {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array container: an ASCII header followed by raw little-endian data.
///
///   VIEWSEL-ARRAY 1
///   kind volume|projection|matrix
///   dtype float32_le|float64_le
///   shape <fastest> <middle> [<slowest>]
///   pitch <mm>
///   angle <degrees>
///   tag <free text>
///   creator viewsel <version>
///   end
///
/// Volumes store shape nx ny nz, projections cols rows, matrices n n.
struct ArrayHeader {
  std::string kind;
  std::string dtype;
  std::vector<std::size_t> shape;
  double pitch = 0.0;
  double angle = 0.0;
  std::string tag;
  std::string creator;
};

void write_volume(const std::filesystem::path& path, const Volume& vol);
Volume read_volume(const std::filesystem::path& path);

void write_projection(const std::filesystem::path& path, const Projection& proj);
Projection read_projection(const std::filesystem::path& path);

/// Matrices are stored in float64 so a cached matrix reproduces the original.
void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& dmat,
                           const std::string& tag = {});
DistanceMatrix read_distance_matrix(const std::filesystem::path& path,
                                    std::string* tag = nullptr);

ArrayHeader read_header(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Shortest round-trip decimal form; identical input gives identical text.
std::string format_number(double v);

/// One row per acquired view:
/// step,angle,i_cad,i_recon,dispersion,lambda,total,nrmse,ssim,select_seconds
/// Missing values are empty fields.
std::string trace_csv(const SelectionTrace& trace);

struct SummaryRow {
  std::string policy;
  int views = 0;
  double nrmse = 0.0;
  double ssim = 0.0;
  std::optional<double> mean_select_seconds;
};

/// policy,views,nrmse,ssim,mean_select_seconds
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> summarize(const SelectionTrace& trace);

}  // namespace viewsel
