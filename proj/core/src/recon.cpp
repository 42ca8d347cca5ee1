#include "viewsel/recon.hpp"

#include <cmath>
#include <stdexcept>

#include "viewsel/projector.hpp"

namespace viewsel {

Volume reconstruct_sirt(std::span<const Projection> projs, const ConeBeamGeometry& geom,
                        const SirtParams& params, const Volume* init,
                        std::vector<double>* residual_norms) {
  if (projs.empty()) throw std::invalid_argument("sirt: at least one projection is required");
  if (params.iterations < 1) throw std::invalid_argument("sirt: iterations must be >= 1");
  if (!(params.relax > 0.0 && params.relax <= 2.0)) {
    throw std::invalid_argument("sirt: relax must lie in (0, 2]");
  }
  for (const auto& p : projs) check_projection_matches(p, geom);

  Volume x = init != nullptr ? *init : Volume(geom.vol_shape(), geom.voxel_pitch());
  check_volume_matches(x, geom);

  const std::size_t n_vox = geom.vol_shape().size();
  const std::size_t n_det = geom.det_size();
  const std::size_t n_views = projs.size();

  // Row sums are ray lengths through the voxel box; column sums follow from
  // backprojecting the indicator of rays that hit the volume.
  const Volume ones(geom.vol_shape(), geom.voxel_pitch(), 1.0f);
  std::vector<std::vector<float>> row_weight(n_views, std::vector<float>(n_det));
  std::vector<double> col_sum(n_vox, 0.0);
  std::vector<float> hit(n_det);
  for (std::size_t v = 0; v < n_views; ++v) {
    forward_project_into(ones.data(), geom, projs[v].angle(), row_weight[v]);
    for (std::size_t s = 0; s < n_det; ++s) {
      const float len = row_weight[v][s];
      hit[s] = len > 0.0f ? 1.0f : 0.0f;
      row_weight[v][s] = len > 0.0f ? 1.0f / len : 0.0f;
    }
    back_project_add(hit, geom, projs[v].angle(), col_sum);
  }
  std::vector<double> col_weight(n_vox);
  for (std::size_t i = 0; i < n_vox; ++i) {
    col_weight[i] = col_sum[i] > 0.0 ? params.relax / col_sum[i] : 0.0;
  }

  if (residual_norms != nullptr) residual_norms->clear();
  std::vector<float> ax(n_det);
  std::vector<float> residual(n_det);
  std::vector<double> update(n_vox);
  auto xd = x.data();

  const auto residual_pass = [&](bool accumulate) {
    double norm2 = 0.0;
    if (accumulate) std::fill(update.begin(), update.end(), 0.0);
    for (std::size_t v = 0; v < n_views; ++v) {
      forward_project_into(xd, geom, projs[v].angle(), ax);
      const auto y = projs[v].data();
      for (std::size_t s = 0; s < n_det; ++s) {
        const double r = static_cast<double>(y[s]) - ax[s];
        norm2 += r * r;
        residual[s] = static_cast<float>(r * row_weight[v][s]);
      }
      if (accumulate) back_project_add(residual, geom, projs[v].angle(), update);
    }
    return std::sqrt(norm2);
  };

  for (int it = 0; it < params.iterations; ++it) {
    const double norm = residual_pass(true);
    if (residual_norms != nullptr) residual_norms->push_back(norm);
    for (std::size_t i = 0; i < n_vox; ++i) {
      double value = xd[i] + col_weight[i] * update[i];
      if (params.nonneg && value < 0.0) value = 0.0;
      xd[i] = static_cast<float>(value);
    }
  }
  if (residual_norms != nullptr) residual_norms->push_back(residual_pass(false));
  return x;
}

}  // namespace viewsel
