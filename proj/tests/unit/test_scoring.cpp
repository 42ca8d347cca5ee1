#include <doctest.h>

#include <numeric>
#include <random>

#include "helpers.hpp"
#include "viewsel/edges.hpp"
#include "viewsel/projector.hpp"
#include "viewsel/scoring.hpp"

using namespace viewsel;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

DistanceMatrix toy_matrix() {
  // Four views with distinct positive distances.
  return DistanceMatrix(4, {0, 1, 2, 3,  //
                            1, 0, 4, 5,  //
                            2, 4, 0, 6,  //
                            3, 5, 6, 0});
}

EdgeVolume line_edges(int n) {
  std::vector<std::uint8_t> d(static_cast<std::size_t>(n) * n * n, 0);
  // Straight line along x through the volume center.
  const int j = n / 2;
  const int k = n / 2;
  for (int i = 4; i < n - 4; ++i) d[(static_cast<std::size_t>(k) * n + j) * n + i] = 1;
  return EdgeVolume({n, n, n}, 1.0, std::move(d));
}

}  // namespace

TEST_CASE("softmax of 1, 2, 3") {
  const std::vector<float> y{1.0f, 2.0f, 3.0f};
  const auto w = softmax_weights(y, {1.0});
  CHECK(w[0] == doctest::Approx(0.09003057).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(0.24472847).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.66524096).epsilon(1e-6));
}

TEST_CASE("beta zero gives uniform weights") {
  const std::vector<float> y{5.0f, -2.0f, 0.5f, 9.0f};
  for (const double w : softmax_weights(y, {0.0})) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("large beta puts all weight on the maximum") {
  const std::vector<float> y{1.0f, 2.0f, 3.0f, 2.5f};
  const auto w = softmax_weights(y, {1000.0});
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(std::abs(sum(w) - 1.0) < 1e-9);
}

TEST_CASE("softmax weights sum to one for extreme inputs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> big(-1e30f, 1e30f);
  std::uniform_real_distribution<double> beta(0.0, 1e6);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> y(37);
    for (auto& x : y) x = big(rng) * (t % 2 ? 1e-30f : 1.0f);
    const auto w = softmax_weights(y, {beta(rng)});
    CHECK(std::abs(sum(w) - 1.0) < 1e-9);
    for (const double x : w) CHECK(x >= 0.0);
  }
}

TEST_CASE("softmax-weighted mean grows with beta when the maximum is unique") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 10.0f);
  for (int t = 0; t < 50; ++t) {
    std::vector<float> y(64);
    for (auto& x : y) x = u(rng);
    double prev = -1.0;
    for (const double b : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
      const double m = softmax_weighted_mean(y, {b});
      CHECK(m >= prev - 1e-12);
      prev = m;
    }
  }
}

TEST_CASE("weighted mean agrees with explicit weights") {
  const std::vector<float> y{0.5f, 4.0f, 2.0f, 3.5f};
  const auto w = softmax_weights(y, {0.7});
  double expect = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) expect += w[i] * y[i];
  CHECK(softmax_weighted_mean(y, {0.7}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("edge alignment score") {
  const auto g = testutil::cube_geometry(32);
  SUBCASE("empty edges score zero") {
    const EdgeVolume e({32, 32, 32}, 1.0, std::vector<std::uint8_t>(32 * 32 * 32, 0));
    for (const double a : {0.0, 45.0, 300.0}) CHECK(edge_alignment_score(e, g, a, {1.0}) == 0.0);
  }
  SUBCASE("beta zero is the plain mean of the edge projection") {
    const auto e = line_edges(32);
    const auto p = forward_project(e.to_volume(), g, 20.0);
    double mean = 0.0;
    for (const float x : p.data()) mean += x;
    mean /= static_cast<double>(p.size());
    CHECK(edge_alignment_score(e, g, 20.0, {0.0}) == doctest::Approx(mean).epsilon(1e-9));
  }
  SUBCASE("rays along a line score higher than rays across it") {
    const auto e = line_edges(32);
    const double along = edge_alignment_score(e, g, 0.0, {1.0});
    const double across = edge_alignment_score(e, g, 90.0, {1.0});
    CHECK(along > across);
    // Brute force: along the line the peak ray collects about its full length.
    const auto p = forward_project(e.to_volume(), g, 0.0);
    const float peak = *std::max_element(p.data().begin(), p.data().end());
    CHECK(peak > 15.0f);
  }
  SUBCASE("score lies between the projection extremes") {
    const auto e = canny_edges(testutil::blob_volume(g.vol_shape(), 1.0));
    for (const double a : {10.0, 99.0}) {
      const auto p = forward_project(e.to_volume(), g, a);
      const auto [lo, hi] = std::minmax_element(p.data().begin(), p.data().end());
      const double s = edge_alignment_score(e, g, a, {1.0});
      CHECK(s >= *lo - 1e-9);
      CHECK(s <= *hi + 1e-9);
    }
  }
  SUBCASE("batch scores match single scores") {
    const auto e = line_edges(32);
    const AngleGrid grid({0.0, 45.0, 90.0, 200.0});
    const std::vector<std::size_t> idx{3, 0, 2};
    const auto s = edge_alignment_scores(e.to_volume(), g, grid, idx, {1.0});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      CHECK(s[k] == doctest::Approx(edge_alignment_score(e, g, grid[idx[k]], {1.0})).epsilon(1e-12));
    }
  }
}

TEST_CASE("scaling edges by c with beta zero scales every score by c") {
  const auto g = testutil::cube_geometry(16);
  const auto e = canny_edges(testutil::blob_volume(g.vol_shape(), 1.0)).to_volume();
  Volume scaled = e;
  for (auto& x : scaled.data()) x *= 3.0f;
  const auto grid = candidate_angles(12);
  std::vector<std::size_t> all(grid.size());
  std::iota(all.begin(), all.end(), 0);
  const auto a = edge_alignment_scores(e, g, grid, all, {0.0});
  const auto b = edge_alignment_scores(scaled, g, grid, all, {0.0});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(3.0 * a[i]).epsilon(1e-6));
  CHECK(std::max_element(a.begin(), a.end()) - a.begin() ==
        std::max_element(b.begin(), b.end()) - b.begin());
}

TEST_CASE("pairwise view distance") {
  const auto g = testutil::cube_geometry(16);
  const auto cad = testutil::blob_volume(g.vol_shape(), 1.0);
  CHECK(pairwise_view_distance(cad, g, 40.0, 40.0) == 0.0);
  const double ab = pairwise_view_distance(cad, g, 10.0, 75.0);
  const double ba = pairwise_view_distance(cad, g, 75.0, 10.0);
  CHECK(ab > 0.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}

TEST_CASE("opposite cone-beam views differ and the difference fades in the parallel limit") {
  const int n = 16;
  const GeometryParams near{40.0, 80.0, 40, 40, 1.0, {n, n, n}, 1.0};
  GeometryParams far = near;
  far.source_object_dist *= 100.0;
  far.source_detector_dist *= 100.0;
  const ConeBeamGeometry gn(near);
  const ConeBeamGeometry gf(far);
  const auto cad = testutil::blob_volume(gn.vol_shape(), 1.0);
  const double dn = pairwise_view_distance(cad, gn, 0.0, 180.0);
  const double df = pairwise_view_distance(cad, gf, 0.0, 180.0);
  CHECK(dn > 0.0);
  CHECK(df < dn);
}

TEST_CASE("distance matrix") {
  const auto g = testutil::cube_geometry(12);
  const auto cad = testutil::blob_volume(g.vol_shape(), 1.0);
  SUBCASE("three angles need three backprojections") {
    const AngleGrid grid({0.0, 120.0, 240.0});
    DistanceBuildStats stats;
    const auto m = build_distance_matrix(cad, g, grid, std::size_t{1} << 30, &stats);
    CHECK(stats.backprojections == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m(i, i) == 0.0);
    CHECK(m(0, 1) > 0.0);
    CHECK(m(0, 2) > 0.0);
    CHECK(m(1, 2) > 0.0);
    CHECK(m(0, 1) != m(0, 2));
  }
  SUBCASE("entries match direct recomputation") {
    const auto grid = candidate_angles(7);
    const auto m = build_distance_matrix(cad, g, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = 0; j < grid.size(); ++j) {
        CHECK(std::abs(m(i, j) - pairwise_view_distance(cad, g, grid[i], grid[j])) < 1e-12);
        CHECK(m(i, j) == m(j, i));
      }
    }
  }
  SUBCASE("a tiny memory budget gives the same matrix") {
    const auto grid = candidate_angles(9);
    const auto full = build_distance_matrix(cad, g, grid);
    DistanceBuildStats stats;
    const auto tiled = build_distance_matrix(cad, g, grid, 3 * cad.size() * sizeof(float), &stats);
    CHECK(full.values() == tiled.values());
    CHECK(stats.backprojections > grid.size());
  }
  SUBCASE("invalid matrices are rejected") {
    CHECK_THROWS(DistanceMatrix(2, {0, 1, 2, 0}));
    CHECK_THROWS(DistanceMatrix(2, {1, 1, 1, 0}));
    CHECK_THROWS(DistanceMatrix(2, {0, -1, -1, 0}));
    CHECK_THROWS(DistanceMatrix(2, {0, 1, 1}));
  }
}

TEST_CASE("dispersion score") {
  const auto m = toy_matrix();
  const DispersionParams p{0.5, 1e-12};
  CHECK(dispersion_score(0, {}, m, p) == 1.0);
  const std::vector<std::size_t> one{1};
  const std::vector<std::size_t> two{1, 2};
  const std::vector<std::size_t> three{1, 2, 3};
  const double d1 = dispersion_score(0, one, m, p);
  const double d2 = dispersion_score(0, two, m, p);
  const double d3 = dispersion_score(0, three, m, p);
  CHECK(d1 == doctest::Approx(std::exp(-0.5 / 1.0)));
  CHECK(d1 > d2);
  CHECK(d2 > d3);
  CHECK(d3 > 0.0);
  CHECK(dispersion_score(0, three, m, {1e-15, 1e-12}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(dispersion_score(1, one, m, p), std::invalid_argument);
}

TEST_CASE("dispersion floors zero distances") {
  const DistanceMatrix m(2, {0, 0, 0, 0});
  const double d = dispersion_score(0, std::vector<std::size_t>{1}, m, {1.0, 1e-3});
  CHECK(d == doctest::Approx(std::exp(-1000.0)));
}

TEST_CASE("automatic dispersion parameters") {
  const auto m = toy_matrix();
  const auto p = auto_dispersion_params(m, 0.1, 1e-12);
  CHECK(m.median_offdiagonal() == doctest::Approx(3.5));
  CHECK(p.gamma == doctest::Approx(0.35));
  CHECK(p.epsilon_d == doctest::Approx(6e-12));
}

TEST_CASE("lambda schedule") {
  CHECK(lambda_schedule(5, 5, 35) == 1.0);
  CHECK(lambda_schedule(35, 5, 35) == 0.0);
  CHECK(lambda_schedule(20, 5, 35) == doctest::Approx(0.5));
  CHECK(lambda_schedule(2, 5, 35) == 1.0);
  CHECK(lambda_schedule(40, 5, 35) == 0.0);
  CHECK_THROWS_AS(lambda_schedule(5, 5, 5), std::invalid_argument);
  CHECK_THROWS_AS(lambda_schedule(5, 6, 5), std::invalid_argument);
}

TEST_CASE("objective") {
  const auto g = testutil::cube_geometry(16);
  const auto cad_vol = testutil::blob_volume(g.vol_shape(), 1.0);
  const auto edge_cad = canny_edges(cad_vol);
  const auto edge_other = canny_edges(testutil::random_volume(g.vol_shape(), 1.0, 77));
  SelectionState state;
  state.grid = candidate_angles(8);
  state.dmat = std::make_shared<const DistanceMatrix>(build_distance_matrix(cad_vol, g, state.grid));
  state.selected = {0, 3};
  state.step = 2;
  ObjectiveParams params;
  params.dispersion = auto_dispersion_params(*state.dmat);
  params.alignment_scale = 2.0;

  SUBCASE("lambda one ignores the reconstruction edges") {
    params.lambda = 1.0;
    const auto a = objective(5, state, edge_cad, edge_cad, g, params);
    const auto b = objective(5, state, edge_cad, edge_other, g, params);
    CHECK(a.total == b.total);
    CHECK(a.i_recon != b.i_recon);
  }
  SUBCASE("lambda zero with identical edges equals lambda one") {
    params.lambda = 0.0;
    const auto a = objective(6, state, edge_cad, edge_cad, g, params);
    params.lambda = 1.0;
    const auto b = objective(6, state, edge_cad, edge_cad, g, params);
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-12));
  }
  SUBCASE("breakdown identity") {
    for (const double lam : {0.0, 0.3, 0.77, 1.0}) {
      params.lambda = lam;
      for (const std::size_t c : {1, 2, 4, 7}) {
        const auto s = objective(c, state, edge_cad, edge_other, g, params);
        CHECK(std::abs(s.total - (s.lambda * s.i_cad + (1.0 - s.lambda) * s.i_recon + s.dispersion)) <
              1e-12);
        CHECK(std::isfinite(s.total));
        CHECK(s.dispersion > 0.0);
        CHECK(s.dispersion <= 1.0);
      }
    }
  }
  SUBCASE("selected candidates are rejected") {
    CHECK_THROWS_AS(objective(3, state, edge_cad, edge_cad, g, params), std::invalid_argument);
  }
}

TEST_CASE("alignment scale") {
  CHECK(alignment_scale(std::vector<double>{0.5, 2.0, 1.0}) == 2.0);
  CHECK(alignment_scale(std::vector<double>{0.0, 0.0}) == 1.0);
}
