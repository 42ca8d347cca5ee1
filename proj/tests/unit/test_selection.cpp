#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "helpers.hpp"
#include "viewsel/selection.hpp"

using namespace viewsel;

namespace {

/// Small closed-loop setup shared by the policy tests.
struct Mini {
  ConeBeamGeometry geom = testutil::cube_geometry(16);
  AngleGrid grid = candidate_angles(16);
  Phantom phantom;
  std::shared_ptr<const DistanceMatrix> dmat;

  Mini() {
    auto spec = default_phantom_spec(geom.vol_shape(), geom.voxel_pitch(), 1);
    spec.pores.count = 0;
    phantom = make_phantom(spec);
    dmat = std::make_shared<const DistanceMatrix>(build_distance_matrix(phantom.cad, geom, grid));
  }

  MeasurementSource source(std::uint64_t noise_seed = 3) const {
    return MeasurementSource(phantom.truth, geom, grid, default_spectrum(), {}, noise_seed);
  }

  static SelectionConfig config() {
    SelectionConfig c;
    c.n_init = 2;
    c.budget = 6;
    c.loop_recon.iterations = 3;
    c.checkpoint_recon.iterations = 5;
    c.checkpoints = {2, 6};
    c.record_timing = false;
    return c;
  }
};

std::vector<ScoreBreakdown> totals(std::initializer_list<double> t) {
  std::vector<ScoreBreakdown> out;
  for (const double x : t) out.push_back({0, 0, 0, 0, x});
  return out;
}

}  // namespace

TEST_CASE("argmax over candidates") {
  const std::vector<std::size_t> cand{1, 4, 7, 9};
  SUBCASE("largest total wins") { CHECK(argmax_candidate(cand, totals({0.1, 0.9, 0.3, 0.5})) == 4); }
  SUBCASE("exact ties go to the smallest angle") {
    CHECK(argmax_candidate(cand, totals({0.5, 0.5, 0.5, 0.5})) == 1);
    CHECK(argmax_candidate(cand, totals({0.1, 0.7, 0.2, 0.7})) == 4);
  }
  SUBCASE("empty candidate set is an error") {
    CHECK_THROWS_AS(argmax_candidate({}, totals({})), std::invalid_argument);
  }
}

TEST_CASE("select_next_view") {
  const auto g = testutil::cube_geometry(12);
  const auto cad = testutil::blob_volume(g.vol_shape(), 1.0);
  const auto edges = canny_edges(cad);
  SelectionState state;
  state.grid = candidate_angles(4);
  state.dmat = std::make_shared<const DistanceMatrix>(build_distance_matrix(cad, g, state.grid));
  ObjectiveParams params;
  params.dispersion = auto_dispersion_params(*state.dmat);

  SUBCASE("one candidate left is returned whatever it scores") {
    state.selected = {0, 1, 3};
    state.step = 3;
    CHECK(select_next_view(state, edges, edges, g, params) == 2);
  }
  SUBCASE("all candidates tie: smallest angle") {
    const EdgeVolume none(g.vol_shape(), 1.0, std::vector<std::uint8_t>(g.vol_shape().size(), 0));
    CHECK(select_next_view(state, none, none, g, params) == 0);
  }
  SUBCASE("returned candidate scores at least as high as every other") {
    state.selected = {1};
    state.step = 1;
    params.lambda = 0.4;
    const auto pick = select_next_view(state, edges, edges, g, params);
    const double best = objective(pick, state, edges, edges, g, params).total;
    for (const auto c : state.candidates()) {
      CHECK(best >= objective(c, state, edges, edges, g, params).total);
    }
    CHECK(!state.is_selected(pick));
  }
  SUBCASE("nothing left to choose") {
    state.selected = {0, 1, 2, 3};
    CHECK_THROWS_AS(select_next_view(state, edges, edges, g, params), std::invalid_argument);
  }
}

TEST_CASE("uniform indices") {
  const auto four = uniform_indices(4, 4);
  CHECK(four == std::vector<std::size_t>{0, 1, 2, 3});
  const auto q = uniform_indices(4, 360);
  CHECK(q == std::vector<std::size_t>{0, 90, 180, 270});
  // round(k * 200 / 35) mod 200
  const std::vector<std::size_t> expect{0,   6,   11,  17,  23,  29,  34,  40,  46,  51,  57,  63,
                                        69,  74,  80,  86,  91,  97,  103, 109, 114, 120, 126, 131,
                                        137, 143, 149, 154, 160, 166, 171, 177, 183, 189, 194};
  const auto u = uniform_indices(35, 200);
  CHECK(u == expect);
  CHECK(std::set<std::size_t>(u.begin(), u.end()).size() == 35);
  CHECK_THROWS(uniform_indices(0, 10));
  CHECK_THROWS(uniform_indices(11, 10));
}

TEST_CASE("wrap180") {
  CHECK(wrap180(185.0) == doctest::Approx(5.0));
  CHECK(wrap180(180.0) == doctest::Approx(0.0));
  CHECK(wrap180(-10.0) == doctest::Approx(10.0));
  CHECK(wrap180(90.0) == doctest::Approx(90.0));
  CHECK(wrap180(350.0) == doctest::Approx(10.0));
}

TEST_CASE("mask alignment") {
  const int n = 21;
  std::vector<std::uint8_t> slice(n * n, 0);
  for (int i = 2; i < n - 2; ++i) slice[10 * n + i] = 1;  // horizontal line, 17 pixels
  CHECK(mask_alignment(slice, n, n, 0.0, 3.0) == 17.0);
  CHECK(mask_alignment(slice, n, n, 180.0, 3.0) == 17.0);
  CHECK(mask_alignment(slice, n, n, 90.0, 3.0) <= 3.0);
  const std::vector<std::uint8_t> empty(n * n, 0);
  for (const double a : {0.0, 33.0, 271.0}) CHECK(mask_alignment(empty, n, n, a, 3.0) == 0.0);
}

TEST_CASE("uniform policy") {
  Mini m;
  auto src = m.source();
  auto cfg = Mini::config();
  cfg.budget = 4;
  cfg.checkpoints = {4};
  const auto t = run_uniform(src, cfg);
  REQUIRE(t.records.size() == 4);
  std::vector<double> angles;
  for (const auto& r : t.records) angles.push_back(r.angle);
  CHECK(angles == std::vector<double>{0.0, 90.0, 180.0, 270.0});
  CHECK(t.records.back().quality.has_value());
}

TEST_CASE("epvs with budget equal to n_init only initializes") {
  Mini m;
  auto src = m.source();
  auto cfg = Mini::config();
  cfg.budget = cfg.n_init;
  cfg.checkpoints = {};
  const auto cad = prepare_cad_model(m.phantom.cad, m.geom, m.grid, cfg.canny, cfg.softmax, m.dmat);
  const auto t = run_epvs(src, cad, cfg);
  CHECK(t.records.size() == 2);
  for (const auto& r : t.records) {
    CHECK(!r.recon_driven);
    REQUIRE(r.scores.has_value());
    CHECK(r.scores->lambda == 1.0);
  }
}

TEST_CASE("epvs run: unique views, recon-driven steps, checkpoints") {
  Mini m;
  auto src = m.source();
  auto cfg = Mini::config();
  const auto cad = prepare_cad_model(m.phantom.cad, m.geom, m.grid, cfg.canny, cfg.softmax, m.dmat);
  const auto t = run_epvs(src, cad, cfg);
  REQUIRE(t.records.size() == 6);
  const auto sel = t.selected();
  CHECK(std::set<std::size_t>(sel.begin(), sel.end()).size() == 6);
  int driven = 0;
  for (const auto& r : t.records) {
    driven += r.recon_driven;
    REQUIRE(r.scores.has_value());
    const auto& s = *r.scores;
    CHECK(std::abs(s.total - (s.lambda * s.i_cad + (1 - s.lambda) * s.i_recon + s.dispersion)) < 1e-12);
    CHECK(!r.select_seconds.has_value());
  }
  CHECK(driven == 4);
  CHECK(t.at_step(2)->quality.has_value());
  CHECK(t.at_step(6)->quality.has_value());
  CHECK(!t.at_step(4)->quality.has_value());
  CHECK(t.records.back().scores->lambda == 0.0);
}

TEST_CASE("epvs initialization is deterministic and timing is recorded when asked") {
  Mini m;
  auto cfg = Mini::config();
  cfg.record_timing = true;
  cfg.checkpoints = {};
  const auto cad = prepare_cad_model(m.phantom.cad, m.geom, m.grid, cfg.canny, cfg.softmax, m.dmat);
  auto s1 = m.source();
  auto s2 = m.source();
  const auto a = run_epvs(s1, cad, cfg);
  const auto b = run_epvs(s2, cad, cfg);
  CHECK(a.selected() == b.selected());
  for (const auto& r : a.records) CHECK(r.select_seconds.has_value());
  CHECK(a.mean_select_seconds().has_value());
}

TEST_CASE("cad-only EPVS ignores the measurements") {
  Mini m;
  auto cfg = Mini::config();
  cfg.cad_only = true;
  cfg.checkpoints = {};
  const auto cad = prepare_cad_model(m.phantom.cad, m.geom, m.grid, cfg.canny, cfg.softmax, m.dmat);
  auto s1 = m.source(3);
  const auto a = run_epvs(s1, cad, cfg);
  // Different object and noise: same selections.
  Volume other = testutil::blob_volume(m.geom.vol_shape(), 1.0);
  auto s2 = MeasurementSource(other, m.geom, m.grid, default_spectrum(), {}, 12345);
  const auto b = run_epvs(s2, cad, cfg);
  CHECK(a.selected() == b.selected());
}

TEST_CASE("eavs run") {
  Mini m;
  auto src = m.source();
  auto cfg = Mini::config();
  const auto t = run_eavs(src, cfg);
  REQUIRE(t.records.size() == 6);
  const auto sel = t.selected();
  CHECK(std::set<std::size_t>(sel.begin(), sel.end()).size() == 6);
  // Initialization is uniform.
  CHECK(t.records[0].angle == 0.0);
  CHECK(t.records[1].angle == 180.0);
  for (std::size_t i = 2; i < t.records.size(); ++i) {
    CHECK(t.records[i].recon_driven);
    REQUIRE(t.records[i].scores.has_value());
    CHECK(t.records[i].scores->i_recon >= 0.0);
    CHECK(t.records[i].scores->i_recon <= 1.0);
  }
}

TEST_CASE("no policy ever picks an angle twice in randomized mini runs") {
  // Pure selection loop on random scores and a random distance matrix.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int run = 0; run < 200; ++run) {
    const std::size_t n = 16;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = u(rng) + 1e-3;
    const DistanceMatrix dm(n, d);
    const auto disp = auto_dispersion_params(dm);
    std::vector<double> cad(n), rec(n);
    for (auto& x : cad) x = u(rng);
    for (auto& x : rec) x = u(rng);
    std::vector<std::size_t> selected;
    const int n_init = 1 + run % 4;
    const int budget = n_init + 1 + run % 11;
    for (int step = 1; step <= budget; ++step) {
      std::vector<std::size_t> cand;
      for (std::size_t i = 0; i < n; ++i)
        if (std::find(selected.begin(), selected.end(), i) == selected.end()) cand.push_back(i);
      const double lam = step <= n_init ? 1.0 : lambda_schedule(step, n_init, budget);
      std::vector<ScoreBreakdown> s;
      for (const auto c : cand) s.push_back(combine_scores(cad[c], rec[c], dispersion_score(c, selected, dm, disp), lam));
      const auto pick = argmax_candidate(cand, s);
      CHECK(std::find(selected.begin(), selected.end(), pick) == selected.end());
      selected.push_back(pick);
    }
  }
}

TEST_CASE("selection config validation names the field") {
  SelectionConfig c;
  c.budget = 20;
  CHECK_THROWS_WITH_AS(c.validate(10), doctest::Contains("budget"), std::invalid_argument);
  c.budget = 4;
  c.n_init = 5;
  CHECK_THROWS_WITH_AS(c.validate(10), doctest::Contains("budget"), std::invalid_argument);
  c.n_init = 0;
  CHECK_THROWS_WITH_AS(c.validate(10), doctest::Contains("n_init"), std::invalid_argument);
  c.n_init = 2;
  c.checkpoints = {7};
  CHECK_THROWS_WITH_AS(c.validate(10), doctest::Contains("checkpoints"), std::invalid_argument);
}
