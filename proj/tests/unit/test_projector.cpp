#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "helpers.hpp"
#include "viewsel/parallel.hpp"
#include "viewsel/projector.hpp"

using namespace viewsel;

namespace {

// Slab-method chord length of segment a->b through the box [lo, hi]^3.
double slab_chord(std::array<double, 3> a, std::array<double, 3> b, double lo, double hi) {
  double t0 = 0.0;
  double t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = b[ax] - a[ax];
    if (std::abs(d) < 1e-15) {
      if (a[ax] < lo || a[ax] > hi) return 0.0;
      continue;
    }
    double ta = (lo - a[ax]) / d;
    double tb = (hi - a[ax]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0) return 0.0;
  const double len = std::sqrt((b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]) +
                               (b[2] - a[2]) * (b[2] - a[2]));
  return (t1 - t0) * len;
}

std::array<double, 3> pixel_position(const ConeBeamGeometry& g, int r, int c, double angle) {
  const double phi = -angle * std::numbers::pi / 180.0;
  const double u = (c - 0.5 * (g.det_cols() - 1)) * g.det_pitch();
  const double v = (r - 0.5 * (g.det_rows() - 1)) * g.det_pitch();
  const double off = g.sdd() - g.sod();
  return {-off * std::cos(phi) - u * std::sin(phi), -off * std::sin(phi) + u * std::cos(phi), v};
}

std::array<double, 3> source_position(const ConeBeamGeometry& g, double angle) {
  const double phi = -angle * std::numbers::pi / 180.0;
  return {g.sod() * std::cos(phi), g.sod() * std::sin(phi), 0.0};
}

}  // namespace

TEST_CASE("zero volume projects to zero") {
  const auto g = testutil::cube_geometry(12);
  const Volume v(g.vol_shape(), g.voxel_pitch());
  const auto p = forward_project(v, g, 33.0);
  CHECK(std::all_of(p.data().begin(), p.data().end(), [](float x) { return x == 0.0f; }));
  CHECK(p.angle() == 33.0);
}

TEST_CASE("zero projection backprojects to zero") {
  const auto g = testutil::cube_geometry(12);
  const Projection p(g.det_rows(), g.det_cols(), 0.0);
  const auto v = back_project(p, g, 0.0);
  CHECK(std::all_of(v.data().begin(), v.data().end(), [](float x) { return x == 0.0f; }));
}

TEST_CASE("forward projection is linear") {
  const auto g = testutil::cube_geometry(12);
  const auto v = testutil::random_volume(g.vol_shape(), 1.0, 5);
  Volume v2 = v;
  for (auto& x : v2.data()) x *= 2.0f;
  const auto p1 = forward_project(v, g, 47.0);
  const auto p2 = forward_project(v2, g, 47.0);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p2.data()[i] == doctest::Approx(2.0 * p1.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("central ray through a unit cube measures its side") {
  const int n = 32;
  const int side = 16;
  const ConeBeamGeometry g({200.0, 300.0, 64, 64, 1.0, {n, n, n}, 1.0});
  Volume v(g.vol_shape(), 1.0);
  const int lo = (n - side) / 2;
  for (int k = lo; k < lo + side; ++k)
    for (int j = lo; j < lo + side; ++j)
      for (int i = lo; i < lo + side; ++i) v(i, j, k) = 1.0f;
  const auto p = forward_project(v, g, 0.0);
  const int r = g.det_rows() / 2;
  const int c = g.det_cols() / 2;
  const double chord = slab_chord(source_position(g, 0.0), pixel_position(g, r, c, 0.0),
                                  -0.5 * side, 0.5 * side);
  CHECK(std::abs(chord - side) / side < 0.01);
  CHECK(std::abs(p(r, c) - chord) / chord < 0.01);
}

TEST_CASE("dot-product test") {
  const auto g = testutil::cube_geometry(16);
  for (int trial = 0; trial < 5; ++trial) {
    const double angle = 17.0 + 61.0 * trial;
    const auto x = testutil::random_volume(g.vol_shape(), 1.0, 100 + trial);
    const auto y = testutil::random_projection(g.det_rows(), g.det_cols(), angle, 200 + trial);
    const auto ax = forward_project(x, g, angle);
    const auto aty = back_project(y, g, angle);
    const double lhs = testutil::dot(ax.data(), y.data());
    const double rhs = testutil::dot(x.data(), aty.data());
    CHECK(std::abs(lhs - rhs) / (testutil::norm(ax.data()) * testutil::norm(y.data())) < 1e-5);
  }
}

TEST_CASE("single detector pixel backprojects into a thin tube") {
  const auto g = testutil::cube_geometry(16);
  const double angle = 23.0;
  Projection p(g.det_rows(), g.det_cols(), angle);
  const int r = g.det_rows() / 2 + 3;
  const int c = g.det_cols() / 2 - 2;
  p(r, c) = 1.0f;
  const auto v = back_project(p, g, angle);
  const auto s = source_position(g, angle);
  const auto d = pixel_position(g, r, c, angle);
  std::array<double, 3> dir{d[0] - s[0], d[1] - s[1], d[2] - s[2]};
  const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  for (auto& x : dir) x /= len;
  std::size_t nonzero = 0;
  double worst = 0.0;
  const auto& sh = g.vol_shape();
  for (int k = 0; k < sh.nz; ++k) {
    for (int j = 0; j < sh.ny; ++j) {
      for (int i = 0; i < sh.nx; ++i) {
        if (v(i, j, k) == 0.0f) continue;
        ++nonzero;
        const auto q = g.voxel_center(i, j, k);
        const std::array<double, 3> w{q[0] - s[0], q[1] - s[1], q[2] - s[2]};
        const double t = w[0] * dir[0] + w[1] * dir[1] + w[2] * dir[2];
        const double dist2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] - t * t;
        worst = std::max(worst, std::sqrt(std::max(0.0, dist2)));
      }
    }
  }
  CHECK(nonzero > 0);
  CHECK(nonzero < sh.size() / 20);
  // Trilinear support: a voxel contributes only when a sample lies within one voxel of it.
  CHECK(worst <= std::sqrt(3.0) * g.voxel_pitch());
}

TEST_CASE("projecting a rotated volume equals projecting at the shifted angle") {
  const int n = 24;
  const auto g = testutil::cube_geometry(n);
  const auto v = testutil::blob_volume(g.vol_shape(), 1.0);
  Volume rot(g.vol_shape(), 1.0);
  // 90 degree counter-clockwise rotation about z.
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) rot(i, j, k) = v(j, n - 1 - i, k);
  for (const double theta : {0.0, 30.0, 200.0}) {
    const auto a = forward_project(rot, g, theta);
    const auto b = forward_project(v, g, std::fmod(theta + 90.0, 360.0));
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      err += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
      ref += b.data()[i] * b.data()[i];
    }
    CHECK(std::sqrt(err / ref) < 0.02);
  }
}

TEST_CASE("non-negative inputs give non-negative outputs") {
  const auto g = testutil::cube_geometry(12);
  const auto x = testutil::random_volume(g.vol_shape(), 1.0, 3);
  const auto y = testutil::random_projection(g.det_rows(), g.det_cols(), 0.0, 4);
  const auto p = forward_project(x, g, 123.0);
  const auto b = back_project(y, g, 123.0);
  CHECK(*std::min_element(p.data().begin(), p.data().end()) >= 0.0f);
  CHECK(*std::min_element(b.data().begin(), b.data().end()) >= 0.0f);
}

TEST_CASE("results do not depend on the worker count") {
  const auto g = testutil::cube_geometry(16);
  const auto x = testutil::random_volume(g.vol_shape(), 1.0, 8);
  const auto y = testutil::random_projection(g.det_rows(), g.det_cols(), 0.0, 9);
  const int before = num_threads();
  set_num_threads(1);
  const auto p1 = forward_project(x, g, 71.0);
  const auto b1 = back_project(y, g, 71.0);
  set_num_threads(3);
  const auto p3 = forward_project(x, g, 71.0);
  const auto b3 = back_project(y, g, 71.0);
  set_num_threads(before);
  CHECK(p1 == p3);
  CHECK(b1 == b3);
  CHECK(back_project(y, g, 71.0) == b1);
}

TEST_CASE("shape mismatches are rejected") {
  const auto g = testutil::cube_geometry(12);
  const Volume wrong({12, 12, 11}, 1.0);
  CHECK_THROWS_AS(forward_project(wrong, g, 0.0), std::invalid_argument);
  const Projection bad(g.det_rows() + 1, g.det_cols(), 0.0);
  CHECK_THROWS_AS(back_project(bad, g, 0.0), std::invalid_argument);
}
