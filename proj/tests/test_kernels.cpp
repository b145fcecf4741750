#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "caneflow/errors.hpp"
#include "caneflow/kernels.hpp"
#include "caneflow/rng.hpp"

using namespace caneflow;

namespace {

kern::CylinderField random_field(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  kern::CylinderField f;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, 3.141592653589793);
    f.push(Vec3{rng.uniform(0.0, 0.8), rng.uniform(0.0, 0.4), rng.uniform(0.02, 0.3)},
           Vec3{std::cos(theta), std::sin(theta), 0.0}, rng.uniform(0.05, 0.25),
           rng.uniform(0.02, 0.06));
  }
  // Degenerate orientations the mask logic must handle.
  f.push(Vec3{0.4, 0.2, 0.1}, Vec3{0.0, 0.0, 1.0}, 0.2, 0.04);
  f.push(Vec3{0.1, 0.1, 0.05}, Vec3{1.0, 0.0, 0.0}, 0.2, 0.04);
  return f;
}

std::vector<double> random_values(std::uint64_t seed, std::size_t n, double lo,
                                  double hi) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("backend selection and names") {
  CHECK(kern::backend_supported(kern::Backend::scalar));
  CHECK(std::string(kern::backend_name(kern::Backend::scalar)) == "scalar");
  CHECK(std::string(kern::backend_name(kern::Backend::avx2)) == "avx2");

  kern::select_backend(kern::Backend::scalar);
  CHECK(kern::active_backend() == kern::Backend::scalar);

  kern::select_best_backend();
  if (kern::backend_supported(kern::Backend::avx2))
    CHECK(kern::active_backend() == kern::Backend::avx2);
  else
    CHECK_THROWS_AS(kern::select_backend(kern::Backend::avx2), Error);
}

TEST_CASE("raycast analytic single cylinder") {
  kern::select_backend(kern::Backend::scalar);
  kern::CylinderField f;
  // Horizontal billet along x, resting on the plane: center height equals the
  // radius, so the apex sits one diameter up.
  f.push(Vec3{0.5, 0.2, 0.02}, Vec3{1.0, 0.0, 0.0}, 0.2, 0.04);

  double xs[6] = {0.5, 0.5, 0.5, 0.5, 0.61, 0.41};
  double ys[6] = {0.2, 0.21, 0.2201, 0.25, 0.2, 0.2};
  double out[6];
  kern::raycast_max_z(f, xs, ys, 6, out);

  CHECK(out[0] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.02 + std::sqrt(0.02 * 0.02 - 0.01 * 0.01))
                      .epsilon(1e-12));
  CHECK(out[2] == 0.0);  // just past the lateral radius
  CHECK(out[3] == 0.0);
  CHECK(out[4] == 0.0);  // past the end cap
  CHECK(out[5] == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("raycast vertical cylinder end cap") {
  kern::select_backend(kern::Backend::scalar);
  kern::CylinderField f;
  f.push(Vec3{0.3, 0.3, 0.1}, Vec3{0.0, 0.0, 1.0}, 0.2, 0.05);
  double xs[3] = {0.3, 0.32, 0.33};
  double ys[3] = {0.3, 0.3, 0.3};
  double out[3];
  kern::raycast_max_z(f, xs, ys, 3, out);
  CHECK(out[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(out[2] == 0.0);
}

TEST_CASE("raycast empty field returns zero") {
  kern::select_backend(kern::Backend::scalar);
  kern::CylinderField f;
  double xs[2] = {0.1, 0.2};
  double ys[2] = {0.1, 0.2};
  double out[2] = {1.0, 1.0};
  kern::raycast_max_z(f, xs, ys, 2, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("raycast scalar and avx2 are bit identical") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const kern::CylinderField f = random_field(seed, 120);
    const std::size_t n = 1003;  // odd tail exercises the remainder loop
    const auto xs = random_values(seed + 100, n, -0.1, 0.9);
    const auto ys = random_values(seed + 200, n, -0.1, 0.5);
    std::vector<double> a(n), b(n);

    kern::select_backend(kern::Backend::scalar);
    kern::raycast_max_z(f, xs.data(), ys.data(), n, a.data());
    kern::select_backend(kern::Backend::avx2);
    kern::raycast_max_z(f, xs.data(), ys.data(), n, b.data());

    CHECK(bitwise_equal(a, b));
  }
}

TEST_CASE("clip scalar and avx2 are bit identical") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  RoiSpec roi;
  roi.x0 = 0.1;
  roi.y0 = 0.05;
  roi.width = 0.6;
  roi.length = 0.3;
  roi.plane_height = 0.02;
  const std::size_t n = 2001;
  const auto xs = random_values(31, n, -0.2, 1.0);
  const auto ys = random_values(32, n, -0.2, 0.6);
  const auto zs = random_values(33, n, -0.05, 0.4);

  std::vector<double> ax(n), ay(n), az(n), bx(n), by(n), bz(n);
  kern::select_backend(kern::Backend::scalar);
  const std::size_t na =
      kern::clip_points(xs.data(), ys.data(), zs.data(), n, roi, ax.data(), ay.data(), az.data());
  kern::select_backend(kern::Backend::avx2);
  const std::size_t nb =
      kern::clip_points(xs.data(), ys.data(), zs.data(), n, roi, bx.data(), by.data(), bz.data());

  REQUIRE(na == nb);
  ax.resize(na); bx.resize(na);
  ay.resize(na); by.resize(na);
  az.resize(na); bz.resize(na);
  CHECK(bitwise_equal(ax, bx));
  CHECK(bitwise_equal(ay, by));
  CHECK(bitwise_equal(az, bz));
}

TEST_CASE("clip boundary membership and z rebase") {
  kern::select_backend(kern::Backend::scalar);
  RoiSpec roi;
  roi.width = 0.8;
  roi.length = 0.24;
  roi.plane_height = 0.01;
  double xs[4] = {0.0, 0.8, 0.81, 0.4};
  double ys[4] = {0.0, 0.24, 0.1, -0.001};
  double zs[4] = {0.05, 0.005, 0.2, 0.2};
  double ox[4], oy[4], oz[4];
  const std::size_t kept = kern::clip_points(xs, ys, zs, 4, roi, ox, oy, oz);
  REQUIRE(kept == 2);  // both corners inclusive, outside points dropped
  CHECK(ox[0] == 0.0);
  CHECK(oz[0] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(oz[1] == 0.0);  // below the plane clamps to zero
}

TEST_CASE("clip supports in-place operation") {
  kern::select_backend(kern::Backend::scalar);
  RoiSpec roi;
  roi.width = 1.0;
  roi.length = 1.0;
  std::vector<double> xs = random_values(41, 513, -0.5, 1.5);
  std::vector<double> ys = random_values(42, 513, -0.5, 1.5);
  std::vector<double> zs = random_values(43, 513, 0.0, 0.3);
  auto cx = xs, cy = ys, cz = zs;
  std::vector<double> ox(513), oy(513), oz(513);
  const std::size_t a =
      kern::clip_points(xs.data(), ys.data(), zs.data(), 513, roi, ox.data(), oy.data(), oz.data());
  const std::size_t b =
      kern::clip_points(cx.data(), cy.data(), cz.data(), 513, roi, cx.data(), cy.data(), cz.data());
  REQUIRE(a == b);
  cx.resize(a); ox.resize(a);
  CHECK(bitwise_equal(cx, ox));
}

TEST_CASE("reductions agree across backends within tolerance") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  const std::size_t n = 10007;
  const auto v = random_values(51, n, -1.0, 1.0);
  const auto w = random_values(52, n, -1.0, 1.0);

  kern::select_backend(kern::Backend::scalar);
  const double s1 = kern::sum(v.data(), n);
  const double d1 = kern::dot(v.data(), w.data(), n);
  kern::select_backend(kern::Backend::avx2);
  const double s2 = kern::sum(v.data(), n);
  const double d2 = kern::dot(v.data(), w.data(), n);

  CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  CHECK(kern::sum(v.data(), 0) == 0.0);
  CHECK(kern::dot(v.data(), w.data(), 0) == 0.0);
}

TEST_CASE("sum matches a simple accumulator") {
  kern::select_best_backend();
  std::vector<double> v{1.0, 2.5, -0.5, 4.0, 0.25, 8.0, -2.25};
  CHECK(kern::sum(v.data(), v.size()) == doctest::Approx(13.0).epsilon(1e-15));
  CHECK(kern::dot(v.data(), v.data(), v.size()) ==
        doctest::Approx(1.0 + 6.25 + 0.25 + 16.0 + 0.0625 + 64.0 + 5.0625).epsilon(1e-15));
}
