#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "caneflow/errors.hpp"
#include "caneflow/est.hpp"
#include "caneflow/kernels.hpp"
#include "caneflow/sim.hpp"

using namespace caneflow;

namespace {

// Frame with one point per cell center at the given uniform height.
PointCloudFrame uniform_frame(const RoiSpec& roi, double cell, double h) {
  PointCloudFrame f;
  f.lux = 6700.0;
  const auto nx = static_cast<std::size_t>(std::llround(roi.width / cell));
  const auto ny = static_cast<std::size_t>(std::llround(roi.length / cell));
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      f.push(roi.x0 + (static_cast<double>(ix) + 0.5) * cell,
             roi.y0 + (static_cast<double>(iy) + 0.5) * cell, h);
  return f;
}

est::EstimatorParams exact_params() {
  est::EstimatorParams p;
  p.min_height = 0.0;
  p.empty_epsilon = 0.0;
  return p;
}

}  // namespace

TEST_CASE("clip keeps inclusive boundary points and rebases z") {
  PointCloudFrame f;
  f.push(0.0, 0.0, 0.05);
  f.push(0.8, 0.24, 0.004);
  f.push(0.9, 0.1, 0.2);
  f.push(0.4, 0.25, 0.2);
  RoiSpec roi;
  roi.plane_height = 0.01;
  std::vector<double> xs, ys, zs;
  const std::size_t n = est::clip_to_roi(f, roi, xs, ys, zs);
  REQUIRE(n == 2);
  CHECK(zs[0] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(zs[1] == 0.0);  // below the plane clamps to zero
}

TEST_CASE("uniform plane integrates exactly") {
  est::EstimatorParams p = exact_params();
  p.roi = RoiSpec{0.0, 0.0, 1.0, 0.5, 0.0};
  const PointCloudFrame f = uniform_frame(p.roi, p.cell_size, 0.1);
  const est::VolumeEstimate v = est::estimate_frame(f, p);
  CHECK(v.raw_volume == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(v.v_c == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(v.quality == est::FrameQuality::ok);
  CHECK(v.n_points_roi == 50 * 25);
}

TEST_CASE("per-cell percentile interpolates linearly") {
  est::EstimatorParams p = exact_params();
  p.roi = RoiSpec{0.0, 0.0, 0.02, 0.02, 0.0};  // single cell
  p.percentile = 90.0;
  PointCloudFrame f;
  for (int i = 0; i < 10; ++i) f.push(0.01, 0.01, 0.01 * i);
  const est::HeightGrid g = est::rasterize(f.xs.data(), f.ys.data(), f.zs.data(),
                                           f.size(), p);
  REQUIRE(g.nx == 1);
  REQUIRE(g.ny == 1);
  CHECK(g.heights[0] == doctest::Approx(0.081).epsilon(1e-12));
  CHECK(g.occupancy[0] == 10);

  p.percentile = 50.0;
  const est::HeightGrid m = est::rasterize(f.xs.data(), f.ys.data(), f.zs.data(),
                                           f.size(), p);
  CHECK(m.heights[0] == doctest::Approx(0.045).epsilon(1e-12));
}

TEST_CASE("empty cells take the mean of occupied neighbors in one pass") {
  est::EstimatorParams p = exact_params();
  p.roi = RoiSpec{0.0, 0.0, 0.06, 0.06, 0.0};  // 3 x 3 grid
  PointCloudFrame f;
  for (std::size_t iy = 0; iy < 3; ++iy)
    for (std::size_t ix = 0; ix < 3; ++ix) {
      if (ix == 1 && iy == 1) continue;  // center cell left empty
      f.push(0.01 + 0.02 * static_cast<double>(ix),
             0.01 + 0.02 * static_cast<double>(iy), 0.1);
    }
  const est::HeightGrid g = est::rasterize(f.xs.data(), f.ys.data(), f.zs.data(),
                                           f.size(), p);
  CHECK(g.heights[1 * 3 + 1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g.occupancy[1 * 3 + 1] == 0);

  // A fully bare grid stays at zero: filling pulls only from occupied cells.
  const est::HeightGrid bare = est::rasterize(nullptr, nullptr, nullptr, 0, p);
  for (double h : bare.heights) CHECK(h == 0.0);
}

TEST_CASE("minimum height cut zeroes near-bare cells") {
  est::EstimatorParams p;
  p.roi = RoiSpec{0.0, 0.0, 0.04, 0.02, 0.0};  // two cells
  p.min_height = 0.02;
  p.empty_epsilon = 0.0;
  PointCloudFrame f;
  f.push(0.01, 0.01, 0.015);
  f.push(0.03, 0.01, 0.025);
  const est::HeightGrid g = est::rasterize(f.xs.data(), f.ys.data(), f.zs.data(),
                                           f.size(), p);
  CHECK(g.heights[0] == 0.0);
  CHECK(g.heights[1] == doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("empty and low light qualities") {
  est::EstimatorParams p;
  PointCloudFrame none;
  none.lux = 6700.0;
  est::VolumeEstimate v = est::estimate_frame(none, p);
  CHECK(v.quality == est::FrameQuality::empty);
  CHECK(v.v_c == 0.0);

  // The lighting flag takes precedence over emptiness.
  none.lux = 700.0;
  v = est::estimate_frame(none, p);
  CHECK(v.quality == est::FrameQuality::low_light);
  CHECK(v.v_c == 0.0);

  CHECK(est::lighting_gate(2700.0, 2700.0) == est::FrameQuality::ok);
  CHECK(est::lighting_gate(2699.99, 2700.0) == est::FrameQuality::low_light);
  CHECK(est::lighting_gate(700.0, 2700.0) == est::FrameQuality::low_light);

  PointCloudFrame dim = uniform_frame(p.roi, p.cell_size, 0.1);
  dim.lux = 700.0;
  v = est::estimate_frame(dim, p);
  CHECK(v.quality == est::FrameQuality::low_light);
  CHECK(v.v_c > 0.0);  // flagged but still measured

  // Far below the empty epsilon everything reads as empty, exactly zero.
  PointCloudFrame faint = uniform_frame(p.roi, p.cell_size, 0.0);
  est::EstimatorParams strict = p;
  strict.min_height = 0.02;
  strict.empty_epsilon = 2e-5;
  v = est::estimate_frame(faint, strict);
  CHECK(v.quality == est::FrameQuality::empty);
  CHECK(v.v_c == 0.0);
}

TEST_CASE("doubling heights doubles the raw volume exactly") {
  est::EstimatorParams p = exact_params();
  sim::SimParams sp;
  sp.roi = RoiSpec{0.0, 0.0, 0.8, 0.24, 0.0};
  sp.noise_sigma = 0.0;
  sim::SimScenario sc;
  sc.rng_seed = 3;
  const sim::PackedBed bed = sim::pack_billets(sc, 0.02, sp);
  PointCloudFrame f = sim::render_point_cloud(bed, sim::LightingCondition{6700.0}, 5, sp);
  const est::VolumeEstimate v1 = est::estimate_frame(f, p);
  for (double& z : f.zs) z *= 2.0;
  const est::VolumeEstimate v2 = est::estimate_frame(f, p);
  CHECK(v2.raw_volume == 2.0 * v1.raw_volume);
}

TEST_CASE("translation by one cell pitch leaves the integral unchanged") {
  est::EstimatorParams p = exact_params();
  PointCloudFrame f = uniform_frame(p.roi, p.cell_size, 0.12);
  const est::VolumeEstimate v1 = est::estimate_frame(f, p);
  for (double& y : f.ys) y += p.cell_size;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.ys[i] > p.roi.y0 + p.roi.length) f.ys[i] -= p.roi.length;  // wrap
  }
  const est::VolumeEstimate v2 = est::estimate_frame(f, p);
  CHECK(v2.raw_volume == doctest::Approx(v1.raw_volume).epsilon(1e-12));
}

TEST_CASE("more material never reads as less") {
  kern::select_best_backend();
  est::EstimatorParams p = exact_params();
  sim::SimParams sp;
  sp.roi = RoiSpec{0.0, 0.0, 0.8, 0.24, 0.0};
  sp.noise_sigma = 0.0;
  sp.point_spacing = 0.01;
  sim::SimScenario sc;
  sc.rng_seed = 8;
  double prev = -1.0;
  for (double target : {0.004, 0.008, 0.013, 0.019, 0.026}) {
    const sim::PackedBed bed = sim::pack_billets(sc, target, sp);
    const PointCloudFrame f =
        sim::render_point_cloud(bed, sim::LightingCondition{6700.0}, 5, sp);
    const est::VolumeEstimate v = est::estimate_frame(f, p);
    CHECK(v.v_c > prev);
    prev = v.v_c;
  }
}

TEST_CASE("sensor noise moves cell heights by under a centimeter rms") {
  kern::select_best_backend();
  sim::SimParams sp;
  sp.roi = RoiSpec{0.0, 0.0, 0.8, 0.24, 0.0};
  sp.point_spacing = 0.004;  // 25 points per 2 cm cell
  sim::SimScenario sc;
  sc.rng_seed = 21;
  const sim::PackedBed bed = sim::pack_billets(sc, 0.02, sp);

  sp.noise_sigma = 0.0;
  const PointCloudFrame clean =
      sim::render_point_cloud(bed, sim::LightingCondition{6700.0}, 5, sp);
  sp.noise_sigma = 0.005;
  const PointCloudFrame noisy =
      sim::render_point_cloud(bed, sim::LightingCondition{6700.0}, 5, sp);

  est::EstimatorParams p = exact_params();
  p.percentile = 50.0;
  const auto grid_of = [&](const PointCloudFrame& f) {
    std::vector<double> xs, ys, zs;
    const std::size_t n = est::clip_to_roi(f, p.roi, xs, ys, zs);
    return est::rasterize(xs.data(), ys.data(), zs.data(), n, p);
  };
  const est::HeightGrid a = grid_of(clean);
  const est::HeightGrid b = grid_of(noisy);

  REQUIRE(a.heights.size() == b.heights.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < a.heights.size(); ++i) {
    const double err = b.heights[i] - a.heights[i];
    sq += err * err;
  }
  const double rms = std::sqrt(sq / static_cast<double>(a.heights.size()));
  CHECK(rms <= 0.01);
}

TEST_CASE("estimates stay within two percent of the envelope oracle") {
  kern::select_best_backend();
  sim::SimParams sp;
  sp.roi = RoiSpec{0.0, 0.0, 0.8, 0.24, 0.0};
  sp.noise_sigma = 0.0;
  sp.point_spacing = 0.005;
  est::EstimatorParams p = exact_params();
  p.cell_size = 0.01;
  p.percentile = 50.0;
  const double cap = sim::roi_capacity_solid(sp.roi, sp);
  for (std::uint64_t seed : {101u, 102u, 103u, 104u, 105u, 106u}) {
    sim::SimScenario sc;
    sc.rng_seed = seed;
    const double target = cap * (0.15 + 0.1 * static_cast<double>(seed - 101u));
    const sim::PackedBed bed = sim::pack_billets(sc, target, sp);
    const PointCloudFrame f =
        sim::render_point_cloud(bed, sim::LightingCondition{6700.0}, seed, sp);
    const est::VolumeEstimate v = est::estimate_frame(f, p);
    const double oracle = sim::envelope_volume(bed, sp.roi, 300000, seed + 7);
    CHECK(v.raw_volume == doctest::Approx(oracle).epsilon(0.02));
  }
}

TEST_CASE("estimator validation rejects bad configurations") {
  est::EstimatorParams p;
  p.cell_size = 0.5;  // larger than the 0.24 m ROI length
  CHECK_THROWS_AS(est::validate(p), Error);
  try {
    est::validate(p);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::config);
  }
  p = est::EstimatorParams{};
  p.percentile = 101.0;
  CHECK_THROWS_AS(est::validate(p), Error);
  p = est::EstimatorParams{};
  p.cell_size = 0.0;
  CHECK_THROWS_AS(est::validate(p), Error);
  p = est::EstimatorParams{};
  p.min_height = -0.01;
  CHECK_THROWS_AS(est::validate(p), Error);
}
