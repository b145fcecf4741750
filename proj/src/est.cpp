#include "caneflow/est.hpp"

#include <algorithm>
#include <cmath>

#include "caneflow/errors.hpp"
#include "caneflow/kernels.hpp"

namespace caneflow::est {
namespace {

std::size_t grid_cells(double extent, double cell) {
  const double n = std::ceil(extent / cell - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

std::size_t cell_index(double coord, double origin, double cell, std::size_t n) {
  const double f = std::floor((coord - origin) / cell);
  if (f < 0.0) return 0;
  const auto i = static_cast<std::size_t>(f);
  return std::min(i, n - 1);
}

double percentile_sorted(const std::vector<double>& sorted, double pct) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double rank = pct / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

const char* quality_name(FrameQuality q) {
  switch (q) {
    case FrameQuality::ok: return "ok";
    case FrameQuality::low_light: return "low_light";
    case FrameQuality::empty: return "empty";
  }
  return "unknown";
}

void validate(const EstimatorParams& p) {
  if (!(p.roi.width > 0.0) || !(p.roi.length > 0.0))
    throw Error(ErrorCategory::config, "estimator roi must have positive extent");
  if (!(p.cell_size > 0.0))
    throw Error(ErrorCategory::config, "cell_size must be positive");
  if (p.cell_size > p.roi.width || p.cell_size > p.roi.length)
    throw Error(ErrorCategory::config, "cell_size exceeds roi extent");
  if (!(p.percentile >= 0.0) || !(p.percentile <= 100.0))
    throw Error(ErrorCategory::config, "percentile must be in [0, 100]");
  if (!(p.lux_gate >= 0.0))
    throw Error(ErrorCategory::config, "lux_gate must be non-negative");
  if (!(p.min_height >= 0.0))
    throw Error(ErrorCategory::config, "min_height must be non-negative");
  if (!(p.empty_epsilon >= 0.0))
    throw Error(ErrorCategory::config, "empty_epsilon must be non-negative");
}

std::size_t clip_to_roi(const PointCloudFrame& frame, const RoiSpec& roi,
                        std::vector<double>& xs, std::vector<double>& ys,
                        std::vector<double>& zs) {
  const std::size_t n = frame.size();
  xs.resize(n);
  ys.resize(n);
  zs.resize(n);
  const std::size_t kept = kern::clip_points(frame.xs.data(), frame.ys.data(),
                                             frame.zs.data(), n, roi, xs.data(),
                                             ys.data(), zs.data());
  xs.resize(kept);
  ys.resize(kept);
  zs.resize(kept);
  return kept;
}

FrameQuality lighting_gate(double lux, double gate) {
  return lux < gate ? FrameQuality::low_light : FrameQuality::ok;
}

HeightGrid rasterize(const double* xs, const double* ys, const double* zs,
                     std::size_t n, const EstimatorParams& p) {
  validate(p);
  HeightGrid g;
  g.roi = p.roi;
  g.cell_size = p.cell_size;
  g.nx = grid_cells(p.roi.width, p.cell_size);
  g.ny = grid_cells(p.roi.length, p.cell_size);
  const std::size_t cells = g.nx * g.ny;
  g.heights.assign(cells, 0.0);
  g.occupancy.assign(cells, 0);

  std::vector<std::vector<double>> bins(cells);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ix = cell_index(xs[i], p.roi.x0, p.cell_size, g.nx);
    const std::size_t iy = cell_index(ys[i], p.roi.y0, p.cell_size, g.ny);
    bins[iy * g.nx + ix].push_back(zs[i]);
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (bins[c].empty()) continue;
    std::sort(bins[c].begin(), bins[c].end());
    g.heights[c] = percentile_sorted(bins[c], p.percentile);
    g.occupancy[c] = static_cast<std::uint32_t>(bins[c].size());
  }

  // Single pass: vacant cells take the mean of occupied 8-neighbors from the
  // pre-fill occupancy, or stay at bare elevator level.
  std::vector<double> filled = g.heights;
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      const std::size_t c = iy * g.nx + ix;
      if (g.occupancy[c] > 0) continue;
      double sum = 0.0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto jx = static_cast<long long>(ix) + dx;
          const auto jy = static_cast<long long>(iy) + dy;
          if (jx < 0 || jy < 0 || jx >= static_cast<long long>(g.nx) ||
              jy >= static_cast<long long>(g.ny))
            continue;
          const std::size_t nb = static_cast<std::size_t>(jy) * g.nx +
                                 static_cast<std::size_t>(jx);
          if (g.occupancy[nb] == 0) continue;
          sum += g.heights[nb];
          ++cnt;
        }
      }
      if (cnt > 0) filled[c] = sum / cnt;
    }
  }
  g.heights = std::move(filled);

  if (p.min_height > 0.0)
    for (double& h : g.heights)
      if (h < p.min_height) h = 0.0;

  return g;
}

double integrated_raw(const HeightGrid& g) {
  return kern::sum(g.heights.data(), g.heights.size()) * g.cell_size * g.cell_size;
}

VolumeEstimate integrate_volume(const HeightGrid& g, double timestamp, double lux,
                                const EstimatorParams& p) {
  VolumeEstimate e;
  e.frame_timestamp = timestamp;
  e.raw_volume = integrated_raw(g);
  const bool empty = e.raw_volume < p.empty_epsilon;
  e.v_c = empty ? 0.0 : e.raw_volume / p.roi.length;
  if (lighting_gate(lux, p.lux_gate) == FrameQuality::low_light)
    e.quality = FrameQuality::low_light;
  else
    e.quality = empty ? FrameQuality::empty : FrameQuality::ok;
  return e;
}

VolumeEstimate estimate_frame(const PointCloudFrame& frame, const EstimatorParams& p) {
  validate(p);
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> zs;
  const std::size_t kept = clip_to_roi(frame, p.roi, xs, ys, zs);
  const HeightGrid g = rasterize(xs.data(), ys.data(), zs.data(), kept, p);
  VolumeEstimate e = integrate_volume(g, frame.timestamp, frame.lux, p);
  e.n_points_roi = kept;
  return e;
}

}  // namespace caneflow::est
