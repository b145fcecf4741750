// Per-frame crop volume estimation: clip a point cloud to the elevator ROI,
// rasterize surface heights on a grid with a per-cell percentile, and
// integrate to a volume per meter of elevator length.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "caneflow/types.hpp"

namespace caneflow::est {

enum class FrameQuality { ok, low_light, empty };

const char* quality_name(FrameQuality q);

struct EstimatorParams {
  RoiSpec roi{0.0, 0.0, 0.8, 0.24, 0.0};
  double cell_size = 0.02;    // m; should divide the ROI extents evenly
  double percentile = 90.0;   // per-cell surface percentile
  double lux_gate = 2700.0;   // frames below this are flagged low-light
  double min_height = 0.02;   // m, cells below this read as bare elevator
  double empty_epsilon = 2e-5;  // m^3, raw volume below this means empty
};

void validate(const EstimatorParams& p);

struct HeightGrid {
  RoiSpec roi;
  double cell_size = 0.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> heights;          // row-major, ny rows of nx
  std::vector<std::uint32_t> occupancy;  // point count per cell before filling
};

struct VolumeEstimate {
  double frame_timestamp = 0.0;
  double v_c = 0.0;         // m^3 per m of elevator length; 0 when empty
  double raw_volume = 0.0;  // m^3 over the ROI window as integrated
  FrameQuality quality = FrameQuality::empty;
  std::size_t n_points_roi = 0;
};

// Keeps points with (x, y) inside the ROI, clamping z below the elevator
// plane to 0. Returns compacted coordinate arrays.
std::size_t clip_to_roi(const PointCloudFrame& frame, const RoiSpec& roi,
                        std::vector<double>& xs, std::vector<double>& ys,
                        std::vector<double>& zs);

FrameQuality lighting_gate(double lux, double gate);

// Per-cell percentile of point heights; cells without points take the mean of
// their occupied 8-neighbors in a single pass, then the minimum-height cut
// zeroes anything indistinguishable from the bare elevator.
HeightGrid rasterize(const double* xs, const double* ys, const double* zs,
                     std::size_t n, const EstimatorParams& p);

// Raw volume over the grid: sum of cell heights times cell_size^2.
double integrated_raw(const HeightGrid& g);

VolumeEstimate integrate_volume(const HeightGrid& g, double timestamp, double lux,
                                const EstimatorParams& p);

VolumeEstimate estimate_frame(const PointCloudFrame& frame, const EstimatorParams& p);

}  // namespace caneflow::est
