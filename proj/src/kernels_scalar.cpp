// Scalar reference kernels. The arithmetic here is the contract: the SIMD
// backends replay the same operations per lane (same order, no FMA), so the
// equivalence tests can require bit-identical ray casts and clips.
#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

namespace caneflow::kern {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Candidate selection mirrors _mm256_max_pd: (a > b) ? a : b.
inline double pick_max(double a, double b) { return a > b ? a : b; }
}  // namespace

void raycast_max_z_scalar(const CylinderField& field, const double* xs, const double* ys,
                          std::size_t n, double* out) {
  const std::size_t m = field.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double px = xs[i];
    const double py = ys[i];
    double best = kNegInf;
    for (std::size_t j = 0; j < m; ++j) {
      const double mx = px - field.cx[j];
      const double my = py - field.cy[j];
      const double mz = -field.cz[j];
      const double ax = field.ax[j];
      const double ay = field.ay[j];
      const double az = field.az[j];
      const double h = field.half_len[j];
      const double r = field.radius[j];

      const double ma = mx * ax + my * ay + mz * az;
      const double mm = mx * mx + my * my + mz * mz;
      const double a_coef = 1.0 - az * az;
      const double b_half = mz - ma * az;
      const double c_coef = mm - ma * ma - r * r;
      const double disc = b_half * b_half - a_coef * c_coef;
      const double sq = std::sqrt(disc);

      // Lateral wall: larger quadratic root, restricted to the axial span.
      // Degenerate axes (a_coef ~ 0) fail the span check via inf/NaN.
      const double t_lat = (sq - b_half) / a_coef;
      const double s_lat = ma + t_lat * az;
      const bool lat_ok = (disc >= 0.0) && (s_lat <= h) && (s_lat >= -h);
      best = pick_max(best, lat_ok ? t_lat : kNegInf);

      // End caps: plane hit plus radial bound. Horizontal axes make t_cap
      // inf/NaN and the radial check rejects them.
      const double t_cap_p = (h - ma) / az;
      const double wx_p = mx - h * ax;
      const double wy_p = my - h * ay;
      const double wz_p = mz + t_cap_p - h * az;
      const double rad_p = wx_p * wx_p + wy_p * wy_p + wz_p * wz_p;
      best = pick_max(best, (rad_p <= r * r) ? t_cap_p : kNegInf);

      const double t_cap_m = (-h - ma) / az;
      const double wx_m = mx + h * ax;
      const double wy_m = my + h * ay;
      const double wz_m = mz + t_cap_m + h * az;
      const double rad_m = wx_m * wx_m + wy_m * wy_m + wz_m * wz_m;
      best = pick_max(best, (rad_m <= r * r) ? t_cap_m : kNegInf);
    }
    out[i] = pick_max(best, 0.0);
  }
}

std::size_t clip_points_scalar(const double* xs, const double* ys, const double* zs,
                               std::size_t n, const RoiSpec& roi, double* ox, double* oy,
                               double* oz) {
  const double x1 = roi.x0 + roi.width;
  const double y1 = roi.y0 + roi.length;
  std::size_t w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    const double y = ys[i];
    const double z = zs[i] - roi.plane_height;
    const bool keep = x >= roi.x0 && x <= x1 && y >= roi.y0 && y <= y1;
    if (keep) {
      ox[w] = x;
      oy[w] = y;
      oz[w] = z > 0.0 ? z : 0.0;
      ++w;
    }
  }
  return w;
}

double sum_scalar(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += v[i];
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace caneflow::kern
