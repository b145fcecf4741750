// AVX2 kernel variants. Four rays (or points) per iteration; every lane
// replays the scalar reference arithmetic (mul/add, no FMA), so ray casts and
// clips match the scalar backend bit-for-bit. Reductions use one vector
// accumulator and a fixed lane-combine order.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>
#include <limits>

#include "kernels_internal.hpp"

namespace caneflow::kern {

namespace {
const __m256d kNegInf4 = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
const __m256d kZero4 = _mm256_setzero_pd();
}  // namespace

void raycast_max_z_avx2(const CylinderField& field, const double* xs, const double* ys,
                        std::size_t n, double* out) {
  const std::size_t m = field.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d px = _mm256_loadu_pd(xs + i);
    const __m256d py = _mm256_loadu_pd(ys + i);
    __m256d best = kNegInf4;
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d mx = _mm256_sub_pd(px, _mm256_set1_pd(field.cx[j]));
      const __m256d my = _mm256_sub_pd(py, _mm256_set1_pd(field.cy[j]));
      const __m256d mz = _mm256_set1_pd(-field.cz[j]);
      const __m256d ax = _mm256_set1_pd(field.ax[j]);
      const __m256d ay = _mm256_set1_pd(field.ay[j]);
      const __m256d az = _mm256_set1_pd(field.az[j]);
      const __m256d h = _mm256_set1_pd(field.half_len[j]);
      const __m256d neg_h = _mm256_set1_pd(-field.half_len[j]);
      const __m256d r2 = _mm256_set1_pd(field.radius[j] * field.radius[j]);

      const __m256d ma = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(mx, ax), _mm256_mul_pd(my, ay)), _mm256_mul_pd(mz, az));
      const __m256d mm = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(mx, mx), _mm256_mul_pd(my, my)), _mm256_mul_pd(mz, mz));
      const __m256d a_coef = _mm256_sub_pd(_mm256_set1_pd(1.0), _mm256_mul_pd(az, az));
      const __m256d b_half = _mm256_sub_pd(mz, _mm256_mul_pd(ma, az));
      const __m256d c_coef = _mm256_sub_pd(_mm256_sub_pd(mm, _mm256_mul_pd(ma, ma)), r2);
      const __m256d disc =
          _mm256_sub_pd(_mm256_mul_pd(b_half, b_half), _mm256_mul_pd(a_coef, c_coef));
      const __m256d sq = _mm256_sqrt_pd(disc);

      const __m256d t_lat = _mm256_div_pd(_mm256_sub_pd(sq, b_half), a_coef);
      const __m256d s_lat = _mm256_add_pd(ma, _mm256_mul_pd(t_lat, az));
      __m256d lat_ok = _mm256_cmp_pd(disc, kZero4, _CMP_GE_OQ);
      lat_ok = _mm256_and_pd(lat_ok, _mm256_cmp_pd(s_lat, h, _CMP_LE_OQ));
      lat_ok = _mm256_and_pd(lat_ok, _mm256_cmp_pd(s_lat, neg_h, _CMP_GE_OQ));
      best = _mm256_max_pd(best, _mm256_blendv_pd(kNegInf4, t_lat, lat_ok));

      const __m256d t_cap_p = _mm256_div_pd(_mm256_sub_pd(h, ma), az);
      const __m256d wx_p = _mm256_sub_pd(mx, _mm256_mul_pd(h, ax));
      const __m256d wy_p = _mm256_sub_pd(my, _mm256_mul_pd(h, ay));
      const __m256d wz_p = _mm256_sub_pd(_mm256_add_pd(mz, t_cap_p), _mm256_mul_pd(h, az));
      const __m256d rad_p =
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(wx_p, wx_p), _mm256_mul_pd(wy_p, wy_p)),
                        _mm256_mul_pd(wz_p, wz_p));
      const __m256d cap_p_ok = _mm256_cmp_pd(rad_p, r2, _CMP_LE_OQ);
      best = _mm256_max_pd(best, _mm256_blendv_pd(kNegInf4, t_cap_p, cap_p_ok));

      const __m256d t_cap_m = _mm256_div_pd(_mm256_sub_pd(neg_h, ma), az);
      const __m256d wx_m = _mm256_add_pd(mx, _mm256_mul_pd(h, ax));
      const __m256d wy_m = _mm256_add_pd(my, _mm256_mul_pd(h, ay));
      const __m256d wz_m = _mm256_add_pd(_mm256_add_pd(mz, t_cap_m), _mm256_mul_pd(h, az));
      const __m256d rad_m =
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(wx_m, wx_m), _mm256_mul_pd(wy_m, wy_m)),
                        _mm256_mul_pd(wz_m, wz_m));
      const __m256d cap_m_ok = _mm256_cmp_pd(rad_m, r2, _CMP_LE_OQ);
      best = _mm256_max_pd(best, _mm256_blendv_pd(kNegInf4, t_cap_m, cap_m_ok));
    }
    _mm256_storeu_pd(out + i, _mm256_max_pd(best, kZero4));
  }
  if (i < n) raycast_max_z_scalar(field, xs + i, ys + i, n - i, out + i);
}

std::size_t clip_points_avx2(const double* xs, const double* ys, const double* zs,
                             std::size_t n, const RoiSpec& roi, double* ox, double* oy,
                             double* oz) {
  const __m256d x0 = _mm256_set1_pd(roi.x0);
  const __m256d x1 = _mm256_set1_pd(roi.x0 + roi.width);
  const __m256d y0 = _mm256_set1_pd(roi.y0);
  const __m256d y1 = _mm256_set1_pd(roi.y0 + roi.length);
  const __m256d plane = _mm256_set1_pd(roi.plane_height);

  std::size_t w = 0;
  std::size_t i = 0;
  alignas(32) double tx[4], ty[4], tz[4];
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(xs + i);
    const __m256d y = _mm256_loadu_pd(ys + i);
    const __m256d z = _mm256_sub_pd(_mm256_loadu_pd(zs + i), plane);
    __m256d keep = _mm256_cmp_pd(x, x0, _CMP_GE_OQ);
    keep = _mm256_and_pd(keep, _mm256_cmp_pd(x, x1, _CMP_LE_OQ));
    keep = _mm256_and_pd(keep, _mm256_cmp_pd(y, y0, _CMP_GE_OQ));
    keep = _mm256_and_pd(keep, _mm256_cmp_pd(y, y1, _CMP_LE_OQ));
    const int bits = _mm256_movemask_pd(keep);
    _mm256_store_pd(tx, x);
    _mm256_store_pd(ty, y);
    _mm256_store_pd(tz, _mm256_max_pd(z, kZero4));
    for (int lane = 0; lane < 4; ++lane) {
      if (bits & (1 << lane)) {
        ox[w] = tx[lane];
        oy[w] = ty[lane];
        oz[w] = tz[lane];
        ++w;
      }
    }
  }
  if (i < n) w += clip_points_scalar(xs + i, ys + i, zs + i, n - i, roi, ox + w, oy + w, oz + w);
  return w;
}

namespace {
inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}
}  // namespace

double sum_avx2(const double* v, std::size_t n) {
  __m256d acc = kZero4;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += v[i];
  return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = kZero4;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

}  // namespace caneflow::kern

#endif  // x86_64
