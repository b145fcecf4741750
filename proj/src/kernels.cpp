#include "caneflow/kernels.hpp"

#include <atomic>

#include "caneflow/errors.hpp"
#include "kernels_internal.hpp"

namespace caneflow::kern {

void CylinderField::reserve(std::size_t n) {
  cx.reserve(n);
  cy.reserve(n);
  cz.reserve(n);
  ax.reserve(n);
  ay.reserve(n);
  az.reserve(n);
  half_len.reserve(n);
  radius.reserve(n);
}

void CylinderField::push(const Vec3& center, const Vec3& axis, double length, double diameter) {
  cx.push_back(center.x);
  cy.push_back(center.y);
  cz.push_back(center.z);
  ax.push_back(axis.x);
  ay.push_back(axis.y);
  az.push_back(axis.z);
  half_len.push_back(0.5 * length);
  radius.push_back(0.5 * diameter);
}

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend pick_best() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend> g_backend{pick_best()};

}  // namespace

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_supported(Backend b) {
  return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void select_backend(Backend b) {
  if (!backend_supported(b))
    throw Error(ErrorCategory::config,
                std::string("kernel backend not supported on this CPU: ") + backend_name(b));
  g_backend.store(b, std::memory_order_relaxed);
}

void select_best_backend() { g_backend.store(pick_best(), std::memory_order_relaxed); }

void raycast_max_z(const CylinderField& field, const double* xs, const double* ys,
                   std::size_t n, double* out) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::avx2) {
    raycast_max_z_avx2(field, xs, ys, n, out);
    return;
  }
#endif
  raycast_max_z_scalar(field, xs, ys, n, out);
}

std::size_t clip_points(const double* xs, const double* ys, const double* zs, std::size_t n,
                        const RoiSpec& roi, double* ox, double* oy, double* oz) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::avx2)
    return clip_points_avx2(xs, ys, zs, n, roi, ox, oy, oz);
#endif
  return clip_points_scalar(xs, ys, zs, n, roi, ox, oy, oz);
}

double sum(const double* v, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::avx2) return sum_avx2(v, n);
#endif
  return sum_scalar(v, n);
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::avx2) return dot_avx2(a, b, n);
#endif
  return dot_scalar(a, b, n);
}

}  // namespace caneflow::kern
