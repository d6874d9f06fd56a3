#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "xpg/kernels/kernels.hpp"

namespace xpg::kernels {
namespace {

Isa detect() {
  if (const char* env = std::getenv("XPG_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if defined(XPG_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  current().store(isa, std::memory_order_relaxed);
}

#if defined(XPG_HAVE_AVX2)
#define XPG_DISPATCH(fn, ...) \
  (active_isa() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define XPG_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out) {
  XPG_DISPATCH(cast_rays, rays, boxes, out);
}

void tsdf_fuse(const VolumeParams& volume, const ProjectionParams& camera,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights) {
  XPG_DISPATCH(tsdf_fuse, volume, camera, depth, values, weights);
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> b,
          std::span<double> y) {
  XPG_DISPATCH(gemv, w, rows, cols, x, b, y);
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx) {
  XPG_DISPATCH(gemv_t_acc, w, rows, cols, dy, dx);
}

void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x) {
  XPG_DISPATCH(ger_acc, g, rows, cols, dy, x);
}

}  // namespace xpg::kernels
