#pragma once
// Data-parallel inner loops used by the simulator, the TSDF volume and the
// policy networks. Each kernel has a scalar reference implementation and an
// AVX2 variant; the variant is chosen once at runtime from the CPU features
// (override with XPG_SIMD=scalar|avx2 or set_isa()).
//
// Ray casting and TSDF fusion produce bit-identical results on every path.
// The dense kernels reorder floating point sums and agree to rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace xpg::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// True when the variant was compiled in and the CPU supports it.
bool isa_available(Isa isa);

// Currently dispatched variant.
Isa active_isa();

// Forces a variant. Throws std::invalid_argument if it is unavailable.
void set_isa(Isa isa);

// Structure-of-arrays box list, one entry per axis-aligned box.
struct BoxesSoA {
  std::span<const double> xmin, xmax, ymin, ymax, zmin, zmax;
  std::size_t size() const { return xmin.size(); }
};

// Rays share one origin. Directions are not required to be unit length; the
// returned t is the ray parameter, so hit = origin + t * dir.
struct RayBundle {
  double ox = 0, oy = 0, oz = 0;
  std::span<const double> dx, dy, dz;
  std::size_t size() const { return dx.size(); }
};

// For each ray, the nearest box with positive exit distance. best_t must be
// pre-filled with the cut-off distance (e.g. the table hit) and best_box with
// -1; boxes nearer than best_t overwrite both. Ties keep the lower box index.
// If hit_counts is non-empty it is incremented, per box, by the number of
// rays hitting that box at any distance below the initial best_t.
struct CastOutput {
  std::span<double> best_t;
  std::span<std::int32_t> best_box;
  std::span<std::int64_t> hit_counts;
};

void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out);

// Pinhole projection used by TSDF fusion.
struct ProjectionParams {
  double cam[3];
  double right[3];
  double down[3];
  double forward[3];
  double focal;
  double cx, cy;
  int width, height;
};

struct VolumeParams {
  double origin[3];
  double voxel_size;
  int nx, ny, nz;
  double truncation;
  double weight_cap;
};

// Weighted running-mean TSDF update over the whole volume. depth is a
// row-major height x width image of z-depths; NaN pixels are skipped. Voxel
// (ix, iy, iz) lives at index (iz * ny + iy) * nx + ix.
void tsdf_fuse(const VolumeParams& volume, const ProjectionParams& camera,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights);

// y = W x + b, W row-major (rows x cols). b may be empty.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> b,
          std::span<double> y);

// dx += W^T dy.
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx);

// G += dy x^T, G row-major (rows x cols).
void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x);

namespace scalar {
void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out);
void tsdf_fuse(const VolumeParams& volume, const ProjectionParams& camera,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> b,
          std::span<double> y);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx);
void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x);
}  // namespace scalar

namespace avx2 {
void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out);
void tsdf_fuse(const VolumeParams& volume, const ProjectionParams& camera,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> b,
          std::span<double> y);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx);
void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x);
}  // namespace avx2

}  // namespace xpg::kernels
