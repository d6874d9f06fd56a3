#include <cmath>

#include "xpg/kernels/kernels.hpp"

namespace xpg::kernels::scalar {
namespace {

// Same operand semantics as minpd/maxpd so both paths agree on NaN.
inline double mn(double a, double b) { return a < b ? a : b; }
inline double mx(double a, double b) { return a > b ? a : b; }

}  // namespace

void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out) {
  const std::size_t n = rays.size();
  const std::size_t m = boxes.size();
  const bool count = !out.hit_counts.empty();
  for (std::size_t i = 0; i < n; ++i) {
    const double ix = 1.0 / rays.dx[i];
    const double iy = 1.0 / rays.dy[i];
    const double iz = 1.0 / rays.dz[i];
    const double cutoff = out.best_t[i];
    double best_t = cutoff;
    double best_box = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double tx1 = (boxes.xmin[j] - rays.ox) * ix;
      const double tx2 = (boxes.xmax[j] - rays.ox) * ix;
      const double ty1 = (boxes.ymin[j] - rays.oy) * iy;
      const double ty2 = (boxes.ymax[j] - rays.oy) * iy;
      const double tz1 = (boxes.zmin[j] - rays.oz) * iz;
      const double tz2 = (boxes.zmax[j] - rays.oz) * iz;
      const double tnear = mx(mx(mn(tx1, tx2), mn(ty1, ty2)), mn(tz1, tz2));
      const double tfar = mn(mn(mx(tx1, tx2), mx(ty1, ty2)), mx(tz1, tz2));
      const double t = mx(tnear, 0.0);
      const bool hit = (tnear <= tfar) && (tfar > 0.0) && (t < cutoff);
      if (count && hit) ++out.hit_counts[j];
      if (hit && t < best_t) {
        best_t = t;
        best_box = static_cast<double>(j);
      }
    }
    out.best_t[i] = best_t;
    out.best_box[i] = static_cast<std::int32_t>(best_box);
  }
}

void tsdf_fuse(const VolumeParams& vol, const ProjectionParams& cam,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights) {
  const double trunc = vol.truncation;
  const double neg_trunc = -vol.truncation;
  for (int iz = 0; iz < vol.nz; ++iz) {
    const double pz = vol.origin[2] + (static_cast<double>(iz) + 0.5) * vol.voxel_size;
    const double rz = pz - cam.cam[2];
    for (int iy = 0; iy < vol.ny; ++iy) {
      const double py = vol.origin[1] + (static_cast<double>(iy) + 0.5) * vol.voxel_size;
      const double ry = py - cam.cam[1];
      std::size_t idx = (static_cast<std::size_t>(iz) * vol.ny + iy) * vol.nx;
      for (int ix = 0; ix < vol.nx; ++ix, ++idx) {
        const double px = vol.origin[0] + (static_cast<double>(ix) + 0.5) * vol.voxel_size;
        const double rx = px - cam.cam[0];
        const double zc = rx * cam.forward[0] + ry * cam.forward[1] + rz * cam.forward[2];
        if (!(zc > 0.0)) continue;
        const double xc = rx * cam.right[0] + ry * cam.right[1] + rz * cam.right[2];
        const double yc = rx * cam.down[0] + ry * cam.down[1] + rz * cam.down[2];
        const double u = std::floor(cam.focal * xc / zc + cam.cx);
        const double v = std::floor(cam.focal * yc / zc + cam.cy);
        if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) continue;
        const double d = depth[static_cast<std::size_t>(v * cam.width + u)];
        if (d != d) continue;
        const double sdf = d - zc;
        if (!(sdf >= neg_trunc)) continue;
        const double s = mn(sdf, trunc);
        const double w = weights[idx];
        values[idx] = (values[idx] * w + s) / (w + 1.0);
        weights[idx] = mn(w + 1.0, vol.weight_cap);
      }
    }
  }
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> b,
          std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = b.empty() ? acc : acc + b[r];
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    const double g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = g.data() + r * cols;
    const double s = dy[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += s * x[c];
  }
}

}  // namespace xpg::kernels::scalar
