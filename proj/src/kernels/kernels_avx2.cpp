// Compiled with -mavx2 only; no FMA so every lane rounds exactly like the
// scalar reference.
#include <immintrin.h>

#include <cmath>

#include "xpg/kernels/kernels.hpp"

namespace xpg::kernels::avx2 {
namespace {

inline double mn(double a, double b) { return a < b ? a : b; }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void cast_rays(const RayBundle& rays, const BoxesSoA& boxes, CastOutput out) {
  const std::size_t n = rays.size();
  const std::size_t m = boxes.size();
  const bool count = !out.hit_counts.empty();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ox = _mm256_set1_pd(rays.ox);
  const __m256d oy = _mm256_set1_pd(rays.oy);
  const __m256d oz = _mm256_set1_pd(rays.oz);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ix = _mm256_div_pd(one, _mm256_loadu_pd(rays.dx.data() + i));
    const __m256d iy = _mm256_div_pd(one, _mm256_loadu_pd(rays.dy.data() + i));
    const __m256d iz = _mm256_div_pd(one, _mm256_loadu_pd(rays.dz.data() + i));
    const __m256d cutoff = _mm256_loadu_pd(out.best_t.data() + i);
    __m256d best_t = cutoff;
    __m256d best_box = _mm256_set1_pd(-1.0);
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d tx1 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.xmin[j]), ox), ix);
      const __m256d tx2 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.xmax[j]), ox), ix);
      const __m256d ty1 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.ymin[j]), oy), iy);
      const __m256d ty2 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.ymax[j]), oy), iy);
      const __m256d tz1 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.zmin[j]), oz), iz);
      const __m256d tz2 = _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(boxes.zmax[j]), oz), iz);
      const __m256d tnear = _mm256_max_pd(
          _mm256_max_pd(_mm256_min_pd(tx1, tx2), _mm256_min_pd(ty1, ty2)),
          _mm256_min_pd(tz1, tz2));
      const __m256d tfar = _mm256_min_pd(
          _mm256_min_pd(_mm256_max_pd(tx1, tx2), _mm256_max_pd(ty1, ty2)),
          _mm256_max_pd(tz1, tz2));
      const __m256d t = _mm256_max_pd(tnear, zero);
      const __m256d hit = _mm256_and_pd(
          _mm256_and_pd(_mm256_cmp_pd(tnear, tfar, _CMP_LE_OQ),
                        _mm256_cmp_pd(tfar, zero, _CMP_GT_OQ)),
          _mm256_cmp_pd(t, cutoff, _CMP_LT_OQ));
      const int hit_bits = _mm256_movemask_pd(hit);
      if (hit_bits == 0) continue;
      if (count) out.hit_counts[j] += __builtin_popcount(static_cast<unsigned>(hit_bits));
      const __m256d better = _mm256_and_pd(hit, _mm256_cmp_pd(t, best_t, _CMP_LT_OQ));
      best_t = _mm256_blendv_pd(best_t, t, better);
      best_box = _mm256_blendv_pd(best_box, _mm256_set1_pd(static_cast<double>(j)), better);
    }
    _mm256_storeu_pd(out.best_t.data() + i, best_t);
    alignas(32) double ids[4];
    _mm256_store_pd(ids, best_box);
    for (int k = 0; k < 4; ++k) out.best_box[i + k] = static_cast<std::int32_t>(ids[k]);
  }
  if (i < n) {
    RayBundle tail = rays;
    tail.dx = rays.dx.subspan(i);
    tail.dy = rays.dy.subspan(i);
    tail.dz = rays.dz.subspan(i);
    scalar::cast_rays(tail, boxes,
                      CastOutput{out.best_t.subspan(i), out.best_box.subspan(i), out.hit_counts});
  }
}

void tsdf_fuse(const VolumeParams& vol, const ProjectionParams& cam,
               std::span<const double> depth, std::span<double> values,
               std::span<double> weights) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vs = _mm256_set1_pd(vol.voxel_size);
  const __m256d ox = _mm256_set1_pd(vol.origin[0]);
  const __m256d camx = _mm256_set1_pd(cam.cam[0]);
  const __m256d f0 = _mm256_set1_pd(cam.forward[0]);
  const __m256d f1 = _mm256_set1_pd(cam.forward[1]);
  const __m256d f2 = _mm256_set1_pd(cam.forward[2]);
  const __m256d r0 = _mm256_set1_pd(cam.right[0]);
  const __m256d r1 = _mm256_set1_pd(cam.right[1]);
  const __m256d r2 = _mm256_set1_pd(cam.right[2]);
  const __m256d d0 = _mm256_set1_pd(cam.down[0]);
  const __m256d d1 = _mm256_set1_pd(cam.down[1]);
  const __m256d d2 = _mm256_set1_pd(cam.down[2]);
  const __m256d focal = _mm256_set1_pd(cam.focal);
  const __m256d cx = _mm256_set1_pd(cam.cx);
  const __m256d cy = _mm256_set1_pd(cam.cy);
  const __m256d width = _mm256_set1_pd(static_cast<double>(cam.width));
  const __m256d height = _mm256_set1_pd(static_cast<double>(cam.height));
  const __m256d trunc = _mm256_set1_pd(vol.truncation);
  const __m256d neg_trunc = _mm256_set1_pd(-vol.truncation);
  const __m256d cap = _mm256_set1_pd(vol.weight_cap);
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  for (int iz = 0; iz < vol.nz; ++iz) {
    const double pz = vol.origin[2] + (static_cast<double>(iz) + 0.5) * vol.voxel_size;
    const __m256d rz = _mm256_set1_pd(pz - cam.cam[2]);
    const __m256d rz_f = _mm256_mul_pd(rz, f2);
    const __m256d rz_r = _mm256_mul_pd(rz, r2);
    const __m256d rz_d = _mm256_mul_pd(rz, d2);
    for (int iy = 0; iy < vol.ny; ++iy) {
      const double py = vol.origin[1] + (static_cast<double>(iy) + 0.5) * vol.voxel_size;
      const __m256d ry = _mm256_set1_pd(py - cam.cam[1]);
      const __m256d ry_f = _mm256_mul_pd(ry, f1);
      const __m256d ry_r = _mm256_mul_pd(ry, r1);
      const __m256d ry_d = _mm256_mul_pd(ry, d1);
      const std::size_t row = (static_cast<std::size_t>(iz) * vol.ny + iy) * vol.nx;
      int ix = 0;
      for (; ix + 4 <= vol.nx; ix += 4) {
        const __m256d fx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(ix)), lane);
        const __m256d px = _mm256_add_pd(ox, _mm256_mul_pd(_mm256_add_pd(fx, half), vs));
        const __m256d rx = _mm256_sub_pd(px, camx);
        const __m256d zc = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rx, f0), ry_f), rz_f);
        __m256d mask = _mm256_cmp_pd(zc, zero, _CMP_GT_OQ);
        if (_mm256_movemask_pd(mask) == 0) continue;
        const __m256d xc = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rx, r0), ry_r), rz_r);
        const __m256d yc = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rx, d0), ry_d), rz_d);
        const __m256d u = _mm256_floor_pd(_mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(focal, xc), zc), cx));
        const __m256d v = _mm256_floor_pd(_mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(focal, yc), zc), cy));
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(u, zero, _CMP_GE_OQ));
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(u, width, _CMP_LT_OQ));
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(v, zero, _CMP_GE_OQ));
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(v, height, _CMP_LT_OQ));
        if (_mm256_movemask_pd(mask) == 0) continue;
        // Zero the index on inactive lanes so the conversion never overflows.
        const __m256d pix = _mm256_and_pd(mask, _mm256_add_pd(_mm256_mul_pd(v, width), u));
        const __m128i index = _mm256_cvttpd_epi32(pix);
        const __m256d d = _mm256_mask_i32gather_pd(zero, depth.data(), index, mask, 8);
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(d, d, _CMP_ORD_Q));
        const __m256d sdf = _mm256_sub_pd(d, zc);
        mask = _mm256_and_pd(mask, _mm256_cmp_pd(sdf, neg_trunc, _CMP_GE_OQ));
        if (_mm256_movemask_pd(mask) == 0) continue;
        const __m256d s = _mm256_min_pd(sdf, trunc);
        const __m256d w = _mm256_loadu_pd(weights.data() + row + ix);
        const __m256d val = _mm256_loadu_pd(values.data() + row + ix);
        const __m256d w1 = _mm256_add_pd(w, one);
        const __m256d nv = _mm256_div_pd(_mm256_add_pd(_mm256_mul_pd(val, w), s), w1);
        const __m256d nw = _mm256_min_pd(w1, cap);
        _mm256_storeu_pd(values.data() + row + ix, _mm256_blendv_pd(val, nv, mask));
        _mm256_storeu_pd(weights.data() + row + ix, _mm256_blendv_pd(w, nw, mask));
      }
      const double ry_s = py - cam.cam[1];
      const double rz_s = pz - cam.cam[2];
      for (; ix < vol.nx; ++ix) {
        const std::size_t idx = row + ix;
        const double px = vol.origin[0] + (static_cast<double>(ix) + 0.5) * vol.voxel_size;
        const double rx = px - cam.cam[0];
        const double zc = rx * cam.forward[0] + ry_s * cam.forward[1] + rz_s * cam.forward[2];
        if (!(zc > 0.0)) continue;
        const double xc = rx * cam.right[0] + ry_s * cam.right[1] + rz_s * cam.right[2];
        const double yc = rx * cam.down[0] + ry_s * cam.down[1] + rz_s * cam.down[2];
        const double uu = std::floor(cam.focal * xc / zc + cam.cx);
        const double vv = std::floor(cam.focal * yc / zc + cam.cy);
        if (!(uu >= 0.0 && uu < cam.width && vv >= 0.0 && vv < cam.height)) continue;
        const double dd = depth[static_cast<std::size_t>(vv * cam.width + uu)];
        if (dd != dd) continue;
        const double sdf = dd - zc;
        if (!(sdf >= -vol.truncation)) continue;
        const double s = mn(sdf, vol.truncation);
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
    __m256d acc = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4)
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x.data() + c)));
    double s = hsum(acc);
    for (; c < cols; ++c) s += row[c] * x[c];
    y[r] = b.empty() ? s : s + b[r];
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d cur = _mm256_loadu_pd(dx.data() + c);
      _mm256_storeu_pd(dx.data() + c, _mm256_add_pd(cur, _mm256_mul_pd(_mm256_loadu_pd(row + c), g)));
    }
    for (; c < cols; ++c) dx[c] += row[c] * dy[r];
  }
}

void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> dy, std::span<const double> x) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = g.data() + r * cols;
    const __m256d s = _mm256_set1_pd(dy[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d cur = _mm256_loadu_pd(row + c);
      _mm256_storeu_pd(row + c, _mm256_add_pd(cur, _mm256_mul_pd(s, _mm256_loadu_pd(x.data() + c))));
    }
    for (; c < cols; ++c) row[c] += dy[r] * x[c];
  }
}

}  // namespace xpg::kernels::avx2
