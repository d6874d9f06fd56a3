#include "xpg/rl/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "xpg/core/random.hpp"
#include "xpg/kernels/kernels.hpp"

namespace xpg::rl {

Mlp::Mlp(std::vector<std::size_t> sizes, std::vector<double> gains, Activation hidden_activation,
         std::size_t& offset)
    : hidden_(hidden_activation) {
  if (sizes.size() < 2 || gains.size() != sizes.size() - 1)
    throw std::invalid_argument("mlp needs one gain per layer");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayout l;
    l.in = sizes[i];
    l.out = sizes[i + 1];
    l.w_offset = offset;
    offset += l.in * l.out;
    l.b_offset = offset;
    offset += l.out;
    l.init_gain = gains[i];
    layers_.push_back(l);
  }
}

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kIdentity: return x;
  }
  return x;
}

// Derivative expressed through the activation output y.
double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kRelu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

}  // namespace

void Mlp::forward(std::span<const double> params, std::span<const double> x, Cache& cache) const {
  cache.inputs.resize(layers_.size());
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    cache.inputs[i] = cur;
    std::vector<double> y(l.out);
    kernels::gemv(params.subspan(l.w_offset, l.in * l.out), l.out, l.in, cache.inputs[i],
                  params.subspan(l.b_offset, l.out), y);
    if (i + 1 < layers_.size())
      for (auto& v : y) v = activate(hidden_, v);
    cur = std::move(y);
  }
  cache.output = std::move(cur);
}

void Mlp::backward(std::span<const double> params, const Cache& cache, std::span<const double> dout,
                   std::span<double> grad, std::span<double> dx) const {
  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t ii = layers_.size(); ii-- > 0;) {
    const auto& l = layers_[ii];
    kernels::ger_acc(grad.subspan(l.w_offset, l.in * l.out), l.out, l.in, delta, cache.inputs[ii]);
    for (std::size_t o = 0; o < l.out; ++o) grad[l.b_offset + o] += delta[o];
    if (ii == 0 && dx.empty()) break;
    std::vector<double> prev(l.in, 0.0);
    kernels::gemv_t_acc(params.subspan(l.w_offset, l.in * l.out), l.out, l.in, delta, prev);
    if (ii > 0) {
      // cache.inputs[ii] is the activated output of layer ii - 1.
      for (std::size_t k = 0; k < l.in; ++k) prev[k] *= activate_grad(hidden_, cache.inputs[ii][k]);
      delta = std::move(prev);
    } else {
      for (std::size_t k = 0; k < l.in; ++k) dx[k] += prev[k];
    }
  }
}

ConvEncoder::ConvEncoder(std::size_t in_c, std::size_t height, std::size_t width,
                         const std::vector<LayerSpec>& specs, std::size_t& offset) {
  std::size_t c = in_c, h = height, w = width;
  for (const auto& s : specs) {
    if (h < s.kernel || w < s.kernel) throw std::invalid_argument("conv input smaller than kernel");
    ConvLayout l;
    l.in_c = c;
    l.out_c = s.out_c;
    l.kernel = s.kernel;
    l.stride = s.stride;
    l.in_h = h;
    l.in_w = w;
    l.out_h = (h - s.kernel) / s.stride + 1;
    l.out_w = (w - s.kernel) / s.stride + 1;
    l.w_offset = offset;
    offset += l.out_c * l.patch();
    l.b_offset = offset;
    offset += l.out_c;
    layers_.push_back(l);
    c = l.out_c;
    h = l.out_h;
    w = l.out_w;
  }
}

std::size_t ConvEncoder::input_dim() const {
  const auto& l = layers_.front();
  return l.in_c * l.in_h * l.in_w;
}

std::size_t ConvEncoder::output_dim() const {
  const auto& l = layers_.back();
  return l.out_c * l.out_h * l.out_w;
}

void ConvEncoder::forward(std::span<const double> params, std::span<const double> image,
                          Cache& cache) const {
  cache.patches.resize(layers_.size());
  cache.outputs.resize(layers_.size());
  std::span<const double> in = image;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    const std::size_t positions = l.out_h * l.out_w;
    auto& patches = cache.patches[li];
    patches.assign(positions * l.patch(), 0.0);
    for (std::size_t oy = 0; oy < l.out_h; ++oy)
      for (std::size_t ox = 0; ox < l.out_w; ++ox) {
        double* p = patches.data() + (oy * l.out_w + ox) * l.patch();
        for (std::size_t c = 0; c < l.in_c; ++c)
          for (std::size_t ky = 0; ky < l.kernel; ++ky)
            for (std::size_t kx = 0; kx < l.kernel; ++kx)
              *p++ = in[(c * l.in_h + oy * l.stride + ky) * l.in_w + ox * l.stride + kx];
      }
    auto& out = cache.outputs[li];
    out.assign(l.out_c * positions, 0.0);
    std::vector<double> y(l.out_c);
    const auto w = params.subspan(l.w_offset, l.out_c * l.patch());
    const auto b = params.subspan(l.b_offset, l.out_c);
    for (std::size_t pos = 0; pos < positions; ++pos) {
      kernels::gemv(w, l.out_c, l.patch(),
                    std::span<const double>(patches).subspan(pos * l.patch(), l.patch()), b, y);
      for (std::size_t c = 0; c < l.out_c; ++c) out[c * positions + pos] = y[c] > 0.0 ? y[c] : 0.0;
    }
    in = out;
  }
}

void ConvEncoder::backward(std::span<const double> params, const Cache& cache,
                           std::span<const double> dout, std::span<double> grad) const {
  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const std::size_t positions = l.out_h * l.out_w;
    const auto& out = cache.outputs[li];
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (!(out[i] > 0.0)) delta[i] = 0.0;
    std::vector<double> din(li > 0 ? l.in_c * l.in_h * l.in_w : 0, 0.0);
    const auto w = params.subspan(l.w_offset, l.out_c * l.patch());
    auto gw = grad.subspan(l.w_offset, l.out_c * l.patch());
    std::vector<double> dy(l.out_c), dpatch(l.patch());
    for (std::size_t pos = 0; pos < positions; ++pos) {
      for (std::size_t c = 0; c < l.out_c; ++c) dy[c] = delta[c * positions + pos];
      const auto patch = std::span<const double>(cache.patches[li]).subspan(pos * l.patch(), l.patch());
      kernels::ger_acc(gw, l.out_c, l.patch(), dy, patch);
      for (std::size_t c = 0; c < l.out_c; ++c) grad[l.b_offset + c] += dy[c];
      if (li == 0) continue;
      std::fill(dpatch.begin(), dpatch.end(), 0.0);
      kernels::gemv_t_acc(w, l.out_c, l.patch(), dy, dpatch);
      const std::size_t oy = pos / l.out_w, ox = pos % l.out_w;
      const double* p = dpatch.data();
      for (std::size_t c = 0; c < l.in_c; ++c)
        for (std::size_t ky = 0; ky < l.kernel; ++ky)
          for (std::size_t kx = 0; kx < l.kernel; ++kx)
            din[(c * l.in_h + oy * l.stride + ky) * l.in_w + ox * l.stride + kx] += *p++;
    }
    if (li == 0) break;
    delta = std::move(din);
  }
}

void orthogonal_init(std::span<double> block, std::size_t rows, std::size_t cols, double gain,
                     std::uint64_t seed) {
  Rng rng(seed);
  const bool tall = rows >= cols;
  const Eigen::Index r = static_cast<Eigen::Index>(tall ? rows : cols);
  const Eigen::Index c = static_cast<Eigen::Index>(tall ? cols : rows);
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(c, c);
  for (Eigen::Index j = 0; j < c; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      block[i * cols + j] = gain * (tall ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                         : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
}

}  // namespace xpg::rl
