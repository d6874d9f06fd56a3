#pragma once
// Small networks laid out over one flat parameter vector, so the optimizer,
// gradient clipping and finite-difference checks all see a single buffer.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xpg::rl {

struct DenseLayout {
  std::size_t in = 0, out = 0;
  std::size_t w_offset = 0, b_offset = 0;
  double init_gain = 1.0;
};

enum class Activation { kTanh, kRelu, kIdentity };

// Fully connected stack; every layer but the last uses `hidden_activation`.
class Mlp {
 public:
  Mlp() = default;
  // Appends its parameters at `offset` and advances it.
  Mlp(std::vector<std::size_t> sizes, std::vector<double> gains, Activation hidden_activation,
      std::size_t& offset);

  struct Cache {
    std::vector<std::vector<double>> inputs;  // input of each layer
    std::vector<double> output;
  };

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  const std::vector<DenseLayout>& layers() const { return layers_; }

  void forward(std::span<const double> params, std::span<const double> x, Cache& cache) const;
  // Accumulates into grad; writes dL/dx into dx when non-empty.
  void backward(std::span<const double> params, const Cache& cache, std::span<const double> dout,
                std::span<double> grad, std::span<double> dx) const;

 private:
  std::vector<DenseLayout> layers_;
  Activation hidden_ = Activation::kTanh;
};

struct ConvLayout {
  std::size_t in_c = 0, out_c = 0, kernel = 0, stride = 0;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  std::size_t w_offset = 0, b_offset = 0;
  std::size_t patch() const { return in_c * kernel * kernel; }
};

// Conv stack with ReLU after every layer; input and outputs are
// channel-major (c, y, x).
class ConvEncoder {
 public:
  struct LayerSpec {
    std::size_t out_c, kernel, stride;
  };

  ConvEncoder() = default;
  ConvEncoder(std::size_t in_c, std::size_t height, std::size_t width,
              const std::vector<LayerSpec>& specs, std::size_t& offset);

  struct Cache {
    std::vector<std::vector<double>> patches;  // im2col per layer, (positions x patch)
    std::vector<std::vector<double>> outputs;  // post-ReLU per layer
  };

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<ConvLayout>& layers() const { return layers_; }

  void forward(std::span<const double> params, std::span<const double> image, Cache& cache) const;
  void backward(std::span<const double> params, const Cache& cache, std::span<const double> dout,
                std::span<double> grad) const;

 private:
  std::vector<ConvLayout> layers_;
};

// torch-style orthogonal init of a rows x cols block scaled by gain, biases 0.
void orthogonal_init(std::span<double> block, std::size_t rows, std::size_t cols, double gain,
                     std::uint64_t seed);

}  // namespace xpg::rl
