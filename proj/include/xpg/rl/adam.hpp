#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xpg::rl {

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double learning_rate, double epsilon = 1e-5, double beta1 = 0.9,
       double beta2 = 0.999);

  // params -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(std::span<double> params, std::span<const double> grad);

  long steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(long t, std::vector<double> m, std::vector<double> v);

 private:
  double lr_ = 3e-4, eps_ = 1e-5, beta1_ = 0.9, beta2_ = 0.999;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace xpg::rl
