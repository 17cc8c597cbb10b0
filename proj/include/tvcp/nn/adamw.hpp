#pragma once

#include <vector>

#include "tvcp/nn/graph.hpp"

namespace tvcp::nn {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay. Parameters with trainable == false are never touched.
class AdamW {
 public:
  AdamW(const ParameterSet& params, AdamWConfig config);
  void step(ParameterSet& params, const Gradients& grads);
  long steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  AdamWConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

}  // namespace tvcp::nn
