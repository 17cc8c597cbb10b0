#include "tvcp/nn/adamw.hpp"

#include <cmath>

#include "tvcp/error.hpp"

namespace tvcp::nn {

AdamW::AdamW(const ParameterSet& params, AdamWConfig config) : config_(config) {
  if (!(config_.learning_rate > 0)) throw ContractError("learning rate must be positive");
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamW::step(ParameterSet& params, const Gradients& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractError("optimizer state does not match the parameter set");
  ++t_;
  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    const Matrix& g = grads[i];
    p.value *= (1.0 - lr * config_.weight_decay);
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
}

}  // namespace tvcp::nn
