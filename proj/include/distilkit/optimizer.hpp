#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "distilkit/error.hpp"
#include "distilkit/tensor.hpp"

namespace distilkit {

// Peak-relative learning-rate multiplier: linear warmup from zero over
// `warmup` steps, then linear decay to zero at `total`. Steps are 1-based;
// the multiplier is exactly 1 at step == warmup and 0 at step == total.
inline double linear_warmup_decay(std::size_t step, std::size_t total, std::size_t warmup) {
  if (total == 0) return 0.0;
  if (warmup > 0 && step <= warmup) return double(step) / double(warmup);
  if (step >= total || total <= warmup) return 0.0;
  return double(total - step) / double(total - warmup);
}

// Adam with decoupled weight decay. Parameters without a populated gradient
// are skipped for the step.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW(std::vector<Tensor> params, Options opts) : params_(std::move(params)), opts_(opts) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].numel(), 0.0);
      v_[i].assign(params_[i].numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(opts_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(opts_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.mutable_data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g[j];
        v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g[j] * g[j];
        double mhat = m[j] / bc1;
        double vhat = v[j] / bc2;
        w[j] -= lr * (mhat / (std::sqrt(vhat) + opts_.eps) + opts_.weight_decay * w[j]);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  Options opts_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace distilkit
