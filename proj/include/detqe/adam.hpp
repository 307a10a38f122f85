// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "detqe/model.hpp"

namespace detqe {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw config_error("adam: lr must be finite and >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw config_error("adam: beta1 must be in [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw config_error("adam: beta2 must be in [0,1)");
    if (eps <= 0.0) throw config_error("adam: eps must be positive");
  }
};

// Adam with bias correction. Moment buffers live inside the parameter store
// so a checkpoint restores the optimizer mid-run.
template <typename T>
class Adam {
 public:
  explicit Adam(const AdamConfig& config) : cfg_(config) { cfg_.validate(); }

  void step(ParamStore<T>& store) {
    for (size_t i = 0; i < store.size(); ++i)
      if (!store[i].grad.allFinite())
        throw state_error("non-finite gradient in parameter '" + store[i].name + "'");
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T corr2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const T lr = static_cast<T>(cfg_.lr);
    const T eps = static_cast<T>(cfg_.eps);
    for (size_t i = 0; i < store.size(); ++i) {
      ParamTensor<T>& p = store[i];
      p.m = b1 * p.m + (static_cast<T>(1) - b1) * p.grad;
      p.v = (b2 * p.v.array() +
             (static_cast<T>(1) - b2) * p.grad.array().square())
                .matrix();
      auto m_hat = p.m.array() / corr1;
      auto v_hat = p.v.array() / corr2;
      p.value.array() -= lr * m_hat / (v_hat.sqrt() + eps);
    }
  }

  long steps() const { return t_; }
  // restores the bias-correction clock when resuming from a checkpoint
  void set_steps(long t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace detqe
