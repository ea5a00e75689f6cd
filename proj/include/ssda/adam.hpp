#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ssda/model.hpp"
#include "ssda/tensor.hpp"

namespace ssda {

// Plain Adam with bias correction, no weight decay, no schedule.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore<T>& ps, const std::map<std::string, Tensor<T>>& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& name : ps.names()) {
      if (!ps.trainable(name)) continue;
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      auto& p = ps.value(name);
      const auto& g = it->second;
      check(g.shape == p.shape, "adam: gradient shape mismatch for '" + name + "'");
      auto& m = state(m_, name, p);
      auto& v = state(v_, name, p);
      for (long i = 0; i < p.numel(); ++i) {
        m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
        v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i]);
        double mhat = static_cast<double>(m[i]) / bc1;
        double vhat = static_cast<double>(v[i]) / bc2;
        p[i] = static_cast<T>(p[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  long steps() const { return t_; }

 private:
  Tensor<T>& state(std::map<std::string, Tensor<T>>& store, const std::string& name,
                   const Tensor<T>& like) {
    auto it = store.find(name);
    if (it == store.end()) it = store.emplace(name, Tensor<T>(like.shape)).first;
    return it->second;
  }

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace ssda
