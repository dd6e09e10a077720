#pragma once

#include "arw/models.hpp"

#include <vector>

namespace arw {

/// SGD with heavy-ball momentum: v = mu * v + g; p -= lr * v.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, double lr);
  /// Per-tensor learning rates (lrs.size() == params.size()).
  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, const std::vector<double>& lrs);

 private:
  double momentum_;
  std::vector<Matrix> velocity_;
};

class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace arw
