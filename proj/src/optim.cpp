#include "arw/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace arw {

void SgdMomentum::step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, double lr) {
  step(std::move(params), grads, std::vector<double>(grads.size(), lr));
}

void SgdMomentum::step(std::vector<Matrix*> params, const std::vector<Matrix>& grads,
                       const std::vector<double>& lrs) {
  if (params.size() != grads.size() || lrs.size() != grads.size())
    throw std::invalid_argument("SgdMomentum: parameter/gradient count mismatch");
  if (velocity_.empty()) {
    for (const Matrix& g : grads) velocity_.push_back(Matrix::Zero(g.rows(), g.cols()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    velocity_[k] = momentum_ * velocity_[k] + grads[k];
    *params[k] -= lrs[k] * velocity_[k];
  }
}

void Adam::step(std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Matrix& g : grads) {
      m_.push_back(Matrix::Zero(g.rows(), g.cols()));
      v_.push_back(Matrix::Zero(g.rows(), g.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k].cwiseProduct(grads[k]);
    const double a = lr_ / c1;
    *params[k] -= (a * m_[k].array() / ((v_[k].array() / c2).sqrt() + eps_)).matrix();
  }
}

}  // namespace arw
