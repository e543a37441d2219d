#include "debiasmix/optim.hpp"

#include <cmath>

namespace debiasmix {

Adam::Adam(std::vector<ag::Var> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(ag::Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(ag::Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ag::Matrix& g = params_[i].grad();
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseAbs2();
    ag::Matrix denom = (v_[i] / bc2).cwiseSqrt().array() + options_.eps;
    params_[i].mutable_value() -= (options_.lr / bc1) * m_[i].cwiseQuotient(denom);
  }
}

}  // namespace debiasmix
