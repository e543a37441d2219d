#pragma once

#include <vector>

#include "debiasmix/autograd.hpp"

namespace debiasmix {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<ag::Var> params, AdamOptions options = {});

  void zero_grad();
  // Descends along the gradients currently stored on the parameters.
  void step();
  long steps_taken() const { return t_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace debiasmix
