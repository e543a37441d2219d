#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"

namespace debiasmix::testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("debiasmix_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Small bundle for fast unit tests.
inline GeneratorConfig tiny_generator(int classes = 3, int per_class = 60, double rho = 0.9) {
  GeneratorConfig g;
  g.num_classes = classes;
  g.n_per_class = per_class;
  g.rho = rho;
  g.image_size = 4;
  g.channels = 1;
  g.test_per_cell = 4;
  return g;
}

inline ag::Matrix random_matrix(ag::Index r, ag::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ag::Matrix m(r, c);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Central-difference gradient of a scalar function of the given leaves.
inline std::vector<ag::Matrix> numeric_gradient(const std::function<double()>& f, std::vector<ag::Var>& leaves,
                                                double h = 1e-5) {
  std::vector<ag::Matrix> out;
  for (auto& leaf : leaves) {
    ag::Matrix g(leaf.rows(), leaf.cols());
    for (ag::Index i = 0; i < leaf.value().size(); ++i) {
      double& x = leaf.mutable_value().data()[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = f();
      x = x0 - h;
      const double fm = f();
      x = x0;
      g.data()[i] = (fp - fm) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// max |a - n| / max(|a|, |n|, floor) over all entries.
inline double max_relative_error(const std::vector<ag::Matrix>& analytic, const std::vector<ag::Matrix>& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    for (ag::Index i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k].data()[i];
      const double n = numeric[k].data()[i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

// Autodiff gradients of `loss` built by `build` with respect to `leaves`.
inline std::vector<ag::Matrix> autodiff_gradient(const std::function<ag::Var()>& build, std::vector<ag::Var>& leaves) {
  for (auto& l : leaves) l.zero_grad();
  build().backward();
  std::vector<ag::Matrix> out;
  for (auto& l : leaves) out.push_back(l.grad());
  return out;
}

}  // namespace debiasmix::testutil
