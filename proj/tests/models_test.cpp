#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "debiasmix/errors.hpp"
#include "debiasmix/models.hpp"
#include "support.hpp"

using namespace debiasmix;
using testutil::max_relative_error;
using testutil::numeric_gradient;
using testutil::random_matrix;

namespace {

ArchitectureConfig small_arch() {
  ArchitectureConfig a;
  a.input_dim = 6;
  a.backbone_hidden = {5};
  a.feature_dim = 4;
  a.num_classes = 3;
  a.beta_hidden = {8, 8};
  return a;
}

}  // namespace

TEST(ModelsTest, ShapesAndDeterminism) {
  ModelTriplet m(small_arch(), 3);
  std::mt19937_64 rng(0);
  const ag::Matrix x = random_matrix(7, 6, rng);
  const ag::Var f = m.features().forward(ag::Var(x));
  EXPECT_EQ(f.rows(), 7);
  EXPECT_EQ(f.cols(), 4);
  EXPECT_EQ(m.logits(x).cols(), 3);
  EXPECT_EQ(m.logits(x), m.logits(x));
  const BetaParams p = m.beta_net().forward(f, f);
  EXPECT_EQ(p.alpha.rows(), 7);
  EXPECT_EQ(p.beta.rows(), 7);
}

TEST(ModelsTest, ZeroInputGivesFiniteFeatures) {
  ModelTriplet m(small_arch(), 4);
  EXPECT_TRUE(m.features().forward(ag::Var(ag::Matrix::Zero(2, 6))).value().allFinite());
}

TEST(ModelsTest, ShapeMismatchThrows) {
  ModelTriplet m(small_arch(), 5);
  EXPECT_THROW(m.features().forward(ag::Var(ag::Matrix::Zero(2, 5))), PreconditionError);
}

TEST(ModelsTest, BetaParamsPositivityMap) {
  const double sp0 = std::log(2.0) + 1e-4;
  const BetaParams zero = beta_params_from_raw(ag::Var(ag::Matrix::Zero(1, 2)), 1e-4);
  EXPECT_NEAR(zero.alpha.item(), sp0, 1e-12);
  EXPECT_NEAR(zero.beta.item(), 0.6932, 1e-4);

  const BetaParams floor = beta_params_from_raw(ag::Var(ag::Matrix::Constant(1, 2, -40.0)), 1e-4);
  EXPECT_NEAR(floor.alpha.item(), 1e-4, 1e-15);
  EXPECT_NEAR(floor.beta.item(), 1e-4, 1e-15);

  std::mt19937_64 rng(1);
  const BetaParams any = beta_params_from_raw(ag::Var(random_matrix(500, 2, rng, 50.0)), 1e-4);
  EXPECT_GT(any.alpha.value().minCoeff(), 0.0);
  EXPECT_GT(any.beta.value().minCoeff(), 0.0);
  EXPECT_TRUE(any.alpha.value().allFinite());
}

TEST(ModelsTest, BetaNetRejectsNonFiniteFeatures) {
  ModelTriplet m(small_arch(), 6);
  ag::Matrix f = ag::Matrix::Zero(2, 4);
  f(0, 0) = std::nan("");
  EXPECT_THROW(m.beta_net().forward(ag::Var(f), ag::Var(f)), NumericalError);
}

TEST(ModelsTest, BetaNetInputsAreDetached) {
  ModelTriplet m(small_arch(), 7);
  std::mt19937_64 rng(2);
  const ag::Matrix x = random_matrix(4, 6, rng);
  const ag::Var f = m.features().forward(ag::Var(x));
  const BetaParams p = m.beta_net().forward(f, f);
  ag::sum(p.alpha + p.beta).backward();
  for (const auto& param : m.features().parameters()) EXPECT_TRUE(param.var.grad().isZero(0.0)) << param.name;
  double psi_grad = 0.0;
  for (const auto& param : m.beta_net().parameters()) psi_grad += param.var.grad().squaredNorm();
  EXPECT_GT(psi_grad, 0.0);
}

TEST(ModelsTest, ClassifierGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ModelTriplet m(small_arch(), 100 + trial);
    const ag::Matrix x = random_matrix(5, 6, rng);
    ag::Matrix y = ag::Matrix::Zero(5, 3);
    for (int i = 0; i < 5; ++i) y(i, i % 3) = 1.0;
    auto leaves = vars_of(m.classification_parameters());
    auto build = [&] { return ag::softmax_cross_entropy(m.logits(ag::Var(x)), y); };
    for (auto& l : leaves) l.zero_grad();
    build().backward();
    std::vector<ag::Matrix> analytic;
    for (auto& l : leaves) analytic.push_back(l.grad());
    const auto numeric = numeric_gradient([&] { return build().item(); }, leaves, 1e-5);
    EXPECT_LT(max_relative_error(analytic, numeric), 1e-3) << "trial " << trial;
  }
}

TEST(ModelsTest, CloneIsIndependent) {
  ModelTriplet a(small_arch(), 8);
  ModelTriplet b = a.clone();
  auto pa = a.all_parameters();
  auto pb = b.all_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].var.value(), pb[i].var.value());
  pb[0].var.mutable_value()(0, 0) += 1.0;
  EXPECT_NE(pa[0].var.value()(0, 0), pb[0].var.value()(0, 0));
}

TEST(ModelsTest, CheckpointRoundTripIsExact) {
  testutil::TempDir dir("ckpt");
  ModelTriplet m(small_arch(), 9);
  save_checkpoint(m, dir.path() / "c");
  const ModelTriplet loaded = load_checkpoint(dir.path() / "c");
  EXPECT_EQ(loaded.arch(), m.arch());
  const auto a = m.all_parameters();
  const auto b = loaded.all_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].var.value(), b[i].var.value());
  }
}

TEST(ModelsTest, CorruptCheckpointIsRejected) {
  testutil::TempDir dir("ckpt_bad");
  ModelTriplet m(small_arch(), 10);
  save_checkpoint(m, dir.path());
  std::filesystem::resize_file(dir.path() / "checkpoint.bin", 16);
  EXPECT_THROW(load_checkpoint(dir.path()), FormatError);
}

TEST(ModelsTest, InvalidArchitectureThrows) {
  ArchitectureConfig a = small_arch();
  a.num_classes = 1;
  EXPECT_THROW(ModelTriplet(a, 0), ConfigError);
}
