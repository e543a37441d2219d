#include <gtest/gtest.h>

#include <cmath>

#include "debiasmix/errors.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/reparam.hpp"
#include "debiasmix/rng.hpp"

using namespace debiasmix;

namespace {

constexpr int kDraws = 100000;

struct Moments {
  double mean = 0.0;
  double dalpha = 0.0;
  double dbeta = 0.0;
};

Moments beta_moments(double a, double b, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Moments m;
  for (int i = 0; i < kDraws; ++i) {
    const BetaDraw d = sample_beta_reparam(a, b, rng);
    m.mean += d.lambda;
    m.dalpha += d.dlambda_dalpha;
    m.dbeta += d.dlambda_dbeta;
  }
  m.mean /= kDraws;
  m.dalpha /= kDraws;
  m.dbeta /= kDraws;
  return m;
}

}  // namespace

TEST(ReparamTest, SymmetricBetaHasMeanHalf) {
  EXPECT_NEAR(beta_moments(3.0, 3.0, 1).mean, 0.5, 0.01);
  EXPECT_NEAR(beta_moments(0.5, 0.5, 2).mean, 0.5, 0.01);
}

TEST(ReparamTest, MeanMatchesAlphaOverSum) { EXPECT_NEAR(beta_moments(2.0, 6.0, 3).mean, 0.25, 0.01); }

// Analytic oracle: dE[lambda]/dalpha = beta / (alpha + beta)^2, dE/dbeta = -alpha / (alpha + beta)^2.
TEST(ReparamTest, PathwiseGradientMatchesMomentDerivative) {
  const Moments m = beta_moments(2.0, 6.0, 4);
  EXPECT_NEAR(m.dalpha, 0.09375, 0.05 * 0.09375);
  EXPECT_NEAR(m.dbeta, -0.03125, 0.05 * 0.03125);
}

TEST(ReparamTest, PathwiseGradientAtSmallShapes) {
  const double a = 0.7;
  const double b = 1.3;
  const Moments m = beta_moments(a, b, 5);
  EXPECT_NEAR(m.dalpha, b / ((a + b) * (a + b)), 0.05 * b / ((a + b) * (a + b)));
  EXPECT_NEAR(m.dbeta, -a / ((a + b) * (a + b)), 0.05 * a / ((a + b) * (a + b)));
}

// E[G] = shape, so the pathwise derivative of G averages to 1.
TEST(ReparamTest, GammaPathwiseDerivativeAveragesToOne) {
  for (double shape : {0.3, 1.0, 4.5}) {
    Rng rng = make_rng(6);
    double acc = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const GammaDraw g = sample_gamma_reparam(shape, rng);
      acc += std::exp(g.log_value) * g.dlog_dshape;
    }
    EXPECT_NEAR(acc / kDraws, 1.0, 0.05) << "shape " << shape;
  }
}

TEST(ReparamTest, DrawsStayInsideOpenInterval) {
  Rng rng = make_rng(7);
  for (double p : {1e-4, 0.05, 1.0, 50.0}) {
    for (int i = 0; i < 2000; ++i) {
      const double l = sample_beta_reparam(p, 1.0 / p, rng).lambda;
      EXPECT_GT(l, 0.0);
      EXPECT_LT(l, 1.0);
    }
  }
}

TEST(ReparamTest, VarSamplerPropagatesDrawGradients) {
  const ag::Index n = 6;
  ag::Var alpha(ag::Matrix::Constant(n, 1, 2.0), true);
  ag::Var beta(ag::Matrix::Constant(n, 1, 6.0), true);
  Rng r1 = make_rng(8);
  const ag::Var lambda = sample_lambda_reparam(alpha, beta, r1);
  ag::sum(lambda).backward();

  Rng r2 = make_rng(8);
  for (ag::Index i = 0; i < n; ++i) {
    const BetaDraw d = sample_beta_reparam(2.0, 6.0, r2);
    EXPECT_DOUBLE_EQ(lambda.value()(i, 0), d.lambda);
    EXPECT_DOUBLE_EQ(alpha.grad()(i, 0), d.dlambda_dalpha);
    EXPECT_DOUBLE_EQ(beta.grad()(i, 0), d.dlambda_dbeta);
  }
}

TEST(ReparamTest, NonPositiveParametersThrow) {
  Rng rng = make_rng(9);
  EXPECT_THROW(sample_beta_reparam(0.0, 1.0, rng), PreconditionError);
  EXPECT_THROW(sample_beta_reparam(1.0, -2.0, rng), PreconditionError);
  const BetaParams bad{ag::Var(ag::Matrix::Constant(2, 1, -1.0)), ag::Var(ag::Matrix::Ones(2, 1))};
  EXPECT_THROW(sample_lambda_reparam(bad, rng), PreconditionError);
}
