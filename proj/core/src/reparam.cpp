#include "debiasmix/reparam.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "debiasmix/errors.hpp"

namespace debiasmix {

namespace {

// d/da of the regularized lower incomplete gamma P(a, x), by central
// differences on whichever of P or Q is smaller to avoid cancellation.
double dcdf_dshape(double a, double x) {
  const double h = 1e-5 * std::max(a, 1e-3);
  if (x < a) {
    return (boost::math::gamma_p(a + h, x) - boost::math::gamma_p(a - h, x)) / (2.0 * h);
  }
  return -(boost::math::gamma_q(a + h, x) - boost::math::gamma_q(a - h, x)) / (2.0 * h);
}

double log_gamma_pdf(double a, double x) { return (a - 1.0) * std::log(x) - x - std::lgamma(a); }

// Pathwise derivative of a Gamma(a, 1) draw x w.r.t. a, divided by x.
double dlog_draw_dshape(double a, double x) {
  const double dcdf = dcdf_dshape(a, x);
  const double log_pdf = log_gamma_pdf(a, x);
  // dx/da / x = -dcdf / (pdf * x), formed in log space for tail draws.
  if (dcdf == 0.0) return 0.0;
  const double magnitude = std::exp(std::log(std::abs(dcdf)) - log_pdf - std::log(x));
  return dcdf > 0 ? -magnitude : magnitude;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

GammaDraw sample_gamma_reparam(double shape, Rng& rng) {
  if (!(shape > 0) || !std::isfinite(shape)) throw PreconditionError("gamma sampler: shape must be positive and finite");
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    double x = gamma(rng);
    while (!(x > 0)) x = gamma(rng);
    return {std::log(x), dlog_draw_dshape(shape, x)};
  }
  // Shape boost: G(a) = G(a + 1) * U^(1/a), evaluated in log space so tiny
  // shapes do not underflow.
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double x = gamma(rng);
  while (!(x > 0)) x = gamma(rng);
  double u = unif(rng);
  while (!(u > 0)) u = unif(rng);
  const double log_u = std::log(u);
  return {std::log(x) + log_u / shape, dlog_draw_dshape(shape + 1.0, x) - log_u / (shape * shape)};
}

BetaDraw sample_beta_reparam(double alpha, double beta, Rng& rng) {
  const GammaDraw ga = sample_gamma_reparam(alpha, rng);
  const GammaDraw gb = sample_gamma_reparam(beta, rng);
  const double raw = sigmoid(ga.log_value - gb.log_value);
  const double lambda = std::clamp(raw, kLambdaMargin, 1.0 - kLambdaMargin);
  if (lambda != raw) return {lambda, 0.0, 0.0};
  const double s = lambda * (1.0 - lambda);
  return {lambda, s * ga.dlog_dshape, -s * gb.dlog_dshape};
}

ag::Var sample_lambda_reparam(const ag::Var& alpha, const ag::Var& beta, Rng& rng) {
  if (alpha.cols() != 1 || beta.cols() != 1 || alpha.rows() != beta.rows()) {
    throw PreconditionError("lambda sampler: alpha and beta must be matching column vectors");
  }
  const ag::Index n = alpha.rows();
  ag::Matrix lambda(n, 1);
  ag::Matrix dalpha(n, 1);
  ag::Matrix dbeta(n, 1);
  for (ag::Index i = 0; i < n; ++i) {
    const double a = alpha.value()(i, 0);
    const double b = beta.value()(i, 0);
    if (!(a > 0) || !(b > 0)) throw PreconditionError("lambda sampler: Beta parameters must be positive");
    const BetaDraw d = sample_beta_reparam(a, b, rng);
    lambda(i, 0) = d.lambda;
    dalpha(i, 0) = d.dlambda_dalpha;
    dbeta(i, 0) = d.dlambda_dbeta;
  }
  return ag::Var::from_op(
      std::move(lambda), {alpha, beta},
      [dalpha = std::move(dalpha), dbeta = std::move(dbeta)](ag::Node& node) {
        ag::Node& pa = *node.parents[0];
        ag::Node& pb = *node.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          pa.grad += node.grad.cwiseProduct(dalpha);
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          pb.grad += node.grad.cwiseProduct(dbeta);
        }
      },
      "beta_rsample");
}

ag::Var sample_lambda_reparam(const BetaParams& params, Rng& rng) {
  return sample_lambda_reparam(params.alpha, params.beta, rng);
}

}  // namespace debiasmix
