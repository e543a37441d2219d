#pragma once

#include "debiasmix/autograd.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/rng.hpp"

namespace debiasmix {

// A Gamma(shape, 1) draw kept in log space, with the pathwise derivative of
// log(value) w.r.t. the shape parameter (implicit reparameterization:
// dG/da = -dF(G; a)/da / p(G; a)).
struct GammaDraw {
  double log_value;
  double dlog_dshape;
};

GammaDraw sample_gamma_reparam(double shape, Rng& rng);

// lambda = Ga / (Ga + Gb) with pathwise partials.
struct BetaDraw {
  double lambda;
  double dlambda_dalpha;
  double dlambda_dbeta;
};

BetaDraw sample_beta_reparam(double alpha, double beta, Rng& rng);

// Draws are kept strictly inside (0, 1) by this margin.
inline constexpr double kLambdaMargin = 1e-7;

// One lambda per row of params.alpha / params.beta, differentiable w.r.t.
// both. Throws PreconditionError on non-positive parameters.
ag::Var sample_lambda_reparam(const BetaParams& params, Rng& rng);

// Same contract with explicit (B x 1) parameter variables.
ag::Var sample_lambda_reparam(const ag::Var& alpha, const ag::Var& beta, Rng& rng);

}  // namespace debiasmix
