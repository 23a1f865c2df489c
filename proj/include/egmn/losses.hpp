#pragma once

#include <cstddef>

#include "egmn/egm_distribution.hpp"
#include "egmn/network.hpp"

namespace egmn {

struct LossWeights {
  double alpha = 0.1;  // entropy term
  double beta = 1.0;   // regression term
};

// Ablation switches: a dropped term contributes neither loss nor gradient.
struct LossTermMask {
  bool use_mle = true;
  bool use_entropy = true;
  bool use_reg = true;
};

struct LossDiag {
  std::size_t underflow_count = 0;
};

struct TermValue {
  double loss = 0.0;
  EgmParamGrad grad;
};

// Per-example log densities below this are treated as underflow: the loss is
// capped at -kLogDensityFloor with a zeroed gradient and a diagnostic count.
inline constexpr double kLogDensityFloor = -700.0;

// Negative log density with the gradient computed through component
// responsibilities r_i = w_i f_i(t) / p(t).
TermValue mle_loss(const EgmParams& p, double t, LossDiag* diag = nullptr);

struct EntropyValue {
  double loss = 0.0;
  std::vector<double> grad;  // 1 + log w_i per coordinate, 0 at w_i = 0
};

// Negative entropy of the mixture weights (0 * log 0 := 0); minimizing it
// spreads mass across components.
EntropyValue entropy_loss(const std::vector<double>& weights);

// |t - mean(p)| with the gradient flowing through every term of the
// expectation, including the -w_0/rate^2 rate term.
TermValue reg_loss(const EgmParams& p, double t);

// mle + alpha * entropy + beta * reg; batch averaging is the caller's job.
TermValue combined_loss(const EgmParams& p, double t, const LossWeights& lw,
                        const LossTermMask& mask = {}, LossDiag* diag = nullptr);

struct AdagradState {
  NetworkTensors accum;  // per-weight squared-gradient sums
  double epsilon = 1e-8;

  static AdagradState like(const NetworkWeights& w);
};

// accum += g^2; w -= lr * g / (sqrt(accum) + epsilon).
void adagrad_step(NetworkWeights& w, const NetworkTensors& grads, AdagradState& state,
                  double lr);

}  // namespace egmn
