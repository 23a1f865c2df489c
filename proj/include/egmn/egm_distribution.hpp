#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace egmn {

// Mixture of one exponential component (weight weights[0], rate `rate`) and
// k Gaussian components (weights[1..k], means, variances). Weights lie on the
// simplex; k = 0 degenerates to a pure exponential. Gaussian components are
// not truncated at zero, so density below t = 0 comes solely from them.
struct EgmParams {
  double rate = 1.0;
  std::vector<double> means;
  std::vector<double> variances;
  std::vector<double> weights;

  std::size_t k() const { return means.size(); }
};

// Throws std::invalid_argument when a field invariant is violated:
// rate > 0, variances > 0, means > 0, weights >= 0 summing to 1 within 1e-12,
// means/variances of equal length, weights one longer, everything finite.
void validate_params(const EgmParams& p);

inline constexpr double kWeightSumTol = 1e-12;
inline constexpr double kQuantileTol = 1e-8;

double pdf(const EgmParams& p, double t);

// Log-density via log-sum-exp over component log densities. Returns -infinity
// (never NaN) when every component has zero density at t.
double log_pdf(const EgmParams& p, double t);

double cdf(const EgmParams& p, double t);

// Closed-form expectation: weights[0]/rate + sum_k weights[k] * means[k].
double mean(const EgmParams& p);

// Inverse CDF by bisection; |cdf(result) - q| <= kQuantileTol.
// Throws std::domain_error unless 0 < q < 1.
double quantile(const EgmParams& p, double q);

// cdf(b) - cdf(a) clamped to [0, 1]. a may be -infinity (quick-skip mass is
// interval_prob(-inf, tau)). Throws std::domain_error when a > b.
double interval_prob(const EgmParams& p, double a, double b);

// Ancestral sampling: component index from the weights, then one draw from
// that component. Same seed yields a bit-identical sequence.
std::vector<double> sample(const EgmParams& p, std::uint64_t seed, std::size_t n);

enum class CurveKind { Density, Cdf };

// Two-column CSV (t,value) over a caller-supplied grid; `inspect` support.
void write_curve_csv(std::ostream& os, const EgmParams& p,
                     const std::vector<double>& grid, CurveKind kind);

namespace detail {

// Per-component log densities at t. `unweighted[i]` is log f_i(t) and
// `weighted[i]` adds log weights[i]; index 0 is the exponential component.
// The losses use these for responsibility computation.
struct LogComponents {
  std::vector<double> unweighted;
  std::vector<double> weighted;
  double log_density;  // logsumexp(weighted)
};

LogComponents log_components(const EgmParams& p, double t);

// Density without invariant checks; weights may be off the simplex. Finite
// difference tests differentiate through this.
double pdf_raw(const EgmParams& p, double t);
double log_pdf_raw(const EgmParams& p, double t);

}  // namespace detail

}  // namespace egmn
