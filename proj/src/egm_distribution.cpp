#include "egmn/egm_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "egmn/numeric.hpp"

namespace egmn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

double exp_log_density(double rate, double t) {
  if (t < 0.0) return -kInf;
  return std::log(rate) - rate * t;
}

double gauss_log_density(double mu, double var, double t) {
  const double d = t - mu;
  return -0.5 * (kLogTwoPi + std::log(var)) - d * d / (2.0 * var);
}

}  // namespace

void validate_params(const EgmParams& p) {
  if (!(p.rate > 0.0) || !std::isfinite(p.rate)) {
    throw std::invalid_argument("EgmParams: rate must be positive and finite");
  }
  if (p.variances.size() != p.means.size()) {
    throw std::invalid_argument("EgmParams: means and variances must have equal length");
  }
  if (p.weights.size() != p.means.size() + 1) {
    throw std::invalid_argument("EgmParams: weights must have length k+1");
  }
  for (double m : p.means) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument("EgmParams: means must be positive and finite");
    }
  }
  for (double v : p.variances) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("EgmParams: variances must be positive and finite");
    }
  }
  double sum = 0.0;
  for (double w : p.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("EgmParams: weights must be non-negative and finite");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTol) {
    throw std::invalid_argument("EgmParams: weights must sum to 1 within 1e-12, got " +
                                std::to_string(sum));
  }
}

namespace detail {

double pdf_raw(const EgmParams& p, double t) {
  double acc = 0.0;
  if (t >= 0.0 && p.weights[0] > 0.0) {
    acc += p.weights[0] * p.rate * std::exp(-p.rate * t);
  }
  for (std::size_t k = 0; k < p.k(); ++k) {
    const double w = p.weights[k + 1];
    if (w <= 0.0) continue;
    const double var = p.variances[k];
    const double d = t - p.means[k];
    acc += w * std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
  }
  return acc;
}

LogComponents log_components(const EgmParams& p, double t) {
  LogComponents lc;
  const std::size_t n = p.k() + 1;
  lc.unweighted.resize(n);
  lc.weighted.resize(n);
  lc.unweighted[0] = exp_log_density(p.rate, t);
  for (std::size_t k = 0; k < p.k(); ++k) {
    lc.unweighted[k + 1] = gauss_log_density(p.means[k], p.variances[k], t);
  }
  for (std::size_t i = 0; i < n; ++i) {
    lc.weighted[i] = p.weights[i] > 0.0 ? std::log(p.weights[i]) + lc.unweighted[i] : -kInf;
  }
  lc.log_density = log_sum_exp(lc.weighted);
  return lc;
}

double log_pdf_raw(const EgmParams& p, double t) {
  return log_components(p, t).log_density;
}

}  // namespace detail

double pdf(const EgmParams& p, double t) {
  validate_params(p);
  return detail::pdf_raw(p, t);
}

double log_pdf(const EgmParams& p, double t) {
  validate_params(p);
  return detail::log_pdf_raw(p, t);
}

double cdf(const EgmParams& p, double t) {
  validate_params(p);
  double acc = 0.0;
  if (p.weights[0] > 0.0) {
    acc += p.weights[0] * -std::expm1(-p.rate * std::max(t, 0.0));
  }
  for (std::size_t k = 0; k < p.k(); ++k) {
    const double w = p.weights[k + 1];
    if (w <= 0.0) continue;
    acc += w * normal_cdf((t - p.means[k]) / std::sqrt(p.variances[k]));
  }
  return std::clamp(acc, 0.0, 1.0);
}

double mean(const EgmParams& p) {
  validate_params(p);
  double acc = p.weights[0] / p.rate;
  for (std::size_t k = 0; k < p.k(); ++k) {
    acc += p.weights[k + 1] * p.means[k];
  }
  return acc;
}

double quantile(const EgmParams& p, double q) {
  validate_params(p);
  if (!(q > 0.0) || !(q < 1.0)) {
    throw std::domain_error("quantile: q must lie in (0, 1)");
  }

  // Initial bracket covers all but ~1e-30 of the mass, then expands
  // geometrically until it straddles q.
  double lo = 0.0;
  double hi = 40.0 / p.rate;
  for (std::size_t k = 0; k < p.k(); ++k) {
    const double sd = std::sqrt(p.variances[k]);
    lo = std::min(lo, p.means[k] - 12.0 * sd);
    hi = std::max(hi, p.means[k] + 12.0 * sd);
  }
  double step = std::max(1.0, hi - lo);
  while (cdf(p, lo) > q) {
    lo -= step;
    step *= 2.0;
  }
  step = std::max(1.0, hi - lo);
  while (cdf(p, hi) < q) {
    hi += step;
    step *= 2.0;
  }

  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    mid = 0.5 * (lo + hi);
    const double c = cdf(p, mid);
    if (std::abs(c - q) <= kQuantileTol) return mid;
    if (c < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double interval_prob(const EgmParams& p, double a, double b) {
  validate_params(p);
  if (!(a <= b)) {
    throw std::domain_error("interval_prob: requires a <= b");
  }
  return std::clamp(cdf(p, b) - cdf(p, a), 0.0, 1.0);
}

std::vector<double> sample(const EgmParams& p, std::uint64_t seed, std::size_t n) {
  validate_params(p);
  if (n < 1) {
    throw std::domain_error("sample: n must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    std::size_t comp = p.k();  // fallback to the last component on rounding
    double cum = 0.0;
    for (std::size_t c = 0; c <= p.k(); ++c) {
      cum += p.weights[c];
      if (u < cum) {
        comp = c;
        break;
      }
    }
    if (comp == 0) {
      out.push_back(draw_exponential(rng, p.rate));
    } else {
      out.push_back(p.means[comp - 1] +
                    std::sqrt(p.variances[comp - 1]) * draw_standard_normal(rng));
    }
  }
  return out;
}

void write_curve_csv(std::ostream& os, const EgmParams& p,
                     const std::vector<double>& grid, CurveKind kind) {
  validate_params(p);
  os << "t," << (kind == CurveKind::Density ? "density" : "cdf") << "\n";
  char buf[64];
  for (double t : grid) {
    const double v = kind == CurveKind::Density ? detail::pdf_raw(p, t) : cdf(p, t);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", t, v);
    os << buf;
  }
}

}  // namespace egmn
