#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "egmn/egm_distribution.hpp"
#include "egmn/numeric.hpp"
#include "oracles.hpp"

using egmn::EgmParams;

namespace {

EgmParams pure_exponential(double rate) {
  EgmParams p;
  p.rate = rate;
  p.weights = {1.0};
  return p;
}

EgmParams single_gaussian(double mu, double var) {
  EgmParams p;
  p.rate = 1.0;
  p.means = {mu};
  p.variances = {var};
  p.weights = {0.0, 1.0};
  return p;
}

// Half exponential(1), half N(2, 1); the worked example used throughout.
EgmParams mixed_example() {
  EgmParams p;
  p.rate = 1.0;
  p.means = {2.0};
  p.variances = {1.0};
  p.weights = {0.5, 0.5};
  return p;
}

}  // namespace

TEST_CASE("pdf closed-form values") {
  CHECK(egmn::pdf(pure_exponential(2.0), 0.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(egmn::pdf(single_gaussian(5.0, 1.0), 5.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  // 0.5*f_exp(0|1) + 0.5*N(0;2,1), the two densities evaluated independently
  CHECK(egmn::pdf(mixed_example(), 0.0) ==
        doctest::Approx(0.5269954832565941).epsilon(1e-14));
  // exponential contributes nothing below zero
  CHECK(egmn::pdf(pure_exponential(1.0), -1.0) == 0.0);
  CHECK(egmn::pdf(mixed_example(), -1.0) ==
        doctest::Approx(0.5 * std::exp(-4.5) / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("log_pdf values and -inf sentinel") {
  CHECK(egmn::log_pdf(pure_exponential(1.0), 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(egmn::log_pdf(pure_exponential(2.0), 0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(egmn::log_pdf(mixed_example(), 0.0) ==
        doctest::Approx(-0.6405633011481027).epsilon(1e-12));
  const double lp = egmn::log_pdf(pure_exponential(1.0), -1.0);
  CHECK(lp == -egmn::kInf);
  CHECK(!std::isnan(lp));
}

TEST_CASE("exp(log_pdf) matches pdf") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const EgmParams p = oracles::random_params(rng);
    for (int j = 0; j < 20; ++j) {
      const double t = egmn::uniform_in(rng, -10.0, 150.0);
      const double d = egmn::pdf(p, t);
      if (d > 1e-300) {
        CHECK(std::exp(egmn::log_pdf(p, t)) == doctest::Approx(d).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("cdf closed-form values and limits") {
  CHECK(egmn::cdf(pure_exponential(std::log(2.0)), 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(egmn::cdf(mixed_example(), 2.0) ==
        doctest::Approx(0.6823323583816936).epsilon(1e-14));
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const EgmParams p = oracles::random_params(rng);
    CHECK(egmn::cdf(p, 1e9) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(egmn::cdf(p, -1e9) == doctest::Approx(0.0).epsilon(1e-9));
    // monotone non-decreasing over a coarse grid
    double prev = -1.0;
    for (double t = -50.0; t <= 200.0; t += 2.5) {
      const double c = egmn::cdf(p, t);
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("mean arithmetic") {
  EgmParams p;
  p.rate = 0.5;
  p.means = {10.0};
  p.variances = {4.0};
  p.weights = {0.5, 0.5};
  CHECK(egmn::mean(p) == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(egmn::mean(pure_exponential(4.0)) == doctest::Approx(0.25).epsilon(1e-14));
  EgmParams q;
  q.rate = 1.0;
  q.means = {3.0, 6.0};
  q.variances = {1.0, 1.0};
  q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  CHECK(egmn::mean(q) == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("quantile closed forms and round trip") {
  CHECK(egmn::quantile(pure_exponential(1.0), 0.5) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-7));
  CHECK(egmn::quantile(single_gaussian(5.0, 1.0), 0.5) == doctest::Approx(5.0).epsilon(1e-7));

  // inverse of the cdf worked example, cross-checked by a fine-grid cdf scan
  const EgmParams mix = mixed_example();
  const double q = 0.6823323583816936;
  const double t_star = egmn::quantile(mix, q);
  CHECK(t_star == doctest::Approx(2.0).epsilon(1e-6));
  double best_t = 0.0;
  double best_gap = 1e9;
  for (double t = 1.5; t <= 2.5; t += 1e-4) {
    const double gap = std::abs(egmn::cdf(mix, t) - q);
    if (gap < best_gap) {
      best_gap = gap;
      best_t = t;
    }
  }
  CHECK(std::abs(t_star - best_t) < 1e-3);

  CHECK_THROWS_AS(egmn::quantile(mix, 0.0), std::domain_error);
  CHECK_THROWS_AS(egmn::quantile(mix, 1.0), std::domain_error);
  CHECK_THROWS_AS(egmn::quantile(mix, -0.2), std::domain_error);

  std::mt19937_64 rng(13);
  const double grid[] = {0.001, 0.01, 0.05, 0.1, 0.25, 0.4, 0.5,
                         0.6, 0.75, 0.9, 0.95, 0.99, 0.999};
  for (int i = 0; i < 25; ++i) {
    const EgmParams p = oracles::random_params(rng);
    double prev = -egmn::kInf;
    for (double qq : grid) {
      const double t = egmn::quantile(p, qq);
      CHECK(std::abs(egmn::cdf(p, t) - qq) <= egmn::kQuantileTol);
      CHECK(t >= prev);
      prev = t;
    }
  }
}

TEST_CASE("sampling determinism and moments") {
  const EgmParams e1 = pure_exponential(1.0);
  const auto s1 = egmn::sample(e1, 42, 1000000);
  double acc = 0.0;
  for (double x : s1) acc += x;
  CHECK(std::abs(acc / 1e6 - 1.0) < 3.0 / std::sqrt(1e6));

  const auto s2 = egmn::sample(e1, 42, 1000000);
  CHECK(s1 == s2);
  CHECK(egmn::sample(e1, 43, 100) != egmn::sample(e1, 42, 100));

  const auto tight = egmn::sample(single_gaussian(5.0, 1e-6), 7, 100);
  for (double x : tight) CHECK(std::abs(x - 5.0) < 0.01);

  CHECK_THROWS_AS(egmn::sample(e1, 1, 0), std::domain_error);
}

TEST_CASE("sample mean matches closed-form mean within 4 empirical SEs") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 5; ++i) {
    const EgmParams p = oracles::random_params(rng, 6);
    const auto s = egmn::sample(p, 1000 + i, 1000000);
    double m = 0.0;
    for (double x : s) m += x;
    m /= static_cast<double>(s.size());
    double var = 0.0;
    for (double x : s) var += (x - m) * (x - m);
    var /= static_cast<double>(s.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(s.size()));
    CHECK(std::abs(m - egmn::mean(p)) <= 4.0 * se);
  }
}

TEST_CASE("interval probabilities") {
  CHECK(egmn::interval_prob(pure_exponential(1.0), 0.0, std::log(2.0)) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(egmn::interval_prob(mixed_example(), 3.0, 3.0) == 0.0);
  // cdf(2) - cdf(0) with cdf(0) = 0.5 * Phi(-2)
  CHECK(egmn::interval_prob(mixed_example(), 0.0, 2.0) ==
        doctest::Approx(0.6709572924076039).epsilon(1e-13));
  // quick-skip mass is the interval from -infinity
  CHECK(egmn::interval_prob(mixed_example(), -egmn::kInf, 4.0) ==
        doctest::Approx(egmn::cdf(mixed_example(), 4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(egmn::interval_prob(mixed_example(), 2.0, 1.0), std::domain_error);
}

TEST_CASE("quadrature agrees with interval_prob and total mass") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 15; ++i) {
    const EgmParams p = oracles::random_params(rng, 6);
    double lo = 0.0;
    double sd_max = 0.0;
    for (std::size_t k = 0; k < p.k(); ++k) sd_max = std::max(sd_max, std::sqrt(p.variances[k]));
    for (std::size_t k = 0; k < p.k(); ++k) lo = std::min(lo, p.means[k] - 12.0 * sd_max);
    const double hi = egmn::quantile(p, 1.0 - 1e-10);
    CHECK(oracles::integrate_egm_pdf(p, lo, hi) == doctest::Approx(1.0).epsilon(1e-4));

    for (int j = 0; j < 4; ++j) {
      double a = egmn::uniform_in(rng, lo, hi);
      double b = egmn::uniform_in(rng, lo, hi);
      if (a > b) std::swap(a, b);
      CHECK(std::abs(oracles::integrate_egm_pdf(p, a, b) - egmn::interval_prob(p, a, b)) <=
            1e-6);
    }
  }
}

TEST_CASE("degenerate weights reproduce the pure components exactly") {
  EgmParams p;
  p.rate = 0.7;
  p.means = {4.0, 9.0};
  p.variances = {1.0, 2.0};
  p.weights = {1.0, 0.0, 0.0};
  for (double t : {0.0, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(egmn::pdf(p, t) == 0.7 * std::exp(-0.7 * t));
    CHECK(egmn::cdf(p, t) == -std::expm1(-0.7 * t));
  }
  EgmParams g;
  g.rate = 0.7;
  g.means = {4.0, 9.0};
  g.variances = {1.0, 2.0};
  g.weights = {0.0, 0.0, 1.0};
  for (double t : {0.0, 4.0, 9.0, 12.0}) {
    const double d = t - 9.0;
    CHECK(egmn::pdf(g, t) == std::exp(-d * d / 4.0) / std::sqrt(4.0 * M_PI));
    CHECK(egmn::cdf(g, t) == egmn::normal_cdf(d / std::sqrt(2.0)));
  }
}

TEST_CASE("parameter validation") {
  EgmParams p = mixed_example();
  CHECK_NOTHROW(egmn::validate_params(p));

  EgmParams bad = p;
  bad.rate = 0.0;
  CHECK_THROWS_AS(egmn::pdf(bad, 1.0), std::invalid_argument);
  bad = p;
  bad.variances[0] = 0.0;
  CHECK_THROWS_AS(egmn::pdf(bad, 1.0), std::invalid_argument);
  bad = p;
  bad.weights = {0.6, 0.5};
  CHECK_THROWS_AS(egmn::cdf(bad, 1.0), std::invalid_argument);
  bad = p;
  bad.weights = {-0.1, 1.1};
  CHECK_THROWS_AS(egmn::cdf(bad, 1.0), std::invalid_argument);
  bad = p;
  bad.weights = {1.0};
  CHECK_THROWS_AS(egmn::mean(bad), std::invalid_argument);
  bad = p;
  bad.means[0] = std::nan("");
  CHECK_THROWS_AS(egmn::pdf(bad, 1.0), std::invalid_argument);
}

TEST_CASE("curve csv export") {
  std::vector<double> grid;
  for (int i = -1000; i <= 3000; ++i) grid.push_back(0.01 * i);
  std::ostringstream os;
  egmn::write_curve_csv(os, mixed_example(), grid, egmn::CurveKind::Density);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,density");
  std::vector<double> ts, vs;
  for (std::string line; std::getline(is, line);) {
    const auto comma = line.find(',');
    ts.push_back(std::stod(line.substr(0, comma)));
    vs.push_back(std::stod(line.substr(comma + 1)));
  }
  REQUIRE(ts.size() == grid.size());
  double trap = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    trap += 0.5 * (vs[i] + vs[i + 1]) * (ts[i + 1] - ts[i]);
  }
  // [-10, 30] carries all but ~1e-13 of the worked example's mass; the cell
  // straddling the density jump at t = 0 bounds the trapezoid error.
  CHECK(trap == doctest::Approx(1.0).epsilon(5e-3));
  CHECK(trap == doctest::Approx(egmn::interval_prob(mixed_example(), -10.0, 30.0)).epsilon(5e-3));
}
