#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "diagkernel/signals.hpp"

using namespace diagkernel;

namespace {

// <f, g> under the uniform probability measure on [-1,1], split into panels.
template <class F>
double inner(F f) {
  using boost::math::quadrature::gauss_kronrod;
  double s = 0;
  const int panels = 64;
  for (int i = 0; i < panels; ++i) {
    const double lo = -1.0 + 2.0 * i / panels, hi = lo + 2.0 / panels;
    s += gauss_kronrod<double, 31>::integrate(f, lo, hi, 8, 1e-14);
  }
  return 0.5 * s;
}

std::int64_t brute_phi(const CoefficientVector& c, double delta) {
  std::int64_t k = 0;
  for (double v : c.theta) k += std::abs(v) >= delta;
  return k;
}

CoefficientVector plain(std::vector<double> th, double tail = 0) {
  CoefficientVector c;
  c.theta = std::move(th);
  c.tail_energy = tail;
  c.update_bound();
  return c;
}

}  // namespace

TEST(Gapped, PositionsAndValues) {
  auto c = gapped_coeffs({1.0, 2.0, 100});
  EXPECT_EQ(gapped_positions(2.0, 4), (std::vector<std::int64_t>{1, 4, 9, 16}));
  EXPECT_DOUBLE_EQ(c.theta[3], 0.5);
  EXPECT_DOUBLE_EQ(c.theta[0], 1.0);
  EXPECT_EQ(c.theta[1], 0.0);
  EXPECT_DOUBLE_EQ(c.b_inf, 1.0);
}

TEST(Gapped, AlignedHasNoGaps) {
  auto c = gapped_coeffs({1.0, 1.0, 50});
  for (std::size_t j = 0; j < 50; ++j) EXPECT_DOUBLE_EQ(c.theta[j], 1.0 / double(j + 1));
}

TEST(Gapped, CollisionsResolvedStrictly) {
  auto l = gapped_positions(1.2, 200);
  for (std::size_t j = 1; j < l.size(); ++j) EXPECT_GT(l[j], l[j - 1]);
  EXPECT_EQ(l[0], 1);
}

TEST(Gapped, RejectsInvalid) {
  EXPECT_THROW(gapped_coeffs({0.0, 2.0, 10}), std::invalid_argument);
  EXPECT_THROW(gapped_coeffs({1.0, 0.5, 10}), std::invalid_argument);
}

TEST(Gapped, PhiMatchesBruteForceScan) {
  auto c = gapped_coeffs({2.0, 3.0, 10000});
  EXPECT_EQ(phi_of(c, 0.1), brute_phi(c, 0.1));
  EXPECT_EQ(phi_of(c, 0.1), 4);
}

// p=1, q=2, J=10^4, delta=0.05: the 20 leading entries are significant and
// psi = zeta(2) - H_20^(2) (mpmath, 30 digits).
TEST(Gapped, PhiPsiMatchBruteForce) {
  auto c = gapped_coeffs({1.0, 2.0, 10000});
  EXPECT_EQ(phi_of(c, 0.05), brute_phi(c, 0.05));
  EXPECT_EQ(phi_of(c, 0.05), 20);
  EXPECT_NEAR(psi_of(c, 0.05), 0.0487708229352031198, 1e-12);
}

TEST(Gapped, TailEnergy) {
  EXPECT_NEAR(zeta_tail(2.0, 300), 0.0033277839506035666, 1e-14);
  EXPECT_NEAR(zeta_tail(1.5, 10), 0.6170388553398866, 1e-12);
  auto c = gapped_coeffs({1.0, 2.0, 64});
  EXPECT_NEAR(c.tail_energy, 0.117512014694031425, 1e-13);
  EXPECT_NEAR(c.norm2() + c.tail_energy, std::numbers::pi * std::numbers::pi / 6, 1e-12);
}

TEST(Gapped, OnSpectrumPlacement) {
  auto spec = sobolev_spectrum_1d({1, 2, 4, 9, 16, 25, 1000}, 1.0);
  auto c = gapped_on_spectrum(1.0, 2.0, 5, spec);
  EXPECT_DOUBLE_EQ(c.theta[0], 1.0);
  EXPECT_EQ(c.theta[1], 0.0);
  EXPECT_DOUBLE_EQ(c.theta[2], 0.5);
  EXPECT_DOUBLE_EQ(c.theta[5], 0.2);
  EXPECT_EQ(c.theta[6], 0.0);
  auto missing = sobolev_spectrum_1d({1, 2, 3}, 1.0);
  EXPECT_THROW(gapped_on_spectrum(1.0, 2.0, 2, missing), std::invalid_argument);
}

TEST(Cosine, CoefficientsMatchQuadrature) {
  auto spec = sobolev_spectrum(2, 12, 1.5);
  auto c = cosine_target_coeffs(spec, 12);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& el = spec.elements[j];
    if (el.idx.m[1] != 0) {
      EXPECT_EQ(c.theta[j], 0.0);
      continue;
    }
    BasisElement axis = make_element({{el.idx.m[0]}, {el.idx.phase[0]}});
    const double q = inner([&](double x) { return cosine_target(x) * eval_basis(axis, std::vector<double>{x}); });
    EXPECT_NEAR(c.theta[j], q, 1e-10) << el.idx.str();
  }
}

// Frozen values from a 30-digit mpmath quadrature.
TEST(Cosine, FrozenValues) {
  EXPECT_NEAR(cosine_coefficient(0), -0.04244131815783876, 1e-15);
  EXPECT_NEAR(cosine_coefficient(1), 0.06110744227310675, 1e-15);
  EXPECT_NEAR(cosine_coefficient(2), -0.06461600355194541, 1e-15);
  EXPECT_NEAR(cosine_coefficient(7), 0.46568085318471004, 1e-15);
  EXPECT_NEAR(cosine_coefficient(8), 0.43563692717279326, 1e-15);
  EXPECT_NEAR(cosine_coefficient(12), 0.03847505624603017, 1e-15);
  // against the unnormalized cos(8 pi x): 30 / (31 pi)
  EXPECT_NEAR(std::abs(cosine_coefficient(8)) / std::numbers::sqrt2, 30.0 / (31.0 * std::numbers::pi), 1e-15);
}

TEST(Cosine, SineAndCrossAxisVanish) {
  auto spec = sobolev_spectrum(2, 6, 1.5);
  auto c = cosine_target_coeffs(spec, 6);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& mi = spec.elements[j].idx;
    if (mi.phase[0] == Phase::sine || mi.m[1] != 0) EXPECT_EQ(c.theta[j], 0.0);
  }
}

TEST(Cosine, TailAndParseval) {
  auto spec = sobolev_spectrum(2, 12, 1.5);
  auto c = cosine_target_coeffs(spec, 12);
  EXPECT_NEAR(c.tail_energy, 0.003277717321459276, 1e-12);
  // ||cos(7.5 pi x)||^2 under the probability measure is 1/2
  EXPECT_NEAR(c.norm2() + c.tail_energy, 0.5, 1e-10);
  EXPECT_THROW(cosine_target_coeffs(spec, 0), std::invalid_argument);
}

TEST(PhiPsi, HandExample) {
  auto c = plain({1.0, 0.5, 0.25, 0.125});
  EXPECT_EQ(phi_of(c, 0.3), 2);
  EXPECT_EQ(j_sig(c, 0.3), (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(psi_of(c, 0.3), 0.078125);
}

TEST(PhiPsi, EmptySignificantSet) {
  auto c = plain({1.0, -0.5, 0.25}, 0.01);
  EXPECT_EQ(phi_of(c, 2.0), 0);
  EXPECT_DOUBLE_EQ(psi_of(c, 2.0), c.norm2() + 0.01);
}

TEST(PhiPsi, RejectsNonpositiveDelta) {
  auto c = plain({1.0});
  EXPECT_THROW(phi_of(c, 0.0), std::invalid_argument);
  EXPECT_THROW(psi_of(c, -1.0), std::invalid_argument);
}

TEST(PhiPsi, MonotoneInDelta) {
  auto c = gapped_coeffs({1.5, 2.5, 5000});
  std::int64_t prev_phi = std::numeric_limits<std::int64_t>::max();
  double prev_psi = -1;
  for (double d = 1e-4; d < 10; d *= 1.3) {
    const auto ph = phi_of(c, d);
    const double ps = psi_of(c, d);
    EXPECT_LE(ph, prev_phi);
    EXPECT_GE(ps, prev_psi);
    prev_phi = ph;
    prev_psi = ps;
  }
  EXPECT_NEAR(psi_of(c, 1e6), c.norm2() + c.tail_energy, 1e-15);
}

// max J_sig(delta) ~ delta^{-2q/(p+1)}
TEST(PhiPsi, SignificantSetGrowth) {
  const double p = 1.0, q = 2.0;
  auto c = gapped_coeffs({p, q, 1'000'001});
  std::vector<double> x, y;
  for (double d = 1e-3; d <= 1e-1 * 1.0001; d *= std::pow(10.0, 0.25)) {
    auto s = j_sig(c, d);
    x.push_back(std::log(d));
    y.push_back(std::log(double(s.back() + 1)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size(), my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  EXPECT_NEAR(sxy / sxx, -2 * q / (p + 1), 0.2);
}

TEST(Rates, Examples) {
  auto r = theoretical_rates(2, 3);
  EXPECT_DOUBLE_EQ(r.adaptive_exponent, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.fixed_exponent, 2.0 / 5.0);
  auto a = theoretical_rates(1.7, 1);
  EXPECT_DOUBLE_EQ(a.adaptive_exponent, a.fixed_exponent);
  // 2t/(2t+d0) with t=1.5, d0=1 is 3/4
  auto l = theoretical_rates_low_dim(1.5, 4, 1);
  EXPECT_DOUBLE_EQ(l.adaptive_exponent, 0.75);
  EXPECT_DOUBLE_EQ(l.fixed_exponent, 3.0 / 7.0);
  EXPECT_THROW(theoretical_rates(0, 2), std::invalid_argument);
  EXPECT_THROW(theoretical_rates_low_dim(1, 2, 3), std::invalid_argument);
}

TEST(Rates, AdaptiveDominatesFixed) {
  for (double p : {0.5, 1.0, 2.0, 4.0})
    for (double q : {1.0, 1.5, 2.0, 4.0, 8.0}) {
      auto r = theoretical_rates(p, q);
      EXPECT_GE(r.adaptive_exponent, r.fixed_exponent);
      EXPECT_EQ(r.adaptive_exponent == r.fixed_exponent, q == 1.0);
    }
  for (int d = 1; d <= 4; ++d)
    for (int d0 = 1; d0 <= d; ++d0) {
      auto r = theoretical_rates_low_dim(1.2, d, d0);
      EXPECT_GE(r.adaptive_exponent, r.fixed_exponent);
      EXPECT_EQ(r.adaptive_exponent == r.fixed_exponent, d == d0);
    }
}
