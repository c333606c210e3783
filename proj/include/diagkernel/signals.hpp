#pragma once
// Truth coefficient sequences and the signal functionals built on them.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "diagkernel/basis.hpp"

namespace diagkernel {

struct CoefficientVector {
  std::vector<double> theta;
  double tail_energy = 0.0;
  bool tail_known = true;
  double b_inf = 0.0;

  void update_bound() {
    b_inf = 0.0;
    for (double v : theta) b_inf = std::max(b_inf, std::abs(v));
  }
  double norm2() const {
    double s = 0;
    for (double v : theta) s += v * v;
    return s;
  }
};

struct GappedDecaySpec {
  double p = 1.0;
  double q = 1.0;
  std::int64_t J = 0;
};

inline void validate(const GappedDecaySpec& s) {
  if (!(s.p > 0)) throw std::invalid_argument("gapped decay needs p > 0");
  if (!(s.q >= 1)) throw std::invalid_argument("gapped decay needs q >= 1");
}

// l(1) = 1, l(j) = max(l(j-1) + 1, round(j^q)) for j = 1..count.
inline std::vector<std::int64_t> gapped_positions(double q, std::int64_t count) {
  std::vector<std::int64_t> l;
  l.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  std::int64_t prev = 0;
  for (std::int64_t j = 1; j <= count; ++j) {
    auto target = static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(j), q)));
    prev = std::max(prev + 1, target);
    l.push_back(prev);
  }
  return l;
}

inline double gapped_value(double p, std::int64_t j) {
  return std::pow(static_cast<double>(j), -(p + 1.0) / 2.0);
}

// sum_{j > j0} j^{-s}, s > 1: direct sum then an Euler-Maclaurin remainder.
inline double zeta_tail(double s, std::int64_t j0) {
  const std::int64_t N = std::max<std::int64_t>(j0, 1'000'000);
  double acc = 0;
  for (std::int64_t j = N; j > j0; --j) acc += std::pow(static_cast<double>(j), -s);
  const double n = static_cast<double>(N);
  acc += std::pow(n, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(n, -s) + s / 12.0 * std::pow(n, -s - 1.0);
  return acc;
}

// Number of gapped entries whose position is <= J.
inline std::int64_t gapped_count_within(double q, std::int64_t J) {
  std::int64_t hi = 1;
  while (gapped_positions(q, hi).back() <= J) hi *= 2;
  auto pos = gapped_positions(q, hi);
  return std::upper_bound(pos.begin(), pos.end(), J) - pos.begin();
}

inline CoefficientVector gapped_coeffs(const GappedDecaySpec& s) {
  validate(s);
  if (s.J < 1) throw std::invalid_argument("gapped decay needs J >= 1");
  CoefficientVector c;
  c.theta.assign(static_cast<std::size_t>(s.J), 0.0);
  const auto count = gapped_count_within(s.q, s.J);
  auto pos = gapped_positions(s.q, count);
  for (std::int64_t j = 1; j <= count; ++j) c.theta[pos[j - 1] - 1] = gapped_value(s.p, j);
  c.tail_energy = zeta_tail(s.p + 1.0, count);
  c.update_bound();
  return c;
}

// Gapped truth placed on a spectrum given by flat ranks. Entries 1..jmax are
// kept (their positions must appear among the ranks); the rest is tail energy.
inline CoefficientVector gapped_on_spectrum(double p, double q, std::int64_t jmax,
                                            const OrderedSpectrum& spec) {
  validate({p, q, 0});
  auto pos = gapped_positions(q, jmax);
  auto rmap = spec.rank_map();
  CoefficientVector c;
  c.theta.assign(spec.size(), 0.0);
  for (std::int64_t j = 1; j <= jmax; ++j) {
    auto it = rmap.find(pos[j - 1]);
    if (it == rmap.end()) throw std::invalid_argument("gapped position missing from spectrum");
    c.theta[it->second] = gapped_value(p, j);
  }
  c.tail_energy = zeta_tail(p + 1.0, jmax);
  c.update_bound();
  return c;
}

// Coefficient of cos(7.5 pi x1) against the normalized sqrt2*cos(k pi x1)
// (k >= 1) or against the constant (k = 0).
inline double cosine_coefficient(std::int64_t k) {
  const double kd = static_cast<double>(k);
  const double base = 30.0 / ((4.0 * kd * kd - 225.0) * std::numbers::pi);
  if (k == 0) return base;
  return (k % 2 ? -1.0 : 1.0) * std::numbers::sqrt2 * base;
}

inline double cosine_target(double x1) { return std::cos(7.5 * std::numbers::pi * x1); }

// Coefficients of cos(7.5 pi x1) on a spectrum; entries beyond frequency
// max_axis_freq along axis 1 are accounted as tail.
inline CoefficientVector cosine_target_coeffs(const OrderedSpectrum& spec, std::int64_t max_axis_freq) {
  if (max_axis_freq < 1) throw std::invalid_argument("cosine target needs J_per_axis >= 1");
  CoefficientVector c;
  c.theta.assign(spec.size(), 0.0);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& mi = spec.elements[j].idx;
    bool axis = true;
    for (std::size_t a = 1; a < mi.dim(); ++a) axis = axis && mi.m[a] == 0;
    if (!axis || mi.phase[0] == Phase::sine || mi.m[0] > max_axis_freq) continue;
    c.theta[j] = cosine_coefficient(mi.m[0]);
  }
  // Energy of every axis frequency not stored, summed directly to k = 1e6.
  double tail = 0;
  for (std::int64_t k = 0; k <= 1'000'000; ++k) {
    bool present = false;
    if (k <= max_axis_freq) {
      MultiIndex mi;
      mi.m.assign(spec.d, 0);
      mi.phase.assign(spec.d, Phase::constant);
      mi.m[0] = k;
      if (k > 0) mi.phase[0] = Phase::cosine;
      present = spec.find(mi) >= 0;
    }
    if (!present) {
      const double v = cosine_coefficient(k);
      tail += v * v;
    }
  }
  c.tail_energy = tail;
  c.update_bound();
  return c;
}

inline void check_delta(double delta) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be > 0");
}

inline std::vector<std::size_t> j_sig(const CoefficientVector& c, double delta) {
  check_delta(delta);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < c.theta.size(); ++j)
    if (std::abs(c.theta[j]) >= delta) out.push_back(j);
  return out;
}

inline std::int64_t phi_of(const CoefficientVector& c, double delta) {
  return static_cast<std::int64_t>(j_sig(c, delta).size());
}

inline double psi_of(const CoefficientVector& c, double delta) {
  check_delta(delta);
  double s = c.tail_energy;
  for (double v : c.theta)
    if (std::abs(v) < delta) s += v * v;
  return s;
}

struct RatePrediction {
  double adaptive_exponent = 0;
  double fixed_exponent = 0;
};

inline RatePrediction theoretical_rates(double p, double q) {
  if (!(p > 0) || !(q >= 1)) throw std::invalid_argument("rates need p > 0 and q >= 1");
  return {p / (p + 1.0), p / (p + q)};
}

inline RatePrediction theoretical_rates_low_dim(double t_smooth, int d, int d0) {
  if (!(t_smooth > 0) || d0 < 1 || d0 > d) throw std::invalid_argument("rates need t > 0 and 1 <= d0 <= d");
  return {2 * t_smooth / (2 * t_smooth + d0), 2 * t_smooth / (2 * t_smooth + d)};
}

}  // namespace diagkernel
