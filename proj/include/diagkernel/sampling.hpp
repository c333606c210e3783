#pragma once
// Data generation, design matrices, the residual gradient and the Monte Carlo
// audit of the empirical-covariance concentration statistics.
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "diagkernel/basis.hpp"
#include "diagkernel/rng.hpp"
#include "diagkernel/signals.hpp"

namespace diagkernel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dataset {
  MatrixXd X;  // n x d
  VectorXd Y;
  double sigma = 0;
  std::uint64_t seed = 0;
  std::size_t n() const { return static_cast<std::size_t>(Y.size()); }
};

inline MatrixXd design_matrix(const OrderedSpectrum& spec, const MatrixXd& X) {
  const auto n = X.rows();
  MatrixXd E(n, static_cast<Eigen::Index>(spec.size()));
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < X.cols(); ++a) row[a] = X(i, a);
    for (std::size_t j = 0; j < spec.size(); ++j) E(i, static_cast<Eigen::Index>(j)) = eval_basis(spec.elements[j], row);
  }
  return E;
}

struct Sample {
  Dataset data;
  MatrixXd E;
};

// x ~ Unif([-1,1)^d) and noise come from two streams derived from `key`, so
// the points do not depend on sigma.
inline Sample sample_with_design(const CoefficientVector& truth, const OrderedSpectrum& spec,
                                 std::size_t n, double sigma, std::uint64_t key) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(sigma >= 0)) throw std::invalid_argument("sigma must be >= 0");
  if (truth.theta.size() != spec.size()) throw std::invalid_argument("truth/spectrum size mismatch");
  Sample s;
  s.data.sigma = sigma;
  s.data.seed = key;
  s.data.X.resize(static_cast<Eigen::Index>(n), spec.d);
  CounterRng xr(stream_key({key, 1}));
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < spec.d; ++a) s.data.X(static_cast<Eigen::Index>(i), a) = 2.0 * xr.uniform() - 1.0;
  s.E = design_matrix(spec, s.data.X);
  Eigen::Map<const VectorXd> th(truth.theta.data(), static_cast<Eigen::Index>(truth.theta.size()));
  s.data.Y = s.E * th;
  CounterRng nr(stream_key({key, 2}));
  for (std::size_t i = 0; i < n; ++i) s.data.Y[static_cast<Eigen::Index>(i)] += sigma * nr.normal();
  return s;
}

inline Dataset sample_dataset(const CoefficientVector& truth, const OrderedSpectrum& spec, std::size_t n,
                              double sigma, std::uint64_t seed) {
  return sample_with_design(truth, spec, n, sigma, seed).data;
}

inline VectorXd residual_gradient(const MatrixXd& E, const VectorXd& Y, const VectorXd& theta) {
  if (E.rows() != Y.size() || E.cols() != theta.size())
    throw std::invalid_argument("residual_gradient: dimension mismatch");
  if (E.rows() == 0) throw std::invalid_argument("residual_gradient: empty dataset");
  return E.transpose() * (Y - E * theta) / static_cast<double>(E.rows());
}

// Evaluates b - G theta through the Gram matrix when J < n, otherwise through E.
class ResidualOperator {
 public:
  ResidualOperator(const MatrixXd& E, const VectorXd& Y) : n_(static_cast<double>(E.rows())) {
    if (E.rows() != Y.size()) throw std::invalid_argument("ResidualOperator: dimension mismatch");
    if (E.rows() == 0) throw std::invalid_argument("ResidualOperator: empty dataset");
    yy_ = Y.squaredNorm() / n_;
    b_ = E.transpose() * Y / n_;
    if (E.cols() < E.rows()) {
      G_.noalias() = E.transpose() * E / n_;
      gram_ = true;
    } else {
      E_ = E;
      Y_ = Y;
    }
  }

  VectorXd delta(const VectorXd& theta) const {
    if (gram_) return b_ - G_ * theta;
    return E_.transpose() * (Y_ - E_ * theta) / n_;
  }

  // L_n = (1/2n) |Y - E theta|^2
  double loss(const VectorXd& theta) const {
    if (gram_) return 0.5 * (yy_ - 2.0 * b_.dot(theta) + theta.dot(G_ * theta));
    return 0.5 * (Y_ - E_ * theta).squaredNorm() / n_;
  }

  bool uses_gram() const noexcept { return gram_; }
  const VectorXd& b() const noexcept { return b_; }
  // Gram matrix; assembled on demand when the operator works through E.
  MatrixXd gram() const { return gram_ ? G_ : MatrixXd(E_.transpose() * E_ / n_); }

 private:
  double n_;
  double yy_ = 0;
  bool gram_ = false;
  VectorXd b_;
  MatrixXd G_;
  MatrixXd E_;
  VectorXd Y_;
};

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  os.precision(17);
  for (Eigen::Index a = 0; a < ds.X.cols(); ++a) os << "x_" << (a + 1) << ",";
  os << "y\n";
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index a = 0; a < ds.X.cols(); ++a) os << ds.X(i, a) << ",";
    os << ds.Y[i] << "\n";
  }
}

// Empirical quantile (linear interpolation between order statistics).
inline double empirical_quantile(std::vector<double> v, double level) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(level, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ConcentrationReport {
  std::size_t n = 0;
  std::size_t reps = 0;
  double level = 0;
  // r_k, (S-I)_{kR} theta_R, (S-I)_{kS}, (S-I)_{kR} Lambda_R^{1/2}
  std::array<double, 4> normalized{};  // quantile over reps of max_k of normalized statistic
  std::array<double, 4> raw{};         // same for the unnormalized statistic
  double constant() const { return *std::max_element(normalized.begin(), normalized.end()); }
};

struct AuditSetup {
  const OrderedSpectrum* spec = nullptr;  // d = 1, entries 1..J
  const CoefficientVector* truth = nullptr;
  std::vector<std::size_t> S;            // positions in spec
  std::vector<std::int64_t> probe_ranks; // k grid (flat ranks)
  double sigma = 1.0;
};

// Probe grid: ranks 1..J plus a geometric tail up to 64 J.
inline std::vector<std::int64_t> default_probe_ranks(std::int64_t J) {
  std::vector<std::int64_t> k;
  for (std::int64_t j = 1; j <= J; ++j) k.push_back(j);
  for (std::int64_t j = 2 * J; j <= 64 * J; j *= 2) k.push_back(j + 1);
  return k;
}

inline ConcentrationReport concentration_audit(const AuditSetup& setup, std::size_t n, std::size_t reps,
                                               std::uint64_t seed) {
  if (setup.S.empty()) throw std::invalid_argument("concentration audit needs a nonempty S");
  if (reps < 30) throw std::invalid_argument("concentration audit needs reps >= 30");
  const auto& spec = *setup.spec;
  const auto& truth = *setup.truth;
  const std::size_t J = spec.size();
  std::vector<char> inS(J, 0);
  for (auto s : setup.S) {
    if (s >= J) throw std::invalid_argument("S must lie inside the spectrum");
    inS[s] = 1;
  }
  std::vector<std::size_t> R;
  double l1R = 0, trR = 0;
  for (std::size_t j = 0; j < J; ++j)
    if (!inS[j]) {
      R.push_back(j);
      l1R += std::abs(truth.theta[j]);
      trR += spec.eigenvalues[j];
    }
  OrderedSpectrum probe = sobolev_spectrum_1d(setup.probe_ranks, 1.0);
  auto rmap = spec.rank_map();
  const std::size_t P = probe.size();
  const double nd = static_cast<double>(n);

  std::array<std::vector<double>, 4> norm_max, raw_max;
  for (auto& v : norm_max) v.reserve(reps);
  for (auto& v : raw_max) v.reserve(reps);

  for (std::size_t rep = 0; rep < reps; ++rep) {
    auto s = sample_with_design(truth, spec, n, setup.sigma, stream_key({seed, 0xC0C0, n, rep}));
    MatrixXd Ep = design_matrix(probe, s.data.X);
    Eigen::Map<const VectorXd> th(truth.theta.data(), static_cast<Eigen::Index>(J));
    VectorXd noise = s.data.Y - s.E * th;
    VectorXd r = Ep.transpose() * noise / nd;
    MatrixXd A = Ep.transpose() * s.E / nd;  // P x J
    for (std::size_t k = 0; k < P; ++k) {
      auto it = rmap.find(probe.ranks[k]);
      if (it != rmap.end()) A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(it->second)) -= 1.0;
    }
    std::array<double, 4> nm{}, rm{};
    for (std::size_t k = 0; k < P; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double lg = std::log(nd * static_cast<double>(probe.ranks[k]));
      double s2 = 0, s3 = 0, s4 = 0;
      for (auto j : R) {
        const double v = A(kk, static_cast<Eigen::Index>(j));
        s2 += v * truth.theta[j];
        s4 += v * v * spec.eigenvalues[j];
      }
      for (auto j : setup.S) {
        const double v = A(kk, static_cast<Eigen::Index>(j));
        s3 += v * v;
      }
      const std::array<double, 4> raw{std::abs(r[kk]), std::abs(s2), std::sqrt(s3), std::sqrt(s4)};
      const std::array<double, 4> den{std::sqrt(lg), std::sqrt(std::max(l1R, 1e-300) * lg),
                                      std::sqrt(static_cast<double>(setup.S.size()) * lg),
                                      std::sqrt(std::max(trR, 1e-300) * lg)};
      for (int q = 0; q < 4; ++q) {
        rm[q] = std::max(rm[q], raw[q]);
        nm[q] = std::max(nm[q], std::sqrt(nd) * raw[q] / den[q]);
      }
    }
    for (int q = 0; q < 4; ++q) {
      norm_max[q].push_back(nm[q]);
      raw_max[q].push_back(rm[q]);
    }
  }
  ConcentrationReport rep;
  rep.n = n;
  rep.reps = reps;
  rep.level = 1.0 - 1.0 / (nd * nd);
  for (int q = 0; q < 4; ++q) {
    rep.normalized[q] = empirical_quantile(norm_max[q], rep.level);
    rep.raw[q] = empirical_quantile(raw_max[q], rep.level);
  }
  return rep;
}

}  // namespace diagkernel
