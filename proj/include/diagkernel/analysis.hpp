#pragma once
// Generalization error, empirical rate fits and eigenvalue-learning audits.
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagkernel/basis.hpp"
#include "diagkernel/signals.hpp"

namespace diagkernel {

// |theta* - theta|^2 plus the truth's tail energy.
inline double gen_error(const Eigen::VectorXd& theta, const CoefficientVector& truth) {
  if (static_cast<std::size_t>(theta.size()) != truth.theta.size())
    throw std::invalid_argument("gen_error: dimension mismatch");
  double s = truth.tail_energy;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double e = truth.theta[static_cast<std::size_t>(j)] - theta[j];
    s += e * e;
  }
  return s;
}

struct CurvePoint {
  double n = 0;
  std::vector<double> errors;
};

struct ErrorCurve {
  std::string method;
  int D = 0;
  std::vector<CurvePoint> points;
};

struct RateFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::vector<double> n_used;
  std::vector<std::string> warnings;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct LineFit {
  double slope = 0, intercept = 0, r_squared = 0;
};

inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols needs >= 2 paired points");
  const double k = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= k, my /= k;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("ols needs distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return f;
}

// OLS of ln(median error) on ln n. Nonpositive errors are dropped with a warning.
inline RateFit fit_rate(const ErrorCurve& curve) {
  RateFit out;
  std::vector<double> x, y;
  for (const auto& p : curve.points) {
    std::vector<double> pos;
    for (double e : p.errors) {
      if (e > 0 && std::isfinite(e)) pos.push_back(e);
      else out.warnings.push_back("dropped nonpositive error at n=" + std::to_string(static_cast<long long>(p.n)));
    }
    if (pos.empty()) {
      out.warnings.push_back("no usable errors at n=" + std::to_string(static_cast<long long>(p.n)));
      continue;
    }
    x.push_back(std::log(p.n));
    y.push_back(std::log(median(pos)));
    out.n_used.push_back(p.n);
  }
  std::vector<double> xs = x;
  std::sort(xs.begin(), xs.end());
  if (std::unique(xs.begin(), xs.end()) - xs.begin() < 4) throw std::invalid_argument("fit_rate needs >= 4 distinct n values");
  auto f = ols(x, y);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.r_squared = f.r_squared;
  return out;
}

struct EigAuditReport {
  std::size_t signal_count = 0;
  std::size_t noise_count = 0;
  std::optional<double> signal_min_ratio;  // min learned / |theta*|^{(D+1)/(D+2)}
  std::optional<double> noise_max_ratio;   // max learned / (learned0 exp(sqrt ln n + sqrt ln k))
};

// Partitions components by the signal and noise thresholds and reports the
// extreme ratios. `ranks` are flat ranks k >= 1.
inline EigAuditReport eig_learning_audit(const Eigen::VectorXd& learned, const Eigen::VectorXd& learned0,
                                         const CoefficientVector& truth, const std::vector<double>& lambda,
                                         const std::vector<std::int64_t>& ranks, double n, int D, double s,
                                         double C1) {
  const auto J = truth.theta.size();
  if (static_cast<std::size_t>(learned.size()) != J || static_cast<std::size_t>(learned0.size()) != J ||
      lambda.size() != J || ranks.size() != J)
    throw std::invalid_argument("eig_learning_audit: dimension mismatch");
  EigAuditReport r;
  const double Dd = D;
  const double sig_thr = C1 * std::log(n) / std::sqrt(n);
  const double noise_thr = 1.0 / std::sqrt(n);
  const double lam_thr = std::pow(n, -(1.0 + s) / (Dd + 2.0));
  for (std::size_t k = 0; k < J; ++k) {
    const double th = std::abs(truth.theta[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    if (th > 0 && th >= sig_thr) {
      const double ratio = learned[kk] / std::pow(th, (Dd + 1.0) / (Dd + 2.0));
      r.signal_min_ratio = r.signal_min_ratio ? std::min(*r.signal_min_ratio, ratio) : ratio;
      ++r.signal_count;
    } else if (th <= noise_thr && lambda[k] > 0 && lambda[k] <= lam_thr) {
      const double env = learned0[kk] *
                         std::exp(std::sqrt(std::log(n)) + std::sqrt(std::log(static_cast<double>(ranks[k]))));
      const double ratio = learned[kk] / env;
      r.noise_max_ratio = r.noise_max_ratio ? std::max(*r.noise_max_ratio, ratio) : ratio;
      ++r.noise_count;
    }
  }
  return r;
}

// Share of sum v_j^2 carried by elements that oscillate only along the first
// d0 axes.
inline double axis_share(const Eigen::VectorXd& v, const OrderedSpectrum& spec, int d0) {
  if (static_cast<std::size_t>(v.size()) != spec.size()) throw std::invalid_argument("axis_share: dimension mismatch");
  double on = 0, all = 0;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double e = v[static_cast<Eigen::Index>(j)] * v[static_cast<Eigen::Index>(j)];
    all += e;
    bool axis = true;
    for (int a = d0; a < spec.d; ++a) axis = axis && spec.elements[j].idx.m[a] == 0;
    if (axis) on += e;
  }
  return all > 0 ? on / all : 0.0;
}

}  // namespace diagkernel
