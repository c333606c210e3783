#pragma once
// Fixed-kernel, two-layer and D-layer diagonal adaptive trainers as explicit
// Euler discretizations of their gradient flows.
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagkernel/analysis.hpp"
#include "diagkernel/basis.hpp"
#include "diagkernel/sampling.hpp"
#include "diagkernel/signals.hpp"

namespace diagkernel {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelState {
  VectorXd a, b, beta;
  VectorXd lambda;
  double b0 = 1.0;
  int D = 0;
  std::vector<char> frozen;

  std::size_t size() const noexcept { return static_cast<std::size_t>(a.size()); }
};

inline ModelState init_state(const OrderedSpectrum& spec, int D, double b0) {
  if (D < 0) throw std::invalid_argument("depth D must be >= 0");
  if (D >= 1 && !(b0 > 0)) throw std::invalid_argument("b0 must be > 0 when D >= 1");
  const auto J = static_cast<Eigen::Index>(spec.size());
  ModelState s;
  s.D = D;
  s.b0 = D >= 1 ? b0 : 1.0;
  s.lambda = Eigen::Map<const VectorXd>(spec.eigenvalues.data(), J);
  s.a = s.lambda.cwiseSqrt();
  s.beta = VectorXd::Zero(J);
  s.b = VectorXd::Constant(J, s.b0);
  s.frozen.resize(spec.size());
  for (std::size_t j = 0; j < spec.size(); ++j) s.frozen[j] = spec.frozen(j);
  return s;
}

inline VectorXd powD(const VectorXd& b, int D) {
  VectorXd out = VectorXd::Ones(b.size());
  for (int i = 0; i < D; ++i) out = out.cwiseProduct(b);
  return out;
}

inline VectorXd learned_eigs(const ModelState& s) { return s.a.cwiseProduct(powD(s.b, s.D)); }

inline VectorXd effective_coeffs(const ModelState& s) { return learned_eigs(s).cwiseProduct(s.beta); }

// Simultaneous update from pre-step values.
inline void gd_step_adaptive(ModelState& s, const VectorXd& delta, double eta) {
  const auto J = s.a.size();
  if (delta.size() != J) throw std::invalid_argument("gd_step_adaptive: dimension mismatch");
  const int D = s.D;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (s.frozen[static_cast<std::size_t>(j)]) continue;
    const double a = s.a[j], b = s.b[j], be = s.beta[j], g = delta[j];
    double bD1 = 1.0;  // b^{D-1}
    for (int i = 1; i < D; ++i) bD1 *= b;
    const double bD = D == 0 ? 1.0 : bD1 * b;
    s.beta[j] = be + eta * a * bD * g;
    s.a[j] = a + eta * bD * be * g;
    if (D > 0) s.b[j] = b + eta * D * a * bD1 * be * g;
    if (!std::isfinite(s.beta[j]) || !std::isfinite(s.a[j]) || !std::isfinite(s.b[j])) {
      std::ostringstream os;
      os << "non-finite state at component " << j << " (eta=" << eta << ")";
      throw DivergenceError(os.str());
    }
  }
}

inline void gd_step_fixed(VectorXd& theta, const VectorXd& lambda, const VectorXd& delta, double eta) {
  if (theta.size() != lambda.size() || theta.size() != delta.size())
    throw std::invalid_argument("gd_step_fixed: dimension mismatch");
  theta += eta * lambda.cwiseProduct(delta);
  if (!theta.allFinite()) throw DivergenceError("non-finite fixed-kernel iterate (eta too large)");
}

// max_j |a^2 - beta^2 - lambda| and, for D >= 1, |b^2 - D beta^2 - b0^2|.
inline double conservation_drift(const ModelState& s) {
  double m = 0;
  for (Eigen::Index j = 0; j < s.a.size(); ++j) {
    if (s.frozen[static_cast<std::size_t>(j)]) continue;
    const double be2 = s.beta[j] * s.beta[j];
    m = std::max(m, std::abs(s.a[j] * s.a[j] - be2 - s.lambda[j]));
    if (s.D > 0) m = std::max(m, std::abs(s.b[j] * s.b[j] - s.D * be2 - s.b0 * s.b0));
  }
  return m;
}

struct Schedule {
  double stop_time = 0;
  std::optional<double> b0;
};

inline Schedule schedules(double n, int D, double c_t, double c_b) {
  if (!(n >= 1) || D < 0 || !(c_t > 0) || !(c_b > 0)) throw std::invalid_argument("invalid schedule arguments");
  Schedule s;
  const double Dd = D;
  s.stop_time = c_t * std::pow(n, (Dd + 1.0) / (Dd + 2.0));
  if (D >= 1) s.b0 = c_b * std::pow(n, -1.0 / (2.0 * (Dd + 2.0)));
  return s;
}

// Stop time of the fixed kernel tuned to the misalignment class:
// c * n^{q gamma / (p + q)}.
inline double fixed_kernel_oracle_time(double n, double p, double q, double gamma, double c) {
  return c * std::pow(n, q * gamma / (p + q));
}

enum class MethodKind { fixed, adaptive };

struct Method {
  MethodKind kind = MethodKind::adaptive;
  int D = 0;
  std::string name() const {
    return kind == MethodKind::fixed ? std::string("fixed") : "adaptive_D" + std::to_string(D);
  }
};

enum class StopKind { theoretical, oracle, fixed_steps };

struct StoppingRule {
  StopKind kind = StopKind::theoretical;
  double c = 1.0;          // multiplies the theoretical time
  double holdout = 0.2;    // oracle early stop
  std::size_t patience = 50;
};

struct TrainConfig {
  double eta = 0.05;
  std::size_t max_steps = 100000;
  std::size_t snapshot_every = 100;
  StoppingRule stopping;
  double stop_time = 0;    // resolved theoretical time (flow time)
  double b0 = 1.0;         // D >= 1
  bool closed_form_fixed = false;
  bool keep_vectors = false;
  bool check_descent = true;
};

struct Snapshot {
  std::size_t step = 0;
  double flow_time = 0;
  double train_loss = 0;
  double gen_error = 0;
  double drift = 0;
  std::vector<double> theta;
  std::vector<double> learned;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
};

struct TrainResult {
  Trajectory trajectory;
  VectorXd theta;
  std::optional<ModelState> state;
  VectorXd learned0;  // learned eigenvalues at initialization
  std::size_t stop_step = 0;
  double stop_time = 0;
  double gen_error = 0;
};

inline void check_stability(double eta, const VectorXd& lambda, const CoefficientVector& truth, double sigma) {
  const double lmax = lambda.size() ? lambda.maxCoeff() : 0.0;
  const double g = eta * (lmax + truth.b_inf + sigma);
  if (!(eta > 0) || g > 0.25) {
    std::ostringstream os;
    os << "step size violates the stability guard: eta*(max lambda + |theta*|_inf + sigma) = " << g << " > 0.25";
    throw std::invalid_argument(os.str());
  }
}

// theta after `steps` Euler steps of the fixed-kernel flow, in closed form:
// Lambda^{1/2} V diag((1 - (1 - eta w)^steps) / w) V^T Lambda^{1/2} b with
// V diag(w) V^T = Lambda^{1/2} G Lambda^{1/2}.
class FixedKernelClosedForm {
 public:
  FixedKernelClosedForm(const MatrixXd& G, const VectorXd& b, const VectorXd& lambda, double eta)
      : s_(lambda.cwiseSqrt()), eta_(eta) {
    MatrixXd K = s_.asDiagonal() * G * s_.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
    w_ = es.eigenvalues().cwiseMax(0.0);
    V_ = es.eigenvectors();
    c_ = V_.transpose() * s_.cwiseProduct(b);
    if (w_.size() && eta * w_.maxCoeff() >= 2.0) throw DivergenceError("fixed-kernel Euler iteration unstable");
  }

  VectorXd theta(double steps) const {
    VectorXd g(w_.size());
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
      const double x = eta_ * w_[i];
      // (1 - (1-x)^S) / w, with the x -> 0 limit S * eta
      if (x < 1e-14) g[i] = steps * eta_;
      else if (x < 1.0) g[i] = -std::expm1(steps * std::log1p(-x)) / w_[i];
      else g[i] = (1.0 - std::pow(1.0 - x, steps)) / w_[i];
    }
    return s_.cwiseProduct(V_ * g.cwiseProduct(c_));
  }

 private:
  VectorXd s_;
  double eta_;
  VectorXd w_;
  MatrixXd V_;
  VectorXd c_;
};

inline std::size_t steps_for_time(double t, double eta) {
  return static_cast<std::size_t>(std::llround(t / eta));
}

// Trains one method on a sample. With the oracle rule the first ceil(holdout n)
// points are held out for monitoring; otherwise all points are used.
inline TrainResult train(const Sample& sample, const OrderedSpectrum& spec, const CoefficientVector& truth,
                         const Method& method, const TrainConfig& cfg) {
  const std::size_t n = sample.data.n();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (static_cast<std::size_t>(sample.E.cols()) != spec.size() || truth.theta.size() != spec.size())
    throw std::invalid_argument("train: dimension mismatch");
  if (cfg.snapshot_every == 0) throw std::invalid_argument("snapshot_every must be >= 1");
  if (cfg.stopping.kind == StopKind::theoretical && !(cfg.stopping.c > 0))
    throw std::invalid_argument("stopping constant must be > 0");
  const VectorXd lambda = Eigen::Map<const VectorXd>(spec.eigenvalues.data(), static_cast<Eigen::Index>(spec.size()));
  check_stability(cfg.eta, lambda, truth, sample.data.sigma);

  const bool oracle = cfg.stopping.kind == StopKind::oracle;
  std::size_t nh = 0;
  if (oracle) {
    if (!(cfg.stopping.holdout > 0 && cfg.stopping.holdout < 1)) throw std::invalid_argument("holdout must lie in (0,1)");
    nh = static_cast<std::size_t>(std::ceil(cfg.stopping.holdout * static_cast<double>(n)));
    if (nh >= n) throw std::invalid_argument("holdout leaves no training data");
  }
  const auto ntr = static_cast<Eigen::Index>(n - nh);
  const auto nhe = static_cast<Eigen::Index>(nh);
  ResidualOperator op(sample.E.bottomRows(ntr), sample.data.Y.tail(ntr));
  const MatrixXd Eh = sample.E.topRows(nhe);
  const VectorXd Yh = sample.data.Y.head(nhe);
  auto holdout_loss = [&](const VectorXd& th) { return 0.5 * (Yh - Eh * th).squaredNorm() / static_cast<double>(nh); };

  std::size_t total = cfg.max_steps;
  if (cfg.stopping.kind == StopKind::theoretical) total = steps_for_time(cfg.stop_time, cfg.eta);

  TrainResult res;
  std::optional<ModelState> state;
  VectorXd theta = VectorXd::Zero(lambda.size());
  if (method.kind == MethodKind::adaptive) {
    state = init_state(spec, method.D, cfg.b0);
    res.learned0 = learned_eigs(*state);
  } else {
    res.learned0 = lambda;
  }

  auto record = [&](std::size_t step, const VectorXd& th) {
    Snapshot s;
    s.step = step;
    s.flow_time = static_cast<double>(step) * cfg.eta;
    s.train_loss = op.loss(th);
    s.gen_error = gen_error(th, truth);
    s.drift = state ? conservation_drift(*state) : 0.0;
    if (cfg.keep_vectors) {
      s.theta.assign(th.data(), th.data() + th.size());
      VectorXd le = state ? learned_eigs(*state) : lambda;
      s.learned.assign(le.data(), le.data() + le.size());
    }
    if (cfg.check_descent && !res.trajectory.snapshots.empty()) {
      const double prev = res.trajectory.snapshots.back().train_loss;
      if (s.train_loss > prev + 1e-10 * (1.0 + std::abs(prev))) {
        std::ostringstream os;
        os << "train loss increased from " << prev << " to " << s.train_loss << " at step " << step
           << " (eta=" << cfg.eta << ")";
        throw DivergenceError(os.str());
      }
    }
    if (!std::isfinite(s.train_loss)) throw DivergenceError("non-finite train loss at step " + std::to_string(step));
    res.trajectory.snapshots.push_back(std::move(s));
  };

  if (method.kind == MethodKind::fixed && cfg.closed_form_fixed && !oracle) {
    FixedKernelClosedForm cf(op.gram(), op.b(), lambda, cfg.eta);
    for (std::size_t step = 0; step < total; step += cfg.snapshot_every) record(step, cf.theta(static_cast<double>(step)));
    theta = cf.theta(static_cast<double>(total));
    record(total, theta);
    res.theta = theta;
    res.stop_step = total;
  } else {
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    VectorXd best_theta = theta;
    std::optional<ModelState> best_state = state;
    std::size_t best_step = 0;
    std::size_t step = 0;
    auto snapshot = [&] {
      record(step, theta);
      if (oracle) {
        const double hl = holdout_loss(theta);
        if (hl < best) {
          best = hl;
          best_theta = theta;
          best_state = state;
          best_step = step;
          since_best = 0;
        } else {
          ++since_best;
        }
      }
    };
    snapshot();
    while (step < total) {
      const VectorXd delta = op.delta(theta);
      if (state) {
        gd_step_adaptive(*state, delta, cfg.eta);
        theta = effective_coeffs(*state);
      } else {
        gd_step_fixed(theta, lambda, delta, cfg.eta);
      }
      ++step;
      if (step % cfg.snapshot_every == 0 || step == total) {
        snapshot();
        if (oracle && since_best >= cfg.stopping.patience) break;
      }
    }
    if (oracle) {
      theta = best_theta;
      state = best_state;
      res.stop_step = best_step;
    } else {
      res.stop_step = step;
    }
    res.theta = theta;
  }
  res.state = state;
  res.stop_time = static_cast<double>(res.stop_step) * cfg.eta;
  res.gen_error = gen_error(res.theta, truth);
  return res;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os.precision(17);
  os << "step,flow_time,train_loss,gen_error,conservation_drift\n";
  for (const auto& s : tr.snapshots)
    os << s.step << "," << s.flow_time << "," << s.train_loss << "," << s.gen_error << "," << s.drift << "\n";
}

}  // namespace diagkernel
