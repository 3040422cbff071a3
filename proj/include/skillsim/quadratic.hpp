#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "optim.hpp"
#include "traj.hpp"

namespace skillsim {

// loss(theta) = sum_i w_i x_i^2 with x = R theta
struct QuadraticLoss {
  std::vector<double> weights{1.0, 0.1, 0.01, 0.001};
  std::vector<double> rotation;  // flat n x n orthogonal, row-major; empty = identity

  int dim() const { return static_cast<int>(weights.size()); }

  std::vector<double> to_x(const std::vector<double>& theta) const {
    int n = dim();
    if (rotation.empty()) return theta;
    std::vector<double> x(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) x[i] += rotation[static_cast<size_t>(i) * n + j] * theta[j];
    return x;
  }

  std::vector<double> theta_of_x(const std::vector<double>& x) const {  // R^T x
    int n = dim();
    if (rotation.empty()) return x;
    std::vector<double> th(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) th[i] += rotation[static_cast<size_t>(j) * n + i] * x[j];
    return th;
  }
};

inline void validate(const QuadraticLoss& q) {
  int n = q.dim();
  for (int i = 0; i < n; ++i) {
    if (!(q.weights[i] > 0.0)) throw std::invalid_argument("quadratic: weights must be > 0");
    if (i > 0 && q.weights[i] > q.weights[i - 1]) throw std::invalid_argument("quadratic: weights must be non-increasing");
  }
  if (q.rotation.empty()) return;
  if (q.rotation.size() != static_cast<size_t>(n) * n) throw std::invalid_argument("quadratic: rotation shape mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k)
        dot += q.rotation[static_cast<size_t>(k) * n + i] * q.rotation[static_cast<size_t>(k) * n + j];
      if (std::fabs(dot - (i == j ? 1.0 : 0.0)) > 1e-12)
        throw std::invalid_argument("quadratic: rotation is not orthogonal");
    }
}

struct QuadraticEval {
  double total;
  std::vector<double> per_component;
};

inline QuadraticEval eval(const QuadraticLoss& q, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != q.dim()) throw std::invalid_argument("quadratic: theta size mismatch");
  std::vector<double> x = q.to_x(theta);
  QuadraticEval e;
  e.per_component.resize(q.dim());
  e.total = 0.0;
  for (int i = 0; i < q.dim(); ++i) {
    e.per_component[i] = q.weights[i] * x[i] * x[i];
    e.total += e.per_component[i];
  }
  return e;
}

// grad_theta = R^T diag(2w) R theta
inline std::vector<double> gradient(const QuadraticLoss& q, const std::vector<double>& theta) {
  std::vector<double> x = q.to_x(theta);
  for (int i = 0; i < q.dim(); ++i) x[i] *= 2.0 * q.weights[i];
  return q.theta_of_x(x);
}

// per-component losses recorded each step into the trajectory's task columns
inline Trajectory run_quadratic(const QuadraticLoss& q, const OptimizerSpec& opt,
                                std::vector<double> theta0, long n_steps, long record_every = 1) {
  validate(q);
  int n = q.dim();
  Trajectory out;
  out.n_task = n;
  OptimizerState st;
  std::vector<double> theta = std::move(theta0);
  auto record = [&](long step) {
    QuadraticEval e = eval(q, theta);
    out.steps.push_back(step);
    for (int i = 0; i < n; ++i) {
      out.skills.push_back(0.0);  // no skill reading for a plain quadratic
      out.task_losses.push_back(e.per_component[i]);
    }
    out.total_loss.push_back(e.total);
  };
  record(0);
  for (long step = 1; step <= n_steps; ++step) {
    std::vector<double> g = gradient(q, theta);
    opt_step(st, opt, theta, g);
    if (step % record_every == 0 || step == n_steps) record(step);
  }
  return out;
}

// the 4x4 +-1 Hadamard matrix scaled by 1/2, a true rotation
inline std::vector<double> hadamard4() {
  return {0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0.5};
}

}  // namespace skillsim
