#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "taskdist.hpp"

namespace skillsim {

struct DominoConfig {
  int n_task = 1;
  double t0 = 1.0;        // time to learn one task
  int n_learnable = -1;   // capacity cutoff, -1 = all

  int cap() const { return n_learnable < 0 ? n_task : n_learnable; }
};

inline void validate(const DominoConfig& c) {
  if (c.n_task < 1) throw std::invalid_argument("domino: n_task must be >= 1");
  if (!(c.t0 > 0.0)) throw std::invalid_argument("domino: t0 must be > 0");
  if (c.cap() > c.n_task) throw std::invalid_argument("domino: n_learnable must be <= n_task");
}

// piecewise-linear ramp: task i (1-based) learns on ((i-1)*t0, i*t0]
inline double skill_curve(const DominoConfig& c, int i, double t) {
  validate(c);
  if (i < 1 || i > c.n_task) throw std::invalid_argument("domino: task index out of range");
  if (i > c.cap()) return 0.0;  // beyond capacity, never learned
  double s = t / c.t0 - (i - 1);
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s;
}

inline double total_time(const DominoConfig& c) {
  validate(c);
  return c.cap() * c.t0;
}

// mse loss by default: L(s) = (1-s)^2 scaled to loss_at_unlearned at s=0
inline std::vector<double> loss_curve(const DominoConfig& c, const TaskDistribution& dist,
                                      const std::vector<double>& t_grid, double loss_at_unlearned = 1.0) {
  validate(c);
  if (dist.n_task() != c.n_task) throw std::invalid_argument("domino: dist size mismatch");
  std::vector<double> out(t_grid.size(), 0.0);
  for (size_t k = 0; k < t_grid.size(); ++k) {
    double l = 0.0;
    for (int i = 1; i <= c.n_task; ++i) {
      double r = 1.0 - skill_curve(c, i, t_grid[k]);
      l += dist.p[i - 1] * loss_at_unlearned * r * r;
    }
    out[k] = l;
  }
  return out;
}

struct ScalingExponents {
  double quanta_alpha_n, quanta_alpha_s;
  double domino_alpha_n, domino_alpha_s;
  bool degenerate;  // alpha <= 1: both predictions collapse to 0
};

inline ScalingExponents scaling_exponents(double alpha) {
  ScalingExponents e{};
  if (alpha <= 1.0) {
    e.degenerate = true;
    return e;
  }
  e.quanta_alpha_n = alpha - 1.0;
  e.quanta_alpha_s = (alpha - 1.0) / alpha;
  e.domino_alpha_n = alpha - 1.0;
  e.domino_alpha_s = alpha - 1.0;
  e.degenerate = false;
  return e;
}

struct ModularSpeedup {
  double t_nonmodular, t_modular, ratio;
};

// sequential learning costs n_task * t0 while a modular split runs sqrt(n_task)
// chains of sqrt(n_task) tasks in parallel; unit time scales as 1/sqrt(n_dim)
inline ModularSpeedup modular_speedup(int n_task, int n_dim) {
  if (n_task < 1 || n_dim < 1) throw std::invalid_argument("modular_speedup: counts must be >= 1");
  double unit = 1.0 / std::sqrt(static_cast<double>(n_dim));
  ModularSpeedup m;
  m.t_nonmodular = n_task * unit;
  m.t_modular = std::sqrt(static_cast<double>(n_task)) * unit;
  m.ratio = std::sqrt(static_cast<double>(n_task));
  return m;
}

}  // namespace skillsim
