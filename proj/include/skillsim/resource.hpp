#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "taskdist.hpp"
#include "traj.hpp"

namespace skillsim {

enum class ResourceVariant { independent_mse, correlated_mse, correlated_xent };

struct Gate {
  enum Kind { none, and_gate, or_gate } kind = none;
  std::vector<int> parents;
  double gamma = 0.01;
};

// piecewise-constant task frequencies: p = p_after[k] for t >= t_break[k]
struct Schedule {
  std::vector<double> t_break;
  std::vector<std::vector<double>> p_after;

  bool empty() const { return t_break.empty(); }
};

struct ResourceSystem {
  TaskDistribution dist;
  std::vector<double> corr;  // optional flat n x n; empty means identity
  std::vector<Gate> gates;   // optional, one per task
  double N0 = 0.0;
  double eta_eff = 1.0;
  ResourceVariant variant = ResourceVariant::independent_mse;
  Schedule schedule;

  int n_task() const { return dist.n_task(); }
  bool mse_state() const { return variant != ResourceVariant::correlated_xent; }

  static ResourceSystem from_geometry(const TaskDistribution& d, int n_dim, double eta_geo,
                                      double N0_ = 0.0,
                                      ResourceVariant v = ResourceVariant::independent_mse) {
    ResourceSystem r;
    r.dist = d;
    r.N0 = N0_;
    r.eta_eff = 2.0 * std::sqrt(static_cast<double>(n_dim)) * eta_geo;
    r.variant = v;
    return r;
  }

  const std::vector<double>& p_at(double t) const {
    if (schedule.empty()) return dist.p;
    size_t k = 0;
    while (k < schedule.t_break.size() && t >= schedule.t_break[k]) ++k;
    return k == 0 ? dist.p : schedule.p_after[k - 1];
  }

  // gate factor from learned fractions (1-u for mse state, s for xent state)
  double gate_factor(int i, const std::vector<double>& learned) const {
    if (gates.empty() || gates[i].kind == Gate::none) return 1.0;
    const Gate& g = gates[i];
    if (g.kind == Gate::and_gate) {
      double b = 1.0;
      for (int par : g.parents) b *= std::pow(std::clamp(learned[par], 0.0, 1.0), g.gamma);
      return b;
    }
    double b = 0.0;
    for (int par : g.parents) b = std::max(b, std::pow(std::clamp(learned[par], 0.0, 1.0), g.gamma));
    return b;
  }

  // state is u for mse variants, s for the xent variant
  void rhs(double t, const std::vector<double>& state, std::vector<double>& out,
           const std::vector<char>& frozen) const {
    int n = n_task();
    out.assign(n, 0.0);
    const std::vector<double>& p = p_at(t);
    thread_local std::vector<double> learned, drive;
    learned.resize(n);
    drive.resize(n);
    if (mse_state()) {
      for (int i = 0; i < n; ++i) {
        learned[i] = 1.0 - state[i];
        drive[i] = p[i] * std::max(state[i], 0.0);
      }
    } else {
      for (int i = 0; i < n; ++i) {
        learned[i] = state[i];
        double s = state[i];
        drive[i] = p[i] * (s > 0.0 ? std::exp(-s) / (1.0 + std::exp(-s)) : 1.0 / (1.0 + std::exp(s)));
      }
    }
    double denom = N0;
    for (int i = 0; i < n; ++i) denom += drive[i];
    if (denom <= 0.0) throw std::runtime_error("resource: degenerate system, denominator <= 0 at t=" + std::to_string(t));
    switch (variant) {
      case ResourceVariant::independent_mse:
        for (int i = 0; i < n; ++i) {
          if (frozen.size() && frozen[i]) continue;
          out[i] = -eta_eff * gate_factor(i, learned) * drive[i] / denom;
        }
        break;
      case ResourceVariant::correlated_mse:
        for (int i = 0; i < n; ++i) {
          if (frozen.size() && frozen[i]) continue;
          double num = 0.0;
          for (int k = 0; k < n; ++k) {
            double c = corr.empty() ? (i == k ? 1.0 : 0.0) : corr[static_cast<size_t>(i) * n + k];
            double term = c * drive[k];
            if (k == i) term *= gate_factor(i, learned);
            num += term;
          }
          out[i] = -eta_eff * num / denom;
        }
        break;
      case ResourceVariant::correlated_xent:
        for (int i = 0; i < n; ++i) {
          double num = 0.0;
          for (int k = 0; k < n; ++k) {
            double c = corr.empty() ? (i == k ? 1.0 : 0.0) : corr[static_cast<size_t>(i) * n + k];
            double term = c * drive[k];
            if (k == i) term *= gate_factor(i, learned);
            num += term;
          }
          out[i] = eta_eff * num / denom;
        }
        break;
    }
  }
};

inline void validate_gates(const std::vector<Gate>& gates, int n_task) {
  if (gates.empty()) return;
  if (static_cast<int>(gates.size()) != n_task) throw std::invalid_argument("gates: need one entry per task");
  for (const Gate& g : gates) {
    if (g.kind == Gate::none) continue;
    if (!(g.gamma > 0.0)) throw std::invalid_argument("gates: gamma must be > 0");
    for (int p : g.parents)
      if (p < 0 || p >= n_task) throw std::invalid_argument("gates: parent index out of range");
  }
  // acyclic check by iterative removal of resolved tasks
  std::vector<char> done(n_task, 0);
  for (int round = 0; round < n_task; ++round) {
    bool progress = false;
    for (int i = 0; i < n_task; ++i) {
      if (done[i]) continue;
      bool ready = true;
      if (gates[i].kind != Gate::none)
        for (int p : gates[i].parents) ready = ready && done[p];
      if (ready) {
        done[i] = 1;
        progress = true;
      }
    }
    if (!progress) break;
  }
  for (char d : done)
    if (!d) throw std::invalid_argument("gates: dependency graph has a cycle");
}

namespace detail {

struct Rk45Work {
  std::vector<double> k1, k2, k3, k4, k5, k6, k7, ytmp, y5, y4;
};

// one embedded Dormand-Prince step; returns the scaled error norm
inline double dp45_step(const ResourceSystem& sys, double t, double h, const std::vector<double>& y,
                        const std::vector<char>& frozen, Rk45Work& w, double atol, double rtol) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640, e5 = -92097.0 / 339200,
                      e6 = 187.0 / 2100, e7 = 1.0 / 40;
  size_t n = y.size();
  auto& [k1, k2, k3, k4, k5, k6, k7, ytmp, y5, y4] = w;
  ytmp.resize(n);
  sys.rhs(t, y, k1, frozen);
  for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
  sys.rhs(t + h / 5, ytmp, k2, frozen);
  for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  sys.rhs(t + 3 * h / 10, ytmp, k3, frozen);
  for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  sys.rhs(t + 4 * h / 5, ytmp, k4, frozen);
  for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  sys.rhs(t + 8 * h / 9, ytmp, k5, frozen);
  for (size_t i = 0; i < n; ++i)
    ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  sys.rhs(t + h, ytmp, k6, frozen);
  w.y5.resize(n);
  for (size_t i = 0; i < n; ++i)
    w.y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  sys.rhs(t + h, w.y5, k7, frozen);
  w.y4.resize(n);
  double err = 0.0;
  for (size_t i = 0; i < n; ++i) {
    w.y4[i] = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(w.y5[i]));
    double d = (w.y5[i] - w.y4[i]) / sc;
    err += d * d;
  }
  return std::sqrt(err / n);
}

}  // namespace detail

// adaptive integration recording on a uniform output grid; mse unskills are
// clamped at 0 (a component that completes is frozen)
inline Trajectory integrate(const ResourceSystem& sys, double t_end, double dt_max = 0.0,
                            int n_record = 1001, double atol = 1e-9, double rtol = 1e-7) {
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
  validate_gates(sys.gates, sys.n_task());
  int n = sys.n_task();
  std::vector<double> y(n, sys.mse_state() ? 1.0 : 0.0);
  std::vector<char> frozen(n, 0);
  detail::Rk45Work w;
  Trajectory out;
  out.n_task = n;

  auto record = [&](double t) {
    out.steps.push_back(static_cast<long>(out.times.size()));
    out.times.push_back(t);
    double total = 0.0;
    const std::vector<double>& p = sys.p_at(t);
    for (int i = 0; i < n; ++i) {
      double s = sys.mse_state() ? 1.0 - y[i] : y[i];
      double li = sys.mse_state() ? y[i] * y[i] : task_loss_of_skill(LossKind::xent, y[i]);
      out.skills.push_back(s);
      out.task_losses.push_back(li);
      total += p[i] * li;
    }
    out.total_loss.push_back(total);
  };

  double grid_dt = t_end / (n_record - 1);
  record(0.0);
  double t = 0.0;
  double h = std::min(grid_dt, 1e-2 / sys.eta_eff);
  if (dt_max > 0.0) h = std::min(h, dt_max);
  int next_rec = 1;
  size_t next_break = 0;
  while (next_rec < n_record) {
    double t_rec = next_rec * grid_dt;
    double t_stop = t_rec;
    while (next_break < sys.schedule.t_break.size() && sys.schedule.t_break[next_break] <= t) ++next_break;
    if (next_break < sys.schedule.t_break.size()) t_stop = std::min(t_stop, sys.schedule.t_break[next_break]);
    bool all_frozen = true;
    for (int i = 0; i < n; ++i) all_frozen = all_frozen && frozen[i];
    if (all_frozen) {
      for (; next_rec < n_record; ++next_rec) record(next_rec * grid_dt);
      break;
    }
    double hs = std::min(h, t_stop - t);
    // event location: land on a completion boundary instead of stepping
    // across it, so the rhs is never evaluated in the all-complete state
    if (sys.mse_state()) {
      sys.rhs(t, y, w.k1, frozen);
      for (int i = 0; i < n; ++i) {
        if (w.k1[i] < 0.0 && y[i] > 0.0) hs = std::min(hs, (1.0 - 1e-9) * y[i] / -w.k1[i]);
      }
    }
    double err = detail::dp45_step(sys, t, hs, y, frozen, w, atol, rtol);
    if (err <= 1.0) {
      t += hs;
      y = w.y5;
      if (sys.mse_state()) {
        for (int i = 0; i < n; ++i) {
          if (y[i] <= 1e-12) {
            y[i] = 0.0;
            frozen[i] = 1;
          }
        }
      }
      while (next_rec < n_record && t >= next_rec * grid_dt - 1e-12 * t_end) {
        record(next_rec * grid_dt);
        ++next_rec;
      }
    }
    double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h = hs * std::clamp(fac, 0.2, 5.0);
    if (dt_max > 0.0) h = std::min(h, dt_max);
    if (h < 1e-14 * std::max(1.0, t))
      throw std::runtime_error("integrate: step size underflow (stiffness) at t=" + std::to_string(t));
  }
  return out;
}

// fixed-step rk4 used as a brute-force cross-check of the adaptive integrator
inline std::vector<double> rk4_reference(const ResourceSystem& sys, double t_end, double dt) {
  int n = sys.n_task();
  std::vector<double> y(n, sys.mse_state() ? 1.0 : 0.0);
  std::vector<char> frozen(n, 0);
  std::vector<double> k1, k2, k3, k4, tmp(n);
  long n_steps = static_cast<long>(std::ceil(t_end / dt));
  double h = t_end / n_steps;
  double t = 0.0;
  for (long s = 0; s < n_steps; ++s) {
    sys.rhs(t, y, k1, frozen);
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    sys.rhs(t + 0.5 * h, tmp, k2, frozen);
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    sys.rhs(t + 0.5 * h, tmp, k3, frozen);
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    sys.rhs(t + h, tmp, k4, frozen);
    for (int i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if (sys.mse_state())
      for (int i = 0; i < n; ++i)
        if (y[i] <= 0.0) {
          y[i] = 0.0;
          frozen[i] = 1;
        }
    t += h;
  }
  return y;
}

struct LearningTime {
  double t_total, t_task, t_waste;
};

// closed-form time to reach conserved level C: the task part plus the waste part
inline LearningTime learning_time(const TaskDistribution& dist, double eta_eff, double N0, double C_target) {
  if (!(C_target > 0.0 && C_target < 1.0)) throw std::domain_error("learning_time: C_target must lie in (0,1)");
  double task = 0.0;
  for (double p : dist.p) task += 1.0 - std::pow(C_target, p);
  LearningTime lt;
  lt.t_task = task / eta_eff;
  lt.t_waste = -N0 * std::log(C_target) / eta_eff;
  lt.t_total = lt.t_task + lt.t_waste;
  return lt;
}

// invert t(C) by bisection on log C; valid for the ungated independent variant
inline std::vector<double> u_closed_form(const TaskDistribution& dist, double eta_eff, double N0, double t) {
  int n = dist.n_task();
  std::vector<double> u(n);
  if (t <= 0.0) {
    std::fill(u.begin(), u.end(), 1.0);
    return u;
  }
  if (N0 <= 0.0) {
    double t_all = n / eta_eff;
    if (t >= t_all) {
      std::fill(u.begin(), u.end(), 0.0);
      return u;
    }
  }
  auto time_of = [&](double logc) {
    double c = std::exp(logc);
    double acc = 0.0;
    for (double p : dist.p) acc += 1.0 - std::pow(c, p);
    return (acc - N0 * logc) / eta_eff;
  };
  double lo = -700.0, hi = 0.0;  // C in [~1e-304, 1]
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (time_of(mid) > t)
      lo = mid;
    else
      hi = mid;
  }
  double logc = 0.5 * (lo + hi);
  for (int i = 0; i < n; ++i) u[i] = std::exp(dist.p[i] * logc);
  return u;
}

inline double closed_form_loss(const TaskDistribution& dist, double eta_eff, double N0, double t) {
  std::vector<double> u = u_closed_form(dist, eta_eff, N0, t);
  double l = 0.0;
  for (int i = 0; i < dist.n_task(); ++i) l += dist.p[i] * u[i] * u[i];
  return l;
}

struct CalibResult {
  double n0;
  double residual;  // mean squared difference of log losses over the window
};

// mean squared log-loss mismatch against reference points, as a function of N0
inline double calibration_cost(const ResourceSystem& tmpl, double N0, const std::vector<double>& ts,
                               const std::vector<double>& losses) {
  bool closed = tmpl.variant == ResourceVariant::independent_mse && tmpl.gates.empty() && tmpl.schedule.empty();
  double cost = 0.0;
  if (closed) {
    for (size_t k = 0; k < ts.size(); ++k) {
      double lr = closed_form_loss(tmpl.dist, tmpl.eta_eff, N0, ts[k]);
      double d = std::log(std::max(lr, 1e-300)) - std::log(losses[k]);
      cost += d * d;
    }
  } else {
    ResourceSystem sys = tmpl;
    sys.N0 = N0;
    double t_end = ts.back();
    int n_record = 2001;
    Trajectory tr = integrate(sys, t_end, 0.0, n_record);
    for (size_t k = 0; k < ts.size(); ++k) {
      size_t r = static_cast<size_t>(std::lround(ts[k] / t_end * (n_record - 1)));
      r = std::min(r, tr.n_rec() - 1);
      double d = std::log(std::max(tr.total_loss[r], 1e-300)) - std::log(losses[k]);
      cost += d * d;
    }
  }
  return cost / ts.size();
}

// coarse log-grid scan bracketing the best cell, then golden-section refinement
inline CalibResult calibrate_N0(const std::vector<double>& ts, const std::vector<double>& losses,
                                const ResourceSystem& tmpl, double lo = 1e-6, double hi = 1e3) {
  if (ts.size() != losses.size() || ts.size() < 3)
    throw std::invalid_argument("calibrate_N0: need at least 3 reference points");
  for (double l : losses)
    if (!std::isfinite(l) || l <= 0.0) throw std::domain_error("calibrate_N0: losses must be finite and positive");
  const int n_scan = 41;
  double llo = std::log(lo), lhi = std::log(hi);
  double best = llo;
  double best_cost = 1e300;
  for (int k = 0; k < n_scan; ++k) {
    double x = llo + (lhi - llo) * k / (n_scan - 1);
    double c = calibration_cost(tmpl, std::exp(x), ts, losses);
    if (c < best_cost) {
      best_cost = c;
      best = x;
    }
  }
  double cell = (lhi - llo) / (n_scan - 1);
  double a = std::max(llo, best - cell), b = std::min(lhi, best + cell);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = calibration_cost(tmpl, std::exp(x1), ts, losses);
  double f2 = calibration_cost(tmpl, std::exp(x2), ts, losses);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = calibration_cost(tmpl, std::exp(x1), ts, losses);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = calibration_cost(tmpl, std::exp(x2), ts, losses);
    }
  }
  double xb = f1 < f2 ? x1 : x2;
  return {std::exp(xb), std::min(f1, f2)};
}

// pull (step, loss) pairs out of a geometry trajectory, dropping the converged
// tail where log-loss comparisons stop being informative
inline void fit_points_from_trajectory(const Trajectory& tr, std::vector<double>& ts,
                                       std::vector<double>& losses, double loss_floor = 1e-5) {
  ts.clear();
  losses.clear();
  for (size_t r = 0; r < tr.n_rec(); ++r) {
    if (tr.steps[r] == 0) continue;
    if (tr.total_loss[r] > loss_floor) {
      ts.push_back(static_cast<double>(tr.steps[r]));
      losses.push_back(tr.total_loss[r]);
    }
  }
}

enum class ResponseAxis { lr, noise, batch };

struct ResponseBase {
  int n_task = 10;
  double alpha = 2.0;
  int n_dim = 1000;
  TvMode tv_mode = TvMode::orthogonalized;
  uint64_t tv_seed = 7;
  OptimizerSpec opt;  // signgd lr 3e-4 by default
  double noise = 0.0;
  int batch = 128;
  long n_steps = 20000;
  long record_every = 10;
  uint64_t run_seed = 5;
  double loss_floor = 1e-5;
};

// run geometry at each grid value of the chosen axis and fit N0 to the curve
inline std::vector<std::pair<double, double>> n0_response_curve(ResponseAxis axis,
                                                                const std::vector<double>& grid,
                                                                const ResponseBase& base) {
  if (grid.empty()) throw std::invalid_argument("n0_response_curve: empty grid");
  std::vector<std::pair<double, double>> out;
  for (double v : grid) {
    ResponseBase c = base;
    if (axis == ResponseAxis::lr)
      c.opt.lr = v;
    else if (axis == ResponseAxis::noise)
      c.noise = v;
    else
      c.batch = static_cast<int>(v);  // 0 encodes the full batch
    TaskDistribution dist = make_powerlaw(c.n_task, c.alpha);
    TaskVectorSet tv = make_task_vectors(c.n_task, c.n_dim, c.tv_mode, c.tv_seed);
    GeometrySystem sys = GeometrySystem::create(std::move(tv), dist, LossKind::mse, c.noise, c.batch);
    Trajectory tr = run_geometry(sys, c.opt, c.n_steps, c.record_every, false, c.run_seed);
    std::vector<double> ts, losses;
    fit_points_from_trajectory(tr, ts, losses, c.loss_floor);
    ResourceSystem tmpl = ResourceSystem::from_geometry(dist, c.n_dim, c.opt.lr);
    CalibResult cr = calibrate_N0(ts, losses, tmpl);
    out.emplace_back(v, cr.n0);
  }
  return out;
}

struct OptimalLr {
  double eta_star;
  bool degenerate;  // all unskills zero
};

// maximizer of eta * M / (M + kappa eta^2) with M = sum p_j u_j
inline OptimalLr optimal_lr(const TaskDistribution& dist, const std::vector<double>& u, double kappa) {
  if (static_cast<int>(u.size()) != dist.n_task()) throw std::invalid_argument("optimal_lr: u size mismatch");
  if (!(kappa > 0.0)) throw std::invalid_argument("optimal_lr: kappa must be > 0");
  double m = 0.0;
  for (int i = 0; i < dist.n_task(); ++i) m += dist.p[i] * u[i];
  if (m <= 0.0) return {0.0, true};
  return {std::sqrt(m / kappa), false};
}

// largest pairwise spread of the conserved quantity u^(1/p) along a trajectory
inline double conserved_max_dev(const Trajectory& tr, const TaskDistribution& dist, double p_floor = 0.02) {
  double dev = 0.0;
  for (size_t r = 0; r < tr.n_rec(); ++r) {
    double cmin = 1e300, cmax = -1e300;
    bool done = false;
    for (int i = 0; i < dist.n_task(); ++i) {
      if (dist.p[i] < p_floor) continue;
      double u = 1.0 - tr.skill(r, i);
      if (u <= 0.0) {
        done = true;
        break;
      }
      double c = std::pow(u, 1.0 / dist.p[i]);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
    if (done) break;  // a task completed; the conserved quantity is only defined before that
    if (cmax > cmin) dev = std::max(dev, cmax - cmin);
  }
  return dev;
}

// completion time per task: first grid time with unskill below thresh
inline std::vector<double> completion_times(const Trajectory& tr, double thresh = 0.01) {
  std::vector<double> out(tr.n_task, -1.0);
  for (int i = 0; i < tr.n_task; ++i)
    for (size_t r = 0; r < tr.n_rec(); ++r)
      if (1.0 - tr.skill(r, i) < thresh) {
        out[i] = tr.times[r];
        break;
      }
  return out;
}

}  // namespace skillsim
