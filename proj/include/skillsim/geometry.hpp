#pragma once
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "optim.hpp"
#include "rng.hpp"
#include "taskdist.hpp"
#include "traj.hpp"

namespace skillsim {

enum class LossKind { mse, xent };

inline double task_loss_of_skill(LossKind k, double s) {
  if (k == LossKind::mse) {
    double r = 1.0 - s;
    return r * r;
  }
  // -log sigmoid(s), stable for both signs
  return s > 0.0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
}

inline double dloss_of_skill(LossKind k, double s) {
  if (k == LossKind::mse) return -2.0 * (1.0 - s);
  return -1.0 / (1.0 + std::exp(s));  // -sigmoid(-s)
}

struct GeometrySystem {
  TaskVectorSet tv;
  TaskDistribution dist;
  LossKind loss_kind = LossKind::mse;
  double noise_sigma = 0.0;
  int batch_size = 0;  // 0 = exact frequencies (infinite batch)
  std::vector<double> theta, theta0;
  DiscreteSampler sampler;

  static GeometrySystem create(TaskVectorSet tv_, TaskDistribution dist_, LossKind k = LossKind::mse,
                               double noise_sigma_ = 0.0, int batch_size_ = 0) {
    if (tv_.n_task != dist_.n_task())
      throw std::invalid_argument("geometry: task-vector and distribution sizes differ");
    GeometrySystem g;
    g.tv = std::move(tv_);
    g.dist = std::move(dist_);
    g.loss_kind = k;
    g.noise_sigma = noise_sigma_;
    g.batch_size = batch_size_;
    g.theta.assign(g.tv.n_dim, 0.0);
    g.theta0.assign(g.tv.n_dim, 0.0);
    g.sampler = DiscreteSampler(g.dist);
    return g;
  }

  int n_task() const { return tv.n_task; }
  int n_dim() const { return tv.n_dim; }

  void skill_levels_into(std::vector<double>& s) const {
    int nt = n_task(), nd = n_dim();
    s.resize(nt);
    for (int i = 0; i < nt; ++i) {
      const double* ti = tv.row(i);
      double acc = 0.0;
      for (int j = 0; j < nd; ++j) acc += (theta[j] - theta0[j]) * ti[j];
      s[i] = acc;
    }
  }

  std::vector<double> skill_levels() const {
    std::vector<double> s;
    skill_levels_into(s);
    return s;
  }

  double total_loss() const {
    std::vector<double> s = skill_levels();
    double l = 0.0;
    for (int i = 0; i < n_task(); ++i) l += dist.p[i] * task_loss_of_skill(loss_kind, s[i]);
    return l;
  }

  // grad of sum_i ptilde_i L(s_i); empirical frequencies when batch_size > 0
  void batch_gradient_into(Rng& rng, std::vector<double>& grad, std::vector<double>& s_buf,
                           std::vector<double>& pt_buf) const {
    int nt = n_task(), nd = n_dim();
    skill_levels_into(s_buf);
    pt_buf.assign(nt, 0.0);
    if (batch_size == 0) {
      double z = dist.sum();
      for (int i = 0; i < nt; ++i) pt_buf[i] = dist.p[i] / z;
    } else {
      double w = 1.0 / batch_size;
      for (int b = 0; b < batch_size; ++b) pt_buf[sampler.sample(rng)] += w;
    }
    grad.assign(nd, 0.0);
    for (int i = 0; i < nt; ++i) {
      if (pt_buf[i] == 0.0) continue;
      double w = pt_buf[i] * dloss_of_skill(loss_kind, s_buf[i]);
      const double* ti = tv.row(i);
      for (int j = 0; j < nd; ++j) grad[j] += w * ti[j];
    }
    if (noise_sigma > 0.0)
      for (int j = 0; j < nd; ++j) grad[j] += noise_sigma * rng.gaussian();
  }

  std::vector<double> batch_gradient(Rng& rng) const {
    std::vector<double> g, s, pt;
    batch_gradient_into(rng, g, s, pt);
    return g;
  }
};

// signed count of coordinates where the task gradient agrees with the total
inline int n_align(const std::vector<double>& grad_total, const std::vector<double>& grad_task) {
  if (grad_total.size() != grad_task.size()) throw std::invalid_argument("n_align: length mismatch");
  int a = 0;
  for (size_t j = 0; j < grad_total.size(); ++j) a += sgn(grad_task[j]) * sgn(grad_total[j]);
  return a;
}

inline Trajectory run_geometry(GeometrySystem& sys, const OptimizerSpec& opt, long n_steps,
                               long record_every = 1, bool record_align = false, uint64_t seed = 0) {
  if (n_steps < 1) throw std::invalid_argument("run_geometry: n_steps must be >= 1");
  int nt = sys.n_task(), nd = sys.n_dim();
  Rng rng(seed);
  OptimizerState st;
  Trajectory out;
  out.n_task = nt;
  std::vector<double> grad, s, pt, gtask(record_align ? nd : 0);
  double z = sys.dist.sum();

  auto record = [&](long step) {
    sys.skill_levels_into(s);
    out.steps.push_back(step);
    double total = 0.0;
    for (int i = 0; i < nt; ++i) {
      double li = task_loss_of_skill(sys.loss_kind, s[i]);
      out.skills.push_back(s[i]);
      out.task_losses.push_back(li);
      total += (sys.dist.p[i] / z) * li;
    }
    out.total_loss.push_back(total);
    if (record_align) {
      // alignment of each task's full-batch gradient with the total full-batch gradient
      std::vector<double> gtot(nd, 0.0);
      for (int i = 0; i < nt; ++i) {
        double w = (sys.dist.p[i] / z) * dloss_of_skill(sys.loss_kind, s[i]);
        const double* ti = sys.tv.row(i);
        for (int j = 0; j < nd; ++j) gtot[j] += w * ti[j];
      }
      for (int i = 0; i < nt; ++i) {
        double w = (sys.dist.p[i] / z) * dloss_of_skill(sys.loss_kind, s[i]);
        const double* ti = sys.tv.row(i);
        int a = 0;
        for (int j = 0; j < nd; ++j) a += sgn(w * ti[j]) * sgn(gtot[j]);
        out.align.push_back(static_cast<double>(a));
      }
    }
  };

  record(0);
  for (long step = 1; step <= n_steps; ++step) {
    sys.batch_gradient_into(rng, grad, s, pt);
    try {
      opt_step(st, opt, sys.theta, grad);
    } catch (NumericFault& e) {
      throw NumericFault(e.index, std::string(e.what()) + " at training step " + std::to_string(step));
    }
    if (step % record_every == 0 || step == n_steps) record(step);
  }
  return out;
}

struct DimSweepPoint {
  int n_dim;
  double final_loss;
  long steps_run;
};

struct DimSweepConfig {
  std::vector<int> dims;
  int n_task = 1000;
  double alpha = 1.0;
  OptimizerSpec opt;
  long n_steps = 100000;
  long record_every = 100;
  LossKind loss_kind = LossKind::mse;
  uint64_t seed = 0;
  double tail_frac = 0.25;     // plateau readout: mean loss over the trailing fraction
  bool early_stop = true;      // stop when the tail mean stops moving
  double plateau_rtol = 2e-3;  // relative change between consecutive tail means
};

// one run per n_dim with random (non-orthogonalized) task vectors; the final
// loss is a tail average because sign-based updates settle into limit cycles
inline std::vector<DimSweepPoint> loss_vs_dim_sweep(const DimSweepConfig& cfg) {
  std::vector<DimSweepPoint> out;
  TaskDistribution dist = make_powerlaw(cfg.n_task, cfg.alpha);
  for (int nd : cfg.dims) {
    TaskVectorSet tv = make_task_vectors(cfg.n_task, nd, TvMode::random, cfg.seed);
    GeometrySystem sys = GeometrySystem::create(std::move(tv), dist, cfg.loss_kind);
    Rng rng(cfg.seed);
    OptimizerState st;
    std::vector<double> grad, s, pt;
    std::vector<double> losses;
    double prev_tail = -1.0;
    long step = 0;
    long check_every = std::max<long>(cfg.n_steps / 8, cfg.record_every);
    for (; step < cfg.n_steps; ++step) {
      sys.batch_gradient_into(rng, grad, s, pt);
      opt_step(st, cfg.opt, sys.theta, grad);
      if ((step + 1) % cfg.record_every == 0) {
        losses.push_back(sys.total_loss());
        if (cfg.early_stop && (step + 1) % check_every == 0 && losses.size() >= 16) {
          size_t k = losses.size() - std::max<size_t>(1, static_cast<size_t>(losses.size() * cfg.tail_frac));
          double tail = 0.0;
          for (size_t r = k; r < losses.size(); ++r) tail += losses[r];
          tail /= (losses.size() - k);
          if (prev_tail > 0.0 && std::fabs(tail - prev_tail) < cfg.plateau_rtol * prev_tail) {
            ++step;
            break;
          }
          prev_tail = tail;
        }
      }
    }
    size_t k = losses.size() - std::max<size_t>(1, static_cast<size_t>(losses.size() * cfg.tail_frac));
    double tail = 0.0;
    for (size_t r = k; r < losses.size(); ++r) tail += losses[r];
    tail /= (losses.size() - k);
    out.push_back({nd, tail, step});
  }
  return out;
}

}  // namespace skillsim
