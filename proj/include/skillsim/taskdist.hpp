#pragma once
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace skillsim {

enum class DistKind { powerlaw, exponential, explicit_kind };

struct TaskDistribution {
  std::vector<double> p;  // non-increasing, all > 0
  double alpha = 0.0;
  DistKind kind = DistKind::explicit_kind;
  bool normalized = true;

  int n_task() const { return static_cast<int>(p.size()); }
  double sum() const {
    double s = 0.0;
    for (double x : p) s += x;
    return s;
  }
};

inline TaskDistribution make_powerlaw(int n_task, double alpha, bool normalize = true) {
  if (n_task < 1) throw std::invalid_argument("make_powerlaw: empty distribution (n_task < 1)");
  if (alpha < 0.0) throw std::invalid_argument("make_powerlaw: alpha must be >= 0");
  TaskDistribution d;
  d.alpha = alpha;
  d.kind = DistKind::powerlaw;
  d.normalized = normalize;
  d.p.resize(n_task);
  double z = 0.0;
  for (int i = 0; i < n_task; ++i) {
    d.p[i] = std::pow(static_cast<double>(i + 1), -alpha);
    z += d.p[i];
  }
  if (normalize)
    for (double& x : d.p) x /= z;
  return d;
}

inline TaskDistribution make_exponential(int n_task, double alpha, bool normalize = true) {
  if (n_task < 1) throw std::invalid_argument("make_exponential: empty distribution (n_task < 1)");
  if (alpha < 0.0) throw std::invalid_argument("make_exponential: alpha must be >= 0");
  TaskDistribution d;
  d.alpha = alpha;
  d.kind = DistKind::exponential;
  d.normalized = normalize;
  d.p.resize(n_task);
  double z = 0.0;
  for (int i = 0; i < n_task; ++i) {
    d.p[i] = std::exp(-alpha * (i + 1));
    z += d.p[i];
  }
  if (normalize)
    for (double& x : d.p) x /= z;
  return d;
}

inline TaskDistribution make_explicit(std::vector<double> p, bool normalize = true) {
  if (p.empty()) throw std::invalid_argument("make_explicit: empty distribution");
  for (size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("make_explicit: p[" + std::to_string(i) + "] must be > 0");
    if (i > 0 && p[i] > p[i - 1] + 1e-15)
      throw std::invalid_argument("make_explicit: frequencies must be non-increasing");
  }
  TaskDistribution d;
  d.kind = DistKind::explicit_kind;
  d.normalized = normalize;
  d.p = std::move(p);
  if (normalize) {
    double z = d.sum();
    for (double& x : d.p) x /= z;
  }
  return d;
}

// inverse-cdf sampler over task indices
struct DiscreteSampler {
  std::vector<double> cdf;

  DiscreteSampler() = default;
  explicit DiscreteSampler(const TaskDistribution& d) {
    cdf.resize(d.p.size());
    double acc = 0.0, z = d.sum();
    for (size_t i = 0; i < d.p.size(); ++i) {
      acc += d.p[i] / z;
      cdf[i] = acc;
    }
    cdf.back() = 1.0;
  }

  int sample(Rng& rng) const {
    double u = rng.uniform();
    return static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  }
};

enum class TvMode { random, orthogonalized, onehot };

struct TaskVectorSet {
  int n_task = 0, n_dim = 0;
  TvMode mode = TvMode::random;
  std::vector<double> v;  // row-major n_task x n_dim, unit rows

  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * n_dim; }
  double* row(int i) { return v.data() + static_cast<size_t>(i) * n_dim; }
};

inline TaskVectorSet make_task_vectors(int n_task, int n_dim, TvMode mode, uint64_t seed) {
  if (n_task < 1 || n_dim < 1) throw std::invalid_argument("make_task_vectors: need n_task >= 1 and n_dim >= 1");
  if ((mode == TvMode::orthogonalized || mode == TvMode::onehot) && n_task > n_dim)
    throw std::invalid_argument("make_task_vectors: orthogonalized/onehot require n_task <= n_dim");
  TaskVectorSet tv;
  tv.n_task = n_task;
  tv.n_dim = n_dim;
  tv.mode = mode;
  tv.v.assign(static_cast<size_t>(n_task) * n_dim, 0.0);
  if (mode == TvMode::onehot) {
    for (int i = 0; i < n_task; ++i) tv.row(i)[i] = 1.0;
    return tv;
  }
  Rng rng(seed);
  double sd = 1.0 / std::sqrt(static_cast<double>(n_dim));
  for (int i = 0; i < n_task; ++i) {
    double* r = tv.row(i);
    for (int j = 0; j < n_dim; ++j) r[j] = sd * rng.gaussian();
  }
  if (mode == TvMode::orthogonalized) {
    // modified Gram-Schmidt in frequency order: task 1 keeps its random direction
    for (int i = 0; i < n_task; ++i) {
      double* ri = tv.row(i);
      for (int k = 0; k < i; ++k) {
        const double* rk = tv.row(k);
        double dot = 0.0;
        for (int j = 0; j < n_dim; ++j) dot += ri[j] * rk[j];
        for (int j = 0; j < n_dim; ++j) ri[j] -= dot * rk[j];
      }
      double nrm = 0.0;
      for (int j = 0; j < n_dim; ++j) nrm += ri[j] * ri[j];
      nrm = std::sqrt(nrm);
      if (nrm < 1e-12) throw std::runtime_error("make_task_vectors: degenerate direction during orthogonalization");
      for (int j = 0; j < n_dim; ++j) ri[j] /= nrm;
    }
  } else {
    for (int i = 0; i < n_task; ++i) {
      double* r = tv.row(i);
      double nrm = 0.0;
      for (int j = 0; j < n_dim; ++j) nrm += r[j] * r[j];
      nrm = std::sqrt(nrm);
      for (int j = 0; j < n_dim; ++j) r[j] /= nrm;
    }
  }
  return tv;
}

// flat n_task x n_task matrix of pairwise inner products
inline std::vector<double> correlation_matrix(const TaskVectorSet& tv) {
  int n = tv.n_task, d = tv.n_dim;
  std::vector<double> c(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      double dot = 0.0;
      const double *ri = tv.row(i), *rk = tv.row(k);
      for (int j = 0; j < d; ++j) dot += ri[j] * rk[j];
      c[static_cast<size_t>(i) * n + k] = dot;
      c[static_cast<size_t>(k) * n + i] = dot;
    }
  }
  return c;
}

}  // namespace skillsim
