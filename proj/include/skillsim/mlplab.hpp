#pragma once
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlp.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "taskdist.hpp"

namespace skillsim {

struct SparseParityTask {
  int n_tasks = 1, n = 8, k = 2;
  std::vector<std::vector<int>> subsets;  // k payload indices per task
  TaskDistribution dist;                  // over control bits

  int input_dim() const { return n_tasks + n; }
};

inline SparseParityTask make_sparse_parity(int n_tasks, int n, int k, double alpha, uint64_t seed) {
  if (k < 1 || k > n) throw std::invalid_argument("sparse parity: need 1 <= k <= n");
  SparseParityTask t;
  t.n_tasks = n_tasks;
  t.n = n;
  t.k = k;
  t.dist = make_powerlaw(n_tasks, alpha);
  Rng rng(seed);
  for (int i = 0; i < n_tasks; ++i) {
    // k distinct payload indices per task
    std::vector<int> pool(n);
    for (int j = 0; j < n; ++j) pool[j] = j;
    std::vector<int> s;
    for (int j = 0; j < k; ++j) {
      size_t pick = rng.below(pool.size());
      s.push_back(pool[pick]);
      pool.erase(pool.begin() + pick);
    }
    std::sort(s.begin(), s.end());
    t.subsets.push_back(std::move(s));
  }
  return t;
}

// inputs: [one-hot control block | payload bits]; label = parity over S_control
template <typename T>
void gen_multitask_parity(const SparseParityTask& task, int n_samples, Rng& rng, std::vector<T>& X,
                          std::vector<T>& y, std::vector<int>* control = nullptr,
                          const DiscreteSampler* sampler = nullptr) {
  int d = task.input_dim();
  X.assign(static_cast<size_t>(n_samples) * d, T(0));
  y.assign(n_samples, T(0));
  if (control) control->assign(n_samples, 0);
  DiscreteSampler local;
  if (!sampler) {
    local = DiscreteSampler(task.dist);
    sampler = &local;
  }
  for (int r = 0; r < n_samples; ++r) {
    int ci = sampler->sample(rng);
    T* row = X.data() + static_cast<size_t>(r) * d;
    row[ci] = T(1);
    int par = 0;
    for (int j = 0; j < task.n; ++j) {
      int bit = rng.bit();
      row[task.n_tasks + j] = static_cast<T>(bit);
    }
    for (int j : task.subsets[ci]) par ^= (row[task.n_tasks + j] > T(0.5)) ? 1 : 0;
    y[r] = static_cast<T>(par);
    if (control) (*control)[r] = ci;
  }
}

struct RunResult {
  std::vector<long> eval_steps;
  std::vector<double> train_loss, test_loss;
  std::vector<double> train_acc, test_acc;
  std::vector<std::vector<double>> task_metric;  // per eval row: one accuracy (or mse) per subtask
  std::vector<long> success_time;                // first eval step past threshold, -1 if never
  uint64_t seed = 0;
  std::string config;
};

struct TrainConfig {
  OptimizerSpec opt;
  long n_steps = 10000;
  int batch_size = 512;  // fresh samples per step
  long eval_every = 50;
  bool reweight = false;
  double acc_threshold = 0.99;
  int eval_per_task = 64;
  uint64_t seed = 0;
  bool stop_when_all_succeed = false;
};

// minibatch training on freshly generated parity batches; per-subtask accuracy
// on a held-out eval set stratified by control bit
template <typename T>
RunResult train_parity(DenseNet<T>& net, const SparseParityTask& task, const TrainConfig& cfg) {
  enable_flush_to_zero();
  Rng rng(cfg.seed);
  Rng eval_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  int d = task.input_dim();
  // stratified eval set: eval_per_task rows per control bit
  int ne = cfg.eval_per_task * task.n_tasks;
  std::vector<T> Xe(static_cast<size_t>(ne) * d, T(0)), ye(ne);
  for (int ci = 0; ci < task.n_tasks; ++ci)
    for (int r = 0; r < cfg.eval_per_task; ++r) {
      int row = ci * cfg.eval_per_task + r;
      T* x = Xe.data() + static_cast<size_t>(row) * d;
      x[ci] = T(1);
      int par = 0;
      for (int j = 0; j < task.n; ++j) x[task.n_tasks + j] = static_cast<T>(eval_rng.bit());
      for (int j : task.subsets[ci]) par ^= (x[task.n_tasks + j] > T(0.5)) ? 1 : 0;
      ye[row] = static_cast<T>(par);
    }
  DiscreteSampler sampler(task.dist);
  OptimizerStateT<T> st;
  NetWorkspace<T> ws, we;
  std::vector<T> X, y, perex;
  RunResult res;
  res.seed = cfg.seed;
  res.success_time.assign(task.n_tasks, -1);
  for (long step = 1; step <= cfg.n_steps; ++step) {
    gen_multitask_parity(task, cfg.batch_size, rng, X, y, nullptr, &sampler);
    net.forward(ws, X.data(), cfg.batch_size);
    double loss = net.loss_bce(ws, y.data(), cfg.reweight ? &perex : nullptr);
    if (!std::isfinite(loss) || loss > 1e6)
      throw std::runtime_error("train_parity: diverged at step " + std::to_string(step) +
                               " (loss=" + std::to_string(loss) + ")");
    if (cfg.reweight) net.apply_row_weights(ws, perex);
    net.backward(ws);
    opt_step(st, cfg.opt, net.params, net.grads);
    if (step % cfg.eval_every == 0 || step == cfg.n_steps) {
      net.forward(we, Xe.data(), ne);
      res.eval_steps.push_back(step);
      res.train_loss.push_back(loss);
      std::vector<double> accs(task.n_tasks, 0.0);
      double tot = 0.0, wloss = 0.0, psum = task.dist.sum();
      for (int ci = 0; ci < task.n_tasks; ++ci) {
        int hit = 0;
        double bce = 0.0;
        for (int r = 0; r < cfg.eval_per_task; ++r) {
          int row = ci * cfg.eval_per_task + r;
          double z = we.acts.back()(row, 0), t = ye[row];
          bool pred = z > 0.0;
          if (pred == (t > 0.5)) ++hit;
          bce += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        }
        accs[ci] = static_cast<double>(hit) / cfg.eval_per_task;
        tot += accs[ci];
        wloss += task.dist.p[ci] / psum * (bce / cfg.eval_per_task);
        if (accs[ci] >= cfg.acc_threshold && res.success_time[ci] < 0) res.success_time[ci] = step;
      }
      res.test_acc.push_back(tot / task.n_tasks);
      res.test_loss.push_back(wloss);
      res.task_metric.push_back(std::move(accs));
      if (cfg.stop_when_all_succeed) {
        bool all = true;
        for (long s : res.success_time) all = all && s >= 0;
        if (all) break;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// compositional parity: y1 = x1^x2, y2 = x3^x4, y3 = y1^y2 (or the flat
// ablation y3' = x5^x6^x7^x8); one hidden layer of 50, full batch
struct CompositionalConfig {
  bool ablation = false;
  int n_bits = 32, n_samples = 10000, n_eval = 2048, width = 50;
  double lr = 1e-3;
  long n_steps = 15000, eval_every = 50;
  double acc_threshold = 0.99;
  uint64_t seed = 0;
};

template <typename T>
void gen_compositional(int n_bits, bool ablation, int n, Rng& rng, std::vector<T>& X, std::vector<T>& Y) {
  X.resize(static_cast<size_t>(n) * n_bits);
  Y.resize(static_cast<size_t>(n) * 3);
  for (int r = 0; r < n; ++r) {
    T* x = X.data() + static_cast<size_t>(r) * n_bits;
    for (int j = 0; j < n_bits; ++j) x[j] = static_cast<T>(rng.bit());
    auto bit = [&](int j) { return x[j] > T(0.5) ? 1 : 0; };
    int y1 = bit(0) ^ bit(1);
    int y2 = bit(2) ^ bit(3);
    int y3 = ablation ? (bit(4) ^ bit(5) ^ bit(6) ^ bit(7)) : (y1 ^ y2);
    Y[static_cast<size_t>(r) * 3 + 0] = static_cast<T>(y1);
    Y[static_cast<size_t>(r) * 3 + 1] = static_cast<T>(y2);
    Y[static_cast<size_t>(r) * 3 + 2] = static_cast<T>(y3);
  }
}

template <typename T = float>
RunResult experiment_compositional_parity(const CompositionalConfig& cfg) {
  enable_flush_to_zero();
  Rng rng(cfg.seed);
  std::vector<T> X, Y, Xe, Ye;
  gen_compositional(cfg.n_bits, cfg.ablation, cfg.n_samples, rng, X, Y);
  gen_compositional(cfg.n_bits, cfg.ablation, cfg.n_eval, rng, Xe, Ye);
  DenseNet<T> net = DenseNet<T>::dense({cfg.n_bits, cfg.width, 3}, Head::sigmoid_bce);
  net.init(rng);
  OptimizerSpec opt;
  opt.algo = Algo::adam;
  opt.lr = cfg.lr;
  OptimizerStateT<T> st;
  NetWorkspace<T> ws, we;
  RunResult res;
  res.seed = cfg.seed;
  res.success_time.assign(3, -1);
  for (long step = 1; step <= cfg.n_steps; ++step) {
    net.forward(ws, X.data(), cfg.n_samples);
    double loss = net.loss_bce(ws, Y.data());
    if (!std::isfinite(loss) || loss > 1e6)
      throw std::runtime_error("compositional parity: diverged at step " + std::to_string(step));
    net.backward(ws);
    opt_step(st, opt, net.params, net.grads);
    if (step % cfg.eval_every == 0 || step == cfg.n_steps) {
      net.forward(we, Xe.data(), cfg.n_eval);
      res.eval_steps.push_back(step);
      res.train_loss.push_back(loss);
      std::vector<double> accs(3);
      for (int c = 0; c < 3; ++c) {
        accs[c] = accuracy_bce(we.acts.back(), Ye.data(), c);
        if (accs[c] >= cfg.acc_threshold && res.success_time[c] < 0) res.success_time[c] = step;
      }
      res.task_metric.push_back(std::move(accs));
      bool all = true;
      for (long s : res.success_time) all = all && s >= 0;
      if (all) break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// grokking on modular addition a + b = c (mod p): learnable embeddings feed a
// relu mlp; train on 80% of all pairs, test on the rest
struct GrokkingConfig {
  int p = 59, embed_dim = 32;
  std::vector<int> hidden{100, 100, 100};
  double emb_std = 0.35;  // small embedding init is what lets generalization happen at all here
  Algo algo = Algo::signgd;
  double lr = 1e-3, weight_decay = 0.0;
  long n_steps = 10000, eval_every = 250;
  uint64_t seed = 0;
};

template <typename T = float>
RunResult experiment_grokking(const GrokkingConfig& cfg) {
  enable_flush_to_zero();
  Rng rng(cfg.seed);
  int P = cfg.p, n_all = P * P;
  std::vector<int> ids(static_cast<size_t>(n_all) * 2);
  std::vector<int> labels(n_all);
  for (int a = 0; a < P; ++a)
    for (int b = 0; b < P; ++b) {
      int r = a * P + b;
      ids[2 * r] = a;
      ids[2 * r + 1] = b;
      labels[r] = (a + b) % P;
    }
  // fisher-yates split
  std::vector<int> perm(n_all);
  for (int i = 0; i < n_all; ++i) perm[i] = i;
  for (int i = n_all - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  int n_train = static_cast<int>(0.8 * n_all);
  int n_test = n_all - n_train;
  std::vector<int> ids_tr(static_cast<size_t>(n_train) * 2), lab_tr(n_train);
  std::vector<int> ids_te(static_cast<size_t>(n_test) * 2), lab_te(n_test);
  for (int i = 0; i < n_train; ++i) {
    ids_tr[2 * i] = ids[2 * perm[i]];
    ids_tr[2 * i + 1] = ids[2 * perm[i] + 1];
    lab_tr[i] = labels[perm[i]];
  }
  for (int i = 0; i < n_test; ++i) {
    ids_te[2 * i] = ids[2 * perm[n_train + i]];
    ids_te[2 * i + 1] = ids[2 * perm[n_train + i] + 1];
    lab_te[i] = labels[perm[n_train + i]];
  }
  std::vector<int> arch = cfg.hidden;
  arch.push_back(P);
  DenseNet<T> net = DenseNet<T>::embedded(P, cfg.embed_dim, 2, arch, Head::softmax_xent);
  net.init(rng, cfg.emb_std);
  OptimizerSpec opt;
  opt.algo = cfg.algo;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  OptimizerStateT<T> st;
  NetWorkspace<T> ws, we;
  RunResult res;
  res.seed = cfg.seed;
  for (long step = 1; step <= cfg.n_steps; ++step) {
    net.forward_tokens(ws, ids_tr.data(), n_train);
    double loss = net.loss_xent(ws, lab_tr.data());
    if (!std::isfinite(loss) || loss > 1e6)
      throw std::runtime_error("grokking: diverged at step " + std::to_string(step));
    net.backward(ws);
    opt_step(st, opt, net.params, net.grads);
    if (step % cfg.eval_every == 0 || step == cfg.n_steps) {
      res.eval_steps.push_back(step);
      res.train_loss.push_back(loss);
      net.forward_tokens(we, ids_tr.data(), n_train);
      res.train_acc.push_back(accuracy_xent(we.acts.back(), lab_tr.data()));
      net.forward_tokens(we, ids_te.data(), n_test);
      res.test_acc.push_back(accuracy_xent(we.acts.back(), lab_te.data()));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// modularity regression: learn (x, y) -> (x^2, y^2) where y is zero on 99% of
// rows; one joint network against two disjoint halves
struct ModularityConfig {
  int n_samples = 1000;
  double sparse_prob = 0.99;  // probability that y = 0
  double lr = 5e-4;
  long max_steps = 40000;
  double mse_threshold = 1e-3;
  uint64_t seed = 0;
};

struct ModularityOutcome {
  long t1 = -1, t2 = -1;  // first step per task below the mse threshold
};

namespace detail {
// per-task readout: task 1 scored on every row, task 2 only on rows where the
// sparse input actually fired (the constant-zero predictor stays above
// threshold there, so success demands real learning)
template <typename T>
void modularity_success(const MatX<T>& pred1, int col1, const MatX<T>& pred2, int col2,
                        const std::vector<T>& target, int n, const std::vector<int>& ynz, long step,
                        double thresh, ModularityOutcome& out) {
  if (out.t1 < 0) {
    double m = 0.0;
    for (int r = 0; r < n; ++r) {
      double d = static_cast<double>(pred1(r, col1)) - target[static_cast<size_t>(r) * 2];
      m += d * d;
    }
    if (m / n < thresh) out.t1 = step;
  }
  if (out.t2 < 0) {
    double m = 0.0;
    for (int r : ynz) {
      double d = static_cast<double>(pred2(r, col2)) - target[static_cast<size_t>(r) * 2 + 1];
      m += d * d;
    }
    if (m / ynz.size() < thresh) out.t2 = step;
  }
}
}  // namespace detail

template <typename T = float>
ModularityOutcome experiment_modularity(bool modular, const ModularityConfig& cfg) {
  enable_flush_to_zero();
  Rng rng(cfg.seed);
  int n = cfg.n_samples;
  std::vector<T> X(static_cast<size_t>(n) * 2), Yt(static_cast<size_t>(n) * 2);
  std::vector<T> X1(n), X2(n), Y1(n), Y2(n);
  std::vector<int> ynz;
  for (int r = 0; r < n; ++r) {
    double x = rng.uniform(-1.0, 1.0);
    double u = rng.uniform();
    double y = u < cfg.sparse_prob ? 0.0 : rng.uniform(-1.0, 1.0);
    X[2 * r] = static_cast<T>(x);
    X[2 * r + 1] = static_cast<T>(y);
    Yt[2 * r] = static_cast<T>(x * x);
    Yt[2 * r + 1] = static_cast<T>(y * y);
    X1[r] = static_cast<T>(x);
    X2[r] = static_cast<T>(y);
    Y1[r] = static_cast<T>(x * x);
    Y2[r] = static_cast<T>(y * y);
    if (y != 0.0) ynz.push_back(r);
  }
  if (ynz.empty()) throw std::runtime_error("modularity: seed produced no nonzero sparse rows");
  OptimizerSpec opt;
  opt.algo = Algo::adam;
  opt.lr = cfg.lr;
  ModularityOutcome out;
  if (!modular) {
    DenseNet<T> net = DenseNet<T>::dense({2, 200, 200, 2}, Head::linear_mse);
    net.init(rng, 1.0, true);
    OptimizerStateT<T> st;
    NetWorkspace<T> ws;
    for (long step = 1; step <= cfg.max_steps; ++step) {
      net.forward(ws, X.data(), n);
      detail::modularity_success(ws.acts.back(), 0, ws.acts.back(), 1, Yt, n, ynz, step - 1, cfg.mse_threshold, out);
      if (out.t1 >= 0 && out.t2 >= 0) break;
      double loss = net.loss_mse(ws, Yt.data());
      if (!std::isfinite(loss)) throw std::runtime_error("modularity: diverged");
      net.backward(ws);
      opt_step(st, opt, net.params, net.grads);
    }
  } else {
    // disjoint parameter sets: x -> x^2 and y -> y^2 trained side by side
    DenseNet<T> net1 = DenseNet<T>::dense({1, 100, 100, 1}, Head::linear_mse);
    DenseNet<T> net2 = DenseNet<T>::dense({1, 100, 100, 1}, Head::linear_mse);
    net1.init(rng, 1.0, true);
    net2.init(rng, 1.0, true);
    OptimizerStateT<T> st1, st2;
    NetWorkspace<T> w1, w2;
    for (long step = 1; step <= cfg.max_steps; ++step) {
      net1.forward(w1, X1.data(), n);
      net2.forward(w2, X2.data(), n);
      detail::modularity_success(w1.acts.back(), 0, w2.acts.back(), 0, Yt, n, ynz, step - 1, cfg.mse_threshold, out);
      if (out.t1 >= 0 && out.t2 >= 0) break;
      net1.loss_mse(w1, Y1.data());
      net2.loss_mse(w2, Y2.data());
      net1.backward(w1);
      net2.backward(w2);
      opt_step(st1, opt, net1.params, net1.grads);
      opt_step(st2, opt, net2.params, net2.grads);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// multitask sparse parity scaling sweep (desk-scale defaults)
struct ParityScalingConfig {
  std::vector<std::pair<double, double>> betas{{0.9, 0.999}};
  std::vector<int> widths{32, 64, 128};
  std::vector<double> alphas{1.0};
  std::vector<uint64_t> seeds{0};
  int n_tasks = 100, n = 100, k = 3;
  int batch = 4096;
  long n_steps = 5000, eval_every = 100;
  double lr = 1e-3;
  uint64_t task_seed = 0;
};

struct ParityCell {
  double beta1, beta2, alpha;
  int width;
  uint64_t seed;
  size_t n_params;
  std::vector<long> steps;
  std::vector<double> loss;
  double final_loss;
};

template <typename T = float>
std::vector<ParityCell> experiment_parity_scaling(const ParityScalingConfig& cfg) {
  std::vector<ParityCell> cells;
  for (double alpha : cfg.alphas) {
    SparseParityTask task = make_sparse_parity(cfg.n_tasks, cfg.n, cfg.k, alpha, cfg.task_seed);
    for (const auto& [b1, b2] : cfg.betas)
      for (int w : cfg.widths)
        for (uint64_t seed : cfg.seeds) {
          DenseNet<T> net = DenseNet<T>::dense({task.input_dim(), w, 1}, Head::sigmoid_bce);
          Rng rng(seed);
          net.init(rng);
          TrainConfig tc;
          tc.opt.algo = Algo::adam;
          tc.opt.lr = cfg.lr;
          tc.opt.beta1 = b1;
          tc.opt.beta2 = b2;
          tc.n_steps = cfg.n_steps;
          tc.batch_size = cfg.batch;
          tc.eval_every = cfg.eval_every;
          tc.seed = seed;
          RunResult r = train_parity(net, task, tc);
          ParityCell c;
          c.beta1 = b1;
          c.beta2 = b2;
          c.alpha = alpha;
          c.width = w;
          c.seed = seed;
          c.n_params = net.n_params();
          c.steps = r.eval_steps;
          c.loss = r.test_loss;
          c.final_loss = r.test_loss.back();
          cells.push_back(std::move(c));
        }
  }
  return cells;
}

}  // namespace skillsim
