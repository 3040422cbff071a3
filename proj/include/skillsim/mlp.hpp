#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#if defined(__SSE2__)
#include <immintrin.h>
#endif

#include "optim.hpp"
#include "rng.hpp"

namespace skillsim {

// denormal results appear en masse once losses collapse and make scalar math
// crawl; flush them to zero inside training loops
inline void enable_flush_to_zero() {
#if defined(__SSE2__)
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _mm_setcsr(_mm_getcsr() | 0x0040);  // DAZ
#endif
}

enum class Head { linear_mse, sigmoid_bce, softmax_xent };

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct NetWorkspace {
  std::vector<MatX<T>> acts;  // acts[0] = dense input, acts.back() = logits
  MatX<T> d;                  // gradient buffer flowing backwards
  std::vector<int> ids;       // token ids of the current batch (embedded nets)
};

// relu mlp over a flat parameter vector; optional token-embedding front end
// (n_tokens ids per example, embeddings concatenated into the dense input)
template <typename T>
struct DenseNet {
  int vocab = 0, embed_dim = 0, n_tokens = 0;
  std::vector<int> sizes;  // sizes[0] = dense input width
  Head head = Head::linear_mse;
  std::vector<T> params, grads;
  size_t emb_off = 0;
  std::vector<size_t> w_off, b_off;

  static DenseNet dense(std::vector<int> sizes_, Head h) {
    if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least input and output sizes");
    DenseNet n;
    n.sizes = std::move(sizes_);
    n.head = h;
    n.build();
    return n;
  }

  static DenseNet embedded(int vocab_, int embed_dim_, int n_tokens_, std::vector<int> rest, Head h) {
    DenseNet n;
    n.vocab = vocab_;
    n.embed_dim = embed_dim_;
    n.n_tokens = n_tokens_;
    n.sizes.push_back(embed_dim_ * n_tokens_);
    for (int s : rest) n.sizes.push_back(s);
    n.head = h;
    n.build();
    return n;
  }

  int n_layers() const { return static_cast<int>(sizes.size()) - 1; }
  int out_dim() const { return sizes.back(); }
  bool embedded_input() const { return vocab > 0; }

  void build() {
    size_t off = 0;
    if (embedded_input()) {
      emb_off = off;
      off += static_cast<size_t>(vocab) * embed_dim;
    }
    for (int l = 0; l < n_layers(); ++l) {
      w_off.push_back(off);
      off += static_cast<size_t>(sizes[l]) * sizes[l + 1];
      b_off.push_back(off);
      off += sizes[l + 1];
    }
    params.assign(off, T(0));
    grads.assign(off, T(0));
  }

  size_t n_params() const { return params.size(); }
  T* W(int l) { return params.data() + w_off[l]; }
  const T* W(int l) const { return params.data() + w_off[l]; }
  T* b(int l) { return params.data() + b_off[l]; }
  const T* b(int l) const { return params.data() + b_off[l]; }
  T* emb() { return params.data() + emb_off; }
  const T* emb() const { return params.data() + emb_off; }

  // dense layers: W and b uniform in +-1/sqrt(fan_in); embeddings gaussian
  void init(Rng& rng, double emb_std = 1.0, bool zero_last_layer = false) {
    if (embedded_input()) {
      T* e = emb();
      for (size_t i = 0; i < static_cast<size_t>(vocab) * embed_dim; ++i)
        e[i] = static_cast<T>(emb_std * rng.gaussian());
    }
    for (int l = 0; l < n_layers(); ++l) {
      double lim = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
      bool zero = zero_last_layer && l == n_layers() - 1;
      T* w = W(l);
      for (size_t i = 0; i < static_cast<size_t>(sizes[l]) * sizes[l + 1]; ++i)
        w[i] = zero ? T(0) : static_cast<T>(rng.uniform(-lim, lim));
      T* bb = b(l);
      for (int i = 0; i < sizes[l + 1]; ++i) bb[i] = zero ? T(0) : static_cast<T>(rng.uniform(-lim, lim));
    }
  }

  void forward_from_input(NetWorkspace<T>& ws, int n) const {
    int L = n_layers();
    ws.acts.resize(L + 1);
    for (int l = 0; l < L; ++l) {
      Eigen::Map<const MatX<T>> Wm(W(l), sizes[l], sizes[l + 1]);
      Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(b(l), sizes[l + 1]);
      ws.acts[l + 1].noalias() = ws.acts[l] * Wm;
      ws.acts[l + 1].rowwise() += bm;
      if (l < L - 1) ws.acts[l + 1] = ws.acts[l + 1].cwiseMax(T(0));
    }
    (void)n;
  }

  // X row-major n x sizes[0]
  void forward(NetWorkspace<T>& ws, const T* X, int n) const {
    ws.acts.resize(n_layers() + 1);
    ws.acts[0] = Eigen::Map<const MatX<T>>(X, n, sizes[0]);
    ws.ids.clear();
    forward_from_input(ws, n);
  }

  // ids row-major n x n_tokens
  void forward_tokens(NetWorkspace<T>& ws, const int* ids, int n) const {
    if (!embedded_input()) throw std::logic_error("DenseNet: no embedding table");
    ws.acts.resize(n_layers() + 1);
    ws.acts[0].resize(n, sizes[0]);
    const T* e = emb();
    for (int r = 0; r < n; ++r)
      for (int t = 0; t < n_tokens; ++t) {
        int id = ids[r * n_tokens + t];
        for (int j = 0; j < embed_dim; ++j)
          ws.acts[0](r, t * embed_dim + j) = e[static_cast<size_t>(id) * embed_dim + j];
      }
    ws.ids.assign(ids, ids + static_cast<size_t>(n) * n_tokens);
    forward_from_input(ws, n);
  }

  // heads: fill ws.d with dLoss/dlogits (mean-over-batch convention) and
  // optionally per-example losses; return the mean loss
  double loss_mse(NetWorkspace<T>& ws, const T* Y, std::vector<T>* per_example = nullptr) const {
    const MatX<T>& z = ws.acts.back();
    int n = static_cast<int>(z.rows()), o = static_cast<int>(z.cols());
    Eigen::Map<const MatX<T>> y(Y, n, o);
    ws.d = z - y;
    double loss = 0.0;
    if (per_example) per_example->assign(n, T(0));
    for (int r = 0; r < n; ++r) {
      double lr_ = 0.0;
      for (int c = 0; c < o; ++c) lr_ += static_cast<double>(ws.d(r, c)) * ws.d(r, c);
      if (per_example) (*per_example)[r] = static_cast<T>(lr_);
      loss += lr_;
    }
    ws.d *= static_cast<T>(2.0 / n);
    return loss / n;
  }

  double loss_bce(NetWorkspace<T>& ws, const T* Y, std::vector<T>* per_example = nullptr) const {
    const MatX<T>& z = ws.acts.back();
    int n = static_cast<int>(z.rows()), o = static_cast<int>(z.cols());
    Eigen::Map<const MatX<T>> y(Y, n, o);
    ws.d.resize(n, o);
    double loss = 0.0;
    if (per_example) per_example->assign(n, T(0));
    for (int r = 0; r < n; ++r) {
      double lr_ = 0.0;
      for (int c = 0; c < o; ++c) {
        double zv = z(r, c);
        double p = 1.0 / (1.0 + std::exp(-zv));
        ws.d(r, c) = static_cast<T>(p) - y(r, c);
        // -log p(correct), stable form log(1+exp(-|z|)) + max(z,0) - z*y
        lr_ += (zv > 0 ? zv : 0.0) - zv * static_cast<double>(y(r, c)) + std::log1p(std::exp(-std::fabs(zv)));
      }
      if (per_example) (*per_example)[r] = static_cast<T>(lr_);
      loss += lr_;
    }
    ws.d *= static_cast<T>(1.0 / n);
    return loss / n;
  }

  double loss_xent(NetWorkspace<T>& ws, const int* labels, std::vector<T>* per_example = nullptr) const {
    const MatX<T>& z = ws.acts.back();
    int n = static_cast<int>(z.rows()), o = static_cast<int>(z.cols());
    ws.d.resize(n, o);
    double loss = 0.0;
    if (per_example) per_example->assign(n, T(0));
    for (int r = 0; r < n; ++r) {
      T zmax = z.row(r).maxCoeff();
      double sum = 0.0;
      for (int c = 0; c < o; ++c) sum += std::exp(static_cast<double>(z(r, c) - zmax));
      double logz = std::log(sum) + static_cast<double>(zmax);
      double lr_ = logz - static_cast<double>(z(r, labels[r]));
      for (int c = 0; c < o; ++c) ws.d(r, c) = static_cast<T>(std::exp(static_cast<double>(z(r, c)) - logz));
      ws.d(r, labels[r]) -= T(1);
      if (per_example) (*per_example)[r] = static_cast<T>(lr_);
      loss += lr_;
    }
    ws.d *= static_cast<T>(1.0 / n);
    return loss / n;
  }

  double loss(NetWorkspace<T>& ws, const T* targets, const int* labels, std::vector<T>* per_example = nullptr) const {
    switch (head) {
      case Head::linear_mse: return loss_mse(ws, targets, per_example);
      case Head::sigmoid_bce: return loss_bce(ws, targets, per_example);
      case Head::softmax_xent: return loss_xent(ws, labels, per_example);
    }
    return 0.0;
  }

  // detached per-example weights: objective (1/B) sum w_i l_i
  void apply_row_weights(NetWorkspace<T>& ws, const std::vector<T>& w) const {
    for (int r = 0; r < ws.d.rows(); ++r) ws.d.row(r) *= w[r];
  }

  void backward(NetWorkspace<T>& ws) {
    std::fill(grads.begin(), grads.end(), T(0));
    int L = n_layers();
    MatX<T> d = ws.d;
    for (int l = L - 1; l >= 0; --l) {
      Eigen::Map<MatX<T>> gW(grads.data() + w_off[l], sizes[l], sizes[l + 1]);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grads.data() + b_off[l], sizes[l + 1]);
      gW.noalias() = ws.acts[l].transpose() * d;
      gb = d.colwise().sum();
      if (l > 0 || embedded_input()) {
        Eigen::Map<const MatX<T>> Wm(W(l), sizes[l], sizes[l + 1]);
        MatX<T> dprev = d * Wm.transpose();
        if (l > 0) {
          d = dprev.cwiseProduct((ws.acts[l].array() > T(0)).template cast<T>().matrix());
        } else {
          // scatter into the embedding table
          T* ge = grads.data() + emb_off;
          int n = static_cast<int>(dprev.rows());
          for (int r = 0; r < n; ++r)
            for (int t = 0; t < n_tokens; ++t) {
              int id = ws.ids[static_cast<size_t>(r) * n_tokens + t];
              for (int j = 0; j < embed_dim; ++j)
                ge[static_cast<size_t>(id) * embed_dim + j] += dprev(r, t * embed_dim + j);
            }
        }
      }
    }
  }
};

// classification accuracies straight off the logits
template <typename T>
double accuracy_xent(const MatX<T>& logits, const int* labels) {
  int n = static_cast<int>(logits.rows());
  int hit = 0;
  for (int r = 0; r < n; ++r) {
    int arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (arg == labels[r]) ++hit;
  }
  return static_cast<double>(hit) / n;
}

template <typename T>
double accuracy_bce(const MatX<T>& logits, const T* Y, int col) {
  int n = static_cast<int>(logits.rows()), o = static_cast<int>(logits.cols());
  int hit = 0;
  for (int r = 0; r < n; ++r) {
    bool pred = logits(r, col) > T(0);
    bool truth = Y[static_cast<size_t>(r) * o + col] > T(0.5);
    if (pred == truth) ++hit;
  }
  return static_cast<double>(hit) / n;
}

}  // namespace skillsim
