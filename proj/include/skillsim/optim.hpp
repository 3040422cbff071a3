#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillsim {

enum class Algo { sgd, signgd, adam, ademamix, lion };

struct OptimizerSpec {
  Algo algo = Algo::signgd;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta3 = 0.9999;   // ademamix slow momentum
  double mix_alpha = 5.0;  // ademamix slow-momentum weight
  double eps = 1e-8;
  double weight_decay = 0.0;
};

inline void validate(const OptimizerSpec& s) {
  if (!(s.lr > 0.0)) throw std::invalid_argument("optimizer: lr must be > 0");
  if (s.beta1 < 0.0 || s.beta1 >= 1.0 || s.beta2 < 0.0 || s.beta2 >= 1.0 || s.beta3 < 0.0 || s.beta3 >= 1.0)
    throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
  if (!(s.eps > 0.0)) throw std::invalid_argument("optimizer: eps must be > 0");
  if (s.weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
  if (s.mix_alpha < 0.0) throw std::invalid_argument("optimizer: mix_alpha must be >= 0");
}

struct NumericFault : std::runtime_error {
  size_t index;
  explicit NumericFault(size_t i, const std::string& what) : std::runtime_error(what), index(i) {}
};

template <typename T>
inline T sgn(T x) {  // sign(0) = 0
  return static_cast<T>((x > T(0)) - (x < T(0)));
}

template <typename T>
struct OptimizerStateT {
  long step_count = 0;
  std::vector<T> m1, m2, v;  // fast momentum, slow momentum (ademamix), second moment

  void reset() {
    step_count = 0;
    m1.clear();
    m2.clear();
    v.clear();
  }
};

using OptimizerState = OptimizerStateT<double>;

template <typename T>
void opt_step(OptimizerStateT<T>& st, const OptimizerSpec& spec, std::vector<T>& params,
              const std::vector<T>& grad) {
  size_t n = params.size();
  if (grad.size() != n) throw std::invalid_argument("opt_step: params/grad length mismatch");
  if (st.step_count == 0) validate(spec);
  for (size_t j = 0; j < n; ++j) {
    if (!std::isfinite(static_cast<double>(grad[j])))
      throw NumericFault(j, "opt_step: non-finite gradient at index " + std::to_string(j));
  }
  const T lr = static_cast<T>(spec.lr);
  st.step_count += 1;
  switch (spec.algo) {
    case Algo::sgd: {
      for (size_t j = 0; j < n; ++j) params[j] -= lr * grad[j];
      break;
    }
    case Algo::signgd: {
      for (size_t j = 0; j < n; ++j) params[j] -= lr * sgn(grad[j]);
      break;
    }
    case Algo::adam: {
      if (st.m1.empty()) st.m1.assign(n, T(0));
      if (st.v.empty()) st.v.assign(n, T(0));
      const T b1 = static_cast<T>(spec.beta1), b2 = static_cast<T>(spec.beta2), eps = static_cast<T>(spec.eps);
      const T c1 = T(1) - static_cast<T>(std::pow(spec.beta1, static_cast<double>(st.step_count)));
      const T c2 = T(1) - static_cast<T>(std::pow(spec.beta2, static_cast<double>(st.step_count)));
      for (size_t j = 0; j < n; ++j) {
        st.m1[j] = b1 * st.m1[j] + (T(1) - b1) * grad[j];
        st.v[j] = b2 * st.v[j] + (T(1) - b2) * grad[j] * grad[j];
        T mhat = st.m1[j] / c1;
        T vhat = st.v[j] / c2;
        params[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      break;
    }
    case Algo::ademamix: {
      if (st.m1.empty()) st.m1.assign(n, T(0));
      if (st.m2.empty()) st.m2.assign(n, T(0));
      if (st.v.empty()) st.v.assign(n, T(0));
      const T b1 = static_cast<T>(spec.beta1), b2 = static_cast<T>(spec.beta2), b3 = static_cast<T>(spec.beta3);
      const T eps = static_cast<T>(spec.eps), mix = static_cast<T>(spec.mix_alpha);
      const T c1 = T(1) - static_cast<T>(std::pow(spec.beta1, static_cast<double>(st.step_count)));
      const T c2 = T(1) - static_cast<T>(std::pow(spec.beta2, static_cast<double>(st.step_count)));
      for (size_t j = 0; j < n; ++j) {
        st.m1[j] = b1 * st.m1[j] + (T(1) - b1) * grad[j];
        st.m2[j] = b3 * st.m2[j] + (T(1) - b3) * grad[j];  // slow half, no bias correction
        st.v[j] = b2 * st.v[j] + (T(1) - b2) * grad[j] * grad[j];
        T num = st.m1[j] / c1 + mix * st.m2[j];
        T vhat = st.v[j] / c2;
        params[j] -= lr * num / (std::sqrt(vhat) + eps);
      }
      break;
    }
    case Algo::lion: {
      if (st.m1.empty()) st.m1.assign(n, T(0));
      const T b1 = static_cast<T>(spec.beta1), b2 = static_cast<T>(spec.beta2);
      for (size_t j = 0; j < n; ++j) {
        T u = sgn(b1 * st.m1[j] + (T(1) - b1) * grad[j]);
        params[j] -= lr * u;
        st.m1[j] = b2 * st.m1[j] + (T(1) - b2) * grad[j];
      }
      break;
    }
  }
  if (spec.weight_decay > 0.0) {
    const T d = static_cast<T>(spec.lr * spec.weight_decay);
    for (size_t j = 0; j < n; ++j) params[j] -= d * params[j];
  }
}

}  // namespace skillsim
