#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <skillsim/optim.hpp>

#include <cmath>
#include <limits>
#include <vector>

using namespace skillsim;

namespace {

OptimizerSpec spec_of(Algo a, double lr) {
  OptimizerSpec s;
  s.algo = a;
  s.lr = lr;
  return s;
}

// run n identical-gradient steps and return the parameter trajectory of a
// single coordinate
std::vector<double> drive(const OptimizerSpec& spec, double g, int n) {
  OptimizerState st;
  std::vector<double> theta{0.0}, grad{g}, out;
  for (int t = 0; t < n; ++t) {
    opt_step(st, spec, theta, grad);
    out.push_back(theta[0]);
  }
  return out;
}

}  // namespace

TEST_CASE("signgd applies lr times the gradient sign, with sign(0) = 0") {
  OptimizerSpec spec = spec_of(Algo::signgd, 3e-4);
  OptimizerState st;
  std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<double> grad{2.0, -0.5, 0.0};
  opt_step(st, spec, theta, grad);
  CHECK(theta[0] == doctest::Approx(-3e-4).epsilon(1e-14));
  CHECK(theta[1] == doctest::Approx(3e-4).epsilon(1e-14));
  CHECK(theta[2] == 0.0);
}

TEST_CASE("sgd is a plain scaled gradient step") {
  OptimizerSpec spec = spec_of(Algo::sgd, 0.1);
  OptimizerState st;
  std::vector<double> theta{1.0, -2.0};
  std::vector<double> grad{0.5, -4.0};
  opt_step(st, spec, theta, grad);
  CHECK(theta[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(-2.0 + 0.1 * 4.0).epsilon(1e-15));
}

TEST_CASE("adam with zero betas and tiny eps collapses to signgd") {
  OptimizerSpec adam = spec_of(Algo::adam, 1e-3);
  adam.beta1 = 0.0;
  adam.beta2 = 0.0;
  adam.eps = 1e-12;
  OptimizerSpec sign = spec_of(Algo::signgd, 1e-3);
  OptimizerState sa, ss;
  std::vector<double> ta{0.3, -0.7, 2.0}, ts = ta;
  std::vector<double> grad{0.8, -1.3, 0.02};
  for (int t = 0; t < 20; ++t) {
    opt_step(sa, adam, ta, grad);
    opt_step(ss, sign, ts, grad);
    for (size_t j = 0; j < ta.size(); ++j)
      CHECK(ta[j] == doctest::Approx(ts[j]).epsilon(1e-6));
  }
}

TEST_CASE("adam under a constant gradient steps by exactly lr*c/(|c|+eps)") {
  // with g_t = c the bias-corrected moments are m_hat = c, v_hat = c^2 at
  // every step, so each update is the same closed-form amount
  const double c = 0.37, lr = 2e-3, eps = 1e-8;
  OptimizerSpec spec = spec_of(Algo::adam, lr);
  spec.eps = eps;
  auto traj = drive(spec, c, 50);
  double per_step = -lr * c / (std::fabs(c) + eps);
  for (int t = 0; t < 50; ++t)
    CHECK(traj[static_cast<size_t>(t)] == doctest::Approx((t + 1) * per_step).epsilon(1e-12));
}

TEST_CASE("adam constant-gradient closed form holds for negative gradients") {
  const double c = -1.6, lr = 5e-4, eps = 1e-8;
  OptimizerSpec spec = spec_of(Algo::adam, lr);
  auto traj = drive(spec, c, 10);
  double per_step = -lr * c / (std::fabs(c) + eps);
  CHECK(traj[9] == doctest::Approx(10 * per_step).epsilon(1e-12));
}

TEST_CASE("ademamix under a constant gradient follows its two-momentum closed form") {
  // fast moment is bias-corrected to exactly c; the slow moment is left
  // uncorrected so it carries a (1 - beta3^t) ramp; v_hat stays c^2
  const double c = 0.9, lr = 1e-3, eps = 1e-8;
  OptimizerSpec spec = spec_of(Algo::ademamix, lr);
  spec.eps = eps;
  auto traj = drive(spec, c, 40);
  double theta = 0.0;
  for (int t = 1; t <= 40; ++t) {
    double slow = c * (1.0 - std::pow(spec.beta3, t));
    double num = c + spec.mix_alpha * slow;
    theta -= lr * num / (std::fabs(c) + eps);
    CHECK(traj[static_cast<size_t>(t - 1)] == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("ademamix first step exceeds adam's by the slow-momentum boost") {
  const double c = 1.0, lr = 1e-3;
  auto tadam = drive(spec_of(Algo::adam, lr), c, 1);
  auto tmix = drive(spec_of(Algo::ademamix, lr), c, 1);
  OptimizerSpec def;
  double boost = 1.0 + def.mix_alpha * (1.0 - def.beta3);
  CHECK(tmix[0] == doctest::Approx(tadam[0] * boost).epsilon(1e-9));
}

TEST_CASE("lion matches a hand-rolled recursion") {
  OptimizerSpec spec = spec_of(Algo::lion, 7e-4);
  spec.beta1 = 0.9;
  spec.beta2 = 0.99;
  OptimizerState st;
  std::vector<double> theta{0.1, -0.2};
  std::vector<double> ref = theta;
  std::vector<double> m{0.0, 0.0};
  std::vector<std::vector<double>> grads = {{1.0, -2.0}, {-0.5, 0.25}, {0.0, 3.0}, {4.0, 0.0}};
  for (auto& g : grads) {
    std::vector<double> gg = g;
    opt_step(st, spec, theta, gg);
    for (size_t j = 0; j < ref.size(); ++j) {
      double mix = spec.beta1 * m[j] + (1.0 - spec.beta1) * g[j];
      double u = mix > 0.0 ? 1.0 : (mix < 0.0 ? -1.0 : 0.0);
      ref[j] -= spec.lr * u;
      m[j] = spec.beta2 * m[j] + (1.0 - spec.beta2) * g[j];
    }
    for (size_t j = 0; j < ref.size(); ++j) CHECK(theta[j] == doctest::Approx(ref[j]).epsilon(1e-14));
  }
}

TEST_CASE("lion signs the old momentum mixed with the fresh gradient") {
  // beta2 = 0 makes m_t = g_t, so the second step's direction is
  // sign(b1*g1 + (1-b1)*g2); updating m before the sign would flip it here
  OptimizerSpec spec = spec_of(Algo::lion, 1e-2);
  spec.beta1 = 0.5;
  spec.beta2 = 0.0;
  OptimizerState st;
  std::vector<double> theta{0.0};
  std::vector<double> g1{3.0}, g2{-1.0};
  opt_step(st, spec, theta, g1);
  CHECK(theta[0] == doctest::Approx(-1e-2).epsilon(1e-14));
  opt_step(st, spec, theta, g2);  // mix = 0.5*3 + 0.5*(-1) = 1 > 0
  CHECK(theta[0] == doctest::Approx(-2e-2).epsilon(1e-14));
}

TEST_CASE("decoupled weight decay shrinks parameters after the main update") {
  // theta' = (theta - lr*sign(g)) * (1 - lr*wd)
  OptimizerSpec spec = spec_of(Algo::signgd, 0.1);
  spec.weight_decay = 0.5;
  OptimizerState st;
  std::vector<double> theta{1.0};
  std::vector<double> grad{-3.0};
  opt_step(st, spec, theta, grad);
  double expect = (1.0 + 0.1) * (1.0 - 0.1 * 0.5);
  CHECK(theta[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("weight decay alone is a pure multiplicative shrink for every algorithm") {
  for (Algo a : {Algo::sgd, Algo::signgd, Algo::adam, Algo::ademamix, Algo::lion}) {
    OptimizerSpec spec = spec_of(a, 0.01);
    spec.weight_decay = 2.0;
    OptimizerState st;
    std::vector<double> theta{5.0, -3.0};
    std::vector<double> grad{0.0, 0.0};
    opt_step(st, spec, theta, grad);
    // zero gradient: sgd/signgd make no move; adam-family numerators stay 0
    CHECK(theta[0] == doctest::Approx(5.0 * (1.0 - 0.01 * 2.0)).epsilon(1e-12));
    CHECK(theta[1] == doctest::Approx(-3.0 * (1.0 - 0.01 * 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("signgd and lion are invariant to gradient rescaling, sgd is not") {
  auto run = [](Algo a, double scale) {
    OptimizerSpec spec = spec_of(a, 1e-3);
    OptimizerState st;
    std::vector<double> theta{0.2, -0.4, 0.6};
    for (int t = 0; t < 15; ++t) {
      std::vector<double> g{scale * std::sin(t + 1.0), scale * std::cos(2.0 * t), scale * (t % 3 - 1.0)};
      opt_step(st, spec, theta, g);
    }
    return theta;
  };
  for (Algo a : {Algo::signgd, Algo::lion}) {
    auto base = run(a, 1.0);
    auto scaled = run(a, 137.0);
    for (size_t j = 0; j < base.size(); ++j) CHECK(base[j] == doctest::Approx(scaled[j]).epsilon(1e-13));
  }
  auto sgd1 = run(Algo::sgd, 1.0);
  auto sgd2 = run(Algo::sgd, 137.0);
  CHECK(std::fabs(sgd1[0] - sgd2[0]) > 1e-6);
}

TEST_CASE("adam is nearly scale-free away from eps") {
  auto run = [](double scale) {
    OptimizerSpec spec = spec_of(Algo::adam, 1e-3);
    OptimizerState st;
    std::vector<double> theta{0.0};
    for (int t = 0; t < 10; ++t) {
      std::vector<double> g{scale * (1.0 + 0.1 * t)};
      opt_step(st, spec, theta, g);
    }
    return theta[0];
  };
  CHECK(run(1.0) == doctest::Approx(run(1000.0)).epsilon(1e-5));
}

TEST_CASE("identical seeds and inputs give bit-identical optimizer trajectories") {
  for (Algo a : {Algo::sgd, Algo::signgd, Algo::adam, Algo::ademamix, Algo::lion}) {
    OptimizerSpec spec = spec_of(a, 3e-3);
    OptimizerState s1, s2;
    std::vector<double> t1{0.5, -1.5}, t2{0.5, -1.5};
    for (int t = 0; t < 25; ++t) {
      std::vector<double> g{std::sin(0.7 * t), std::cos(1.3 * t)};
      std::vector<double> g2 = g;
      opt_step(s1, spec, t1, g);
      opt_step(s2, spec, t2, g2);
    }
    CHECK(t1[0] == t2[0]);
    CHECK(t1[1] == t2[1]);
  }
}

TEST_CASE("non-finite gradients raise NumericFault with the offending index") {
  OptimizerSpec spec = spec_of(Algo::sgd, 0.1);
  OptimizerState st;
  std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<double> grad{1.0, std::numeric_limits<double>::quiet_NaN(), 2.0};
  bool threw = false;
  try {
    opt_step(st, spec, theta, grad);
  } catch (const NumericFault& f) {
    threw = true;
    CHECK(f.index == 1);
  }
  CHECK(threw);

  std::vector<double> ginf{1.0, 2.0, std::numeric_limits<double>::infinity()};
  OptimizerState st2;
  try {
    opt_step(st2, spec, theta, ginf);
    CHECK(false);
  } catch (const NumericFault& f) {
    CHECK(f.index == 2);
  }
}

TEST_CASE("mismatched gradient length is rejected") {
  OptimizerSpec spec = spec_of(Algo::sgd, 0.1);
  OptimizerState st;
  std::vector<double> theta{0.0, 0.0};
  std::vector<double> grad{1.0};
  CHECK_THROWS_AS(opt_step(st, spec, theta, grad), std::invalid_argument);
}

TEST_CASE("spec validation rejects out-of-range hyperparameters") {
  OptimizerSpec bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = OptimizerSpec{};
  bad.lr = -1e-3;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = OptimizerSpec{};
  bad.beta1 = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = OptimizerSpec{};
  bad.beta2 = -0.1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = OptimizerSpec{};
  bad.eps = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = OptimizerSpec{};
  bad.weight_decay = -0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  OptimizerSpec ok;
  CHECK_NOTHROW(validate(ok));

  // a bad spec surfaces on the first step through the same validation
  OptimizerSpec bad_lr = spec_of(Algo::adam, -1.0);
  OptimizerState st;
  std::vector<double> theta{0.0}, grad{1.0};
  CHECK_THROWS_AS(opt_step(st, bad_lr, theta, grad), std::invalid_argument);
}

TEST_CASE("state reset restarts bias correction") {
  OptimizerSpec spec = spec_of(Algo::adam, 1e-3);
  OptimizerState st;
  std::vector<double> theta{0.0}, grad{1.0};
  for (int t = 0; t < 5; ++t) opt_step(st, spec, theta, grad);
  st.reset();
  CHECK(st.step_count == 0);
  std::vector<double> fresh{0.0};
  opt_step(st, spec, fresh, grad);
  auto one = drive(spec, 1.0, 1);
  CHECK(fresh[0] == doctest::Approx(one[0]).epsilon(1e-15));
}
