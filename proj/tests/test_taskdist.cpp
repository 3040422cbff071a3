#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <skillsim/taskdist.hpp>

#include <cmath>
#include <vector>

using namespace skillsim;

TEST_CASE("power law with one task is the point mass") {
  auto d = make_powerlaw(1, 2.0);
  REQUIRE(d.n_task() == 1);
  CHECK(d.p[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("power law alpha=1 over two tasks gives 2/3 and 1/3") {
  auto d = make_powerlaw(2, 1.0);
  CHECK(d.p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(d.p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("alpha=0 is the uniform distribution") {
  auto d = make_powerlaw(7, 0.0);
  for (double x : d.p) CHECK(x == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  auto e = make_exponential(7, 0.0);
  for (double x : e.p) CHECK(x == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("power-law ratios are exact: p_i/p_j = (j/i)^alpha") {
  for (double alpha : {0.5, 1.0, 2.0, 3.7}) {
    auto d = make_powerlaw(50, alpha);
    for (int i = 1; i <= 50; i += 7)
      for (int j = 1; j <= 50; j += 11) {
        double want = std::pow(static_cast<double>(j) / i, alpha);
        CHECK(d.p[i - 1] / d.p[j - 1] == doctest::Approx(want).epsilon(1e-12));
      }
  }
}

TEST_CASE("heavier alpha concentrates mass on the head") {
  double prev = 0.0;
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    auto d = make_powerlaw(20, alpha);
    CHECK(d.p[0] > prev);
    prev = d.p[0];
  }
}

TEST_CASE("distributions normalize to one and stay positive and sorted") {
  for (auto d : {make_powerlaw(30, 1.5), make_exponential(30, 0.3), make_explicit({5.0, 3.0, 3.0, 1.0})}) {
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < d.n_task(); ++i) {
      CHECK(d.p[i] > 0.0);
      if (i > 0) CHECK(d.p[i] <= d.p[i - 1] + 1e-15);
    }
  }
}

TEST_CASE("exponential ratios follow exp(-alpha) per rank") {
  auto d = make_exponential(10, 0.7);
  for (int i = 1; i < 10; ++i)
    CHECK(d.p[i] / d.p[i - 1] == doctest::Approx(std::exp(-0.7)).epsilon(1e-13));
}

TEST_CASE("unnormalized generators keep raw weights") {
  auto d = make_powerlaw(3, 1.0, false);
  CHECK(d.p[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.p[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.p[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("invalid distribution inputs are rejected") {
  CHECK_THROWS_AS(make_powerlaw(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_powerlaw(5, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_exponential(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_explicit({}), std::invalid_argument);
  CHECK_THROWS_AS(make_explicit({0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_explicit({0.5, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(make_explicit({0.2, 0.5}), std::invalid_argument);  // increasing
}

TEST_CASE("sampler reproduces the distribution within 3 sigma") {
  auto d = make_powerlaw(5, 1.0);
  DiscreteSampler s(d);
  Rng rng(77);
  const int n = 300000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) {
    int k = s.sample(rng);
    REQUIRE(k >= 0);
    REQUIRE(k < 5);
    ++counts[static_cast<size_t>(k)];
  }
  for (int i = 0; i < 5; ++i) {
    double expect = n * d.p[i];
    double se = std::sqrt(n * d.p[i] * (1.0 - d.p[i]));
    CHECK(std::fabs(counts[i] - expect) < 3.0 * se);
  }
}

TEST_CASE("onehot task vectors are the canonical basis") {
  auto tv = make_task_vectors(4, 6, TvMode::onehot, 0);
  REQUIRE(tv.n_task == 4);
  REQUIRE(tv.n_dim == 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) CHECK(tv.row(i)[j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("orthogonalized vectors are unit length and mutually orthogonal") {
  auto tv = make_task_vectors(8, 32, TvMode::orthogonalized, 3);
  for (int i = 0; i < 8; ++i) {
    double nrm = 0.0;
    for (int j = 0; j < 32; ++j) nrm += tv.row(i)[j] * tv.row(i)[j];
    CHECK(std::fabs(nrm - 1.0) < 1e-12);
    for (int k = 0; k < i; ++k) {
      double dot = 0.0;
      for (int j = 0; j < 32; ++j) dot += tv.row(i)[j] * tv.row(k)[j];
      CHECK(std::fabs(dot) < 1e-9);
    }
  }
}

TEST_CASE("random vectors are unit rows with near-orthogonal overlaps") {
  auto tv = make_task_vectors(100, 10, TvMode::random, 9);
  for (int i = 0; i < 100; ++i) {
    double nrm = 0.0;
    for (int j = 0; j < 10; ++j) nrm += tv.row(i)[j] * tv.row(i)[j];
    CHECK(std::fabs(nrm - 1.0) < 1e-12);
  }
  // mean |dot| between unit vectors on S^{d-1}; oracle by monte carlo with an
  // independent generator and transform
  double mean_abs = 0.0;
  int pairs = 0;
  for (int i = 0; i < 100; ++i)
    for (int k = 0; k < i; ++k) {
      double dot = 0.0;
      for (int j = 0; j < 10; ++j) dot += tv.row(i)[j] * tv.row(k)[j];
      mean_abs += std::fabs(dot);
      ++pairs;
    }
  mean_abs /= pairs;

  std::mt19937 oracle(12345);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int mc = 20000;
  double mc_mean = 0.0, mc_sq = 0.0;
  for (int t = 0; t < mc; ++t) {
    double a[10], b[10], na = 0.0, nb = 0.0, dot = 0.0;
    for (int j = 0; j < 10; ++j) {
      a[j] = nd(oracle);
      b[j] = nd(oracle);
      na += a[j] * a[j];
      nb += b[j] * b[j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    for (int j = 0; j < 10; ++j) dot += (a[j] / na) * (b[j] / nb);
    mc_mean += std::fabs(dot);
    mc_sq += dot * dot;
  }
  mc_mean /= mc;
  double mc_sd = std::sqrt(std::max(0.0, mc_sq / mc - mc_mean * mc_mean));
  // pairs share vectors so they are not independent; be generous with the SE
  double se = mc_sd / std::sqrt(100.0);
  CHECK(std::fabs(mean_abs - mc_mean) < 4.0 * se);
}

TEST_CASE("infeasible orthogonalization is rejected") {
  CHECK_THROWS_AS(make_task_vectors(11, 10, TvMode::orthogonalized, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_task_vectors(7, 6, TvMode::onehot, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_task_vectors(0, 10, TvMode::random, 0), std::invalid_argument);
  CHECK_NOTHROW(make_task_vectors(11, 10, TvMode::random, 0));
}

TEST_CASE("correlation matrix matches pairwise dot products") {
  auto tv = make_task_vectors(6, 40, TvMode::random, 21);
  auto c = correlation_matrix(tv);
  REQUIRE(c.size() == 36);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k) {
      double dot = 0.0;
      for (int j = 0; j < 40; ++j) dot += tv.row(i)[j] * tv.row(k)[j];
      CHECK(c[static_cast<size_t>(i) * 6 + k] == doctest::Approx(dot).epsilon(1e-13));
      CHECK(c[static_cast<size_t>(i) * 6 + k] == doctest::Approx(c[static_cast<size_t>(k) * 6 + i]).epsilon(1e-13));
    }
  auto onehot = make_task_vectors(5, 8, TvMode::onehot, 0);
  auto ci = correlation_matrix(onehot);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) CHECK(ci[static_cast<size_t>(i) * 5 + k] == (i == k ? 1.0 : 0.0));
  auto ortho = make_task_vectors(5, 16, TvMode::orthogonalized, 2);
  auto co = correlation_matrix(ortho);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) {
      if (i == k)
        CHECK(std::fabs(co[static_cast<size_t>(i) * 5 + k] - 1.0) < 1e-12);
      else
        CHECK(std::fabs(co[static_cast<size_t>(i) * 5 + k]) < 1e-9);
    }
}

TEST_CASE("task vectors are deterministic in the seed") {
  auto a = make_task_vectors(12, 20, TvMode::random, 4);
  auto b = make_task_vectors(12, 20, TvMode::random, 4);
  CHECK(a.v == b.v);  // bit-identical
  auto c = make_task_vectors(12, 20, TvMode::random, 5);
  CHECK(a.v != c.v);
  auto d = make_task_vectors(12, 20, TvMode::orthogonalized, 4);
  auto e = make_task_vectors(12, 20, TvMode::orthogonalized, 4);
  CHECK(d.v == e.v);
}
