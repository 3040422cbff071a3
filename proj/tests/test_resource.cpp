#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <skillsim/resource.hpp>

#include <cmath>
#include <vector>

using namespace skillsim;

namespace {

ResourceSystem independent(std::vector<double> p, double eta, double n0) {
  ResourceSystem sys;
  sys.dist = make_explicit(std::move(p));
  sys.eta_eff = eta;
  sys.N0 = n0;
  sys.variant = ResourceVariant::independent_mse;
  return sys;
}

}  // namespace

TEST_CASE("rhs matches the hand-written flow at the start") {
  auto sys = independent({0.7, 0.3}, 2.0, 0.5);
  std::vector<double> y{1.0, 1.0}, out;
  std::vector<char> frozen;
  sys.rhs(0.0, y, out, frozen);
  // du_i/dt = -eta p_i u_i / (sum_j p_j u_j + N0)
  CHECK(out[0] == doctest::Approx(-2.0 * 0.7 / 1.5).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-2.0 * 0.3 / 1.5).epsilon(1e-14));
  // partway down the curve
  y = {0.5, 0.9};
  sys.rhs(0.0, y, out, frozen);
  double denom = 0.7 * 0.5 + 0.3 * 0.9 + 0.5;
  CHECK(out[0] == doctest::Approx(-2.0 * 0.7 * 0.5 / denom).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-2.0 * 0.3 * 0.9 / denom).epsilon(1e-14));
  // frozen components do not move
  std::vector<char> fr{1, 0};
  sys.rhs(0.0, y, out, fr);
  CHECK(out[0] == 0.0);
  CHECK(out[1] != 0.0);
}

TEST_CASE("from_geometry pins the effective learning rate") {
  auto dist = make_powerlaw(3, 1.0);
  auto sys = ResourceSystem::from_geometry(dist, 1000, 3e-4);
  CHECK(sys.eta_eff == doctest::Approx(2.0 * std::sqrt(1000.0) * 3e-4).epsilon(1e-15));
  CHECK(sys.variant == ResourceVariant::independent_mse);
  CHECK(sys.N0 == 0.0);
}

TEST_CASE("u^(1/p) is conserved along the flow") {
  ResourceSystem sys;
  sys.dist = make_powerlaw(4, 1.5);
  sys.eta_eff = 1.0;
  sys.N0 = 0.3;
  auto tr = integrate(sys, 2.0, 0.0, 401);
  CHECK(conserved_max_dev(tr, sys.dist, 0.02) < 1e-6);
}

TEST_CASE("closed form agrees with the integrator") {
  ResourceSystem sys;
  sys.dist = make_powerlaw(5, 1.0);
  sys.eta_eff = 1.3;
  sys.N0 = 0.7;
  auto tr = integrate(sys, 4.0, 0.0, 201);
  for (size_t r : {20u, 80u, 140u, 200u}) {
    double t = tr.times[r];
    auto u = u_closed_form(sys.dist, sys.eta_eff, sys.N0, t);
    for (int i = 0; i < 5; ++i) {
      double ui = 1.0 - tr.skill(r, i);
      CHECK(ui == doctest::Approx(u[i]).epsilon(1e-5));
    }
    CHECK(tr.total_loss[r] == doctest::Approx(closed_form_loss(sys.dist, sys.eta_eff, sys.N0, t)).epsilon(1e-4));
  }
}

TEST_CASE("adaptive integrator matches a brute-force fixed-step rk4") {
  for (auto variant : {ResourceVariant::independent_mse, ResourceVariant::correlated_xent}) {
    ResourceSystem sys;
    sys.dist = make_powerlaw(3, 2.0);
    sys.eta_eff = 0.8;
    sys.N0 = 0.4;
    sys.variant = variant;
    double t_end = 1.5;
    auto tr = integrate(sys, t_end, 0.0, 301);
    auto ref = rk4_reference(sys, t_end, 1e-4);
    for (int i = 0; i < 3; ++i) {
      double yi = sys.mse_state() ? 1.0 - tr.skill(tr.n_rec() - 1, i) : tr.skill(tr.n_rec() - 1, i);
      CHECK(yi == doctest::Approx(ref[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("single-task flow is linear and freezes at completion") {
  auto sys = independent({1.0}, 0.5, 0.0);
  // du/dt = -eta u/u = -eta while u > 0, so u(t) = 1 - eta t, done at t = 2
  auto tr = integrate(sys, 4.0, 0.0, 401);
  for (size_t r = 0; r < tr.n_rec(); ++r) {
    double want = std::max(0.0, 1.0 - 0.5 * tr.times[r]);
    CHECK(std::fabs((1.0 - tr.skill(r, 0)) - want) < 1e-6);
  }
  auto done = completion_times(tr, 0.01);
  CHECK(done[0] == doctest::Approx(0.99 / 0.5).epsilon(0.02));
  CHECK(tr.skill(tr.n_rec() - 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("xent variant with no waste grows the skill at exactly eta") {
  ResourceSystem sys;
  sys.dist = make_explicit({1.0});
  sys.eta_eff = 0.8;
  sys.N0 = 0.0;
  sys.variant = ResourceVariant::correlated_xent;
  auto tr = integrate(sys, 5.0, 0.0, 101);
  for (size_t r = 0; r < tr.n_rec(); ++r)
    CHECK(tr.skill(r, 0) == doctest::Approx(0.8 * tr.times[r]).epsilon(1e-6));
  // per-task loss is the logistic loss of the skill
  size_t last = tr.n_rec() - 1;
  CHECK(tr.task_loss(last, 0) == doctest::Approx(std::log1p(std::exp(-4.0))).epsilon(1e-5));
}

TEST_CASE("learning time closed form inverts the trajectory") {
  // single task, no waste: t = 1 - C
  auto lt1 = learning_time(make_explicit({1.0}), 1.0, 0.0, 0.25);
  CHECK(lt1.t_total == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(lt1.t_waste == 0.0);
  // with waste the log barrier adds -N0 log C
  auto lt2 = learning_time(make_explicit({1.0}), 1.0, 0.5, 0.25);
  CHECK(lt2.t_waste == doctest::Approx(-0.5 * std::log(0.25)).epsilon(1e-14));
  CHECK(lt2.t_total == doctest::Approx(0.75 - 0.5 * std::log(0.25)).epsilon(1e-14));

  // two tasks: integrate to the predicted time and read the conserved level
  auto dist = make_explicit({0.6, 0.4});
  double eta = 0.9, n0 = 0.25, c = 0.2;
  auto lt = learning_time(dist, eta, n0, c);
  ResourceSystem sys;
  sys.dist = dist;
  sys.eta_eff = eta;
  sys.N0 = n0;
  auto tr = integrate(sys, lt.t_total, 0.0, 2001);
  size_t last = tr.n_rec() - 1;
  for (int i = 0; i < 2; ++i)
    CHECK(1.0 - tr.skill(last, i) == doctest::Approx(std::pow(c, dist.p[i])).epsilon(1e-4));
  CHECK_THROWS_AS(learning_time(dist, eta, n0, 0.0), std::domain_error);
  CHECK_THROWS_AS(learning_time(dist, eta, n0, 1.0), std::domain_error);
}

TEST_CASE("closed-form unskills honor their edge cases") {
  auto dist = make_powerlaw(4, 1.0);
  auto u0 = u_closed_form(dist, 1.0, 0.5, 0.0);
  for (double u : u0) CHECK(u == 1.0);
  auto uneg = u_closed_form(dist, 1.0, 0.5, -3.0);
  for (double u : uneg) CHECK(u == 1.0);
  // with no waste everything is done by t = n/eta
  auto ud = u_closed_form(dist, 2.0, 0.0, 4.0 / 2.0);
  for (double u : ud) CHECK(u == 0.0);
  auto ul = u_closed_form(dist, 2.0, 0.0, 4.0 / 2.0 - 0.05);
  for (double u : ul) CHECK(u > 0.0);
  // monotone non-increasing in t
  auto ua = u_closed_form(dist, 1.0, 0.5, 1.0);
  auto ub = u_closed_form(dist, 1.0, 0.5, 2.0);
  for (int i = 0; i < 4; ++i) CHECK(ub[i] < ua[i]);
}

TEST_CASE("gate factors clamp, multiply for and, and max for or") {
  ResourceSystem sys;
  sys.dist = make_explicit({0.5, 0.3, 0.2});
  sys.gates.resize(3);
  sys.gates[2].kind = Gate::and_gate;
  sys.gates[2].parents = {0, 1};
  sys.gates[2].gamma = 2.0;
  std::vector<double> learned{0.5, 0.8, 0.0};
  CHECK(sys.gate_factor(0, learned) == 1.0);  // ungated
  CHECK(sys.gate_factor(2, learned) == doctest::Approx(0.25 * 0.64).epsilon(1e-14));
  sys.gates[2].kind = Gate::or_gate;
  CHECK(sys.gate_factor(2, learned) == doctest::Approx(0.64).epsilon(1e-14));
  // out-of-range learned fractions are clamped into [0, 1]
  learned = {1.7, -0.4, 0.0};
  sys.gates[2].kind = Gate::and_gate;
  CHECK(sys.gate_factor(2, learned) == 0.0);
  learned = {1.7, 1.2, 0.0};
  CHECK(sys.gate_factor(2, learned) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("a gated child only completes after its parent") {
  ResourceSystem sys;
  sys.dist = make_explicit({0.6, 0.4});
  sys.eta_eff = 1.0;
  sys.N0 = 0.1;
  sys.gates.resize(2);
  sys.gates[1].kind = Gate::and_gate;
  sys.gates[1].parents = {0};
  sys.gates[1].gamma = 20.0;
  auto tr = integrate(sys, 12.0, 0.0, 1201);
  auto done = completion_times(tr, 0.01);
  REQUIRE(done[0] > 0.0);
  REQUIRE(done[1] > 0.0);
  CHECK(done[1] > done[0]);
  // ungated control: the same frequencies complete much closer together
  ResourceSystem flat = sys;
  flat.gates.clear();
  auto tf = integrate(flat, 12.0, 0.0, 1201);
  auto df = completion_times(tf, 0.01);
  CHECK(done[1] - done[0] > 2.0 * (df[1] - df[0]));
}

TEST_CASE("gate validation rejects malformed graphs") {
  int n = 3;
  std::vector<Gate> gates(2);
  CHECK_THROWS_AS(validate_gates(gates, n), std::invalid_argument);  // wrong size
  gates.resize(3);
  gates[0].kind = Gate::and_gate;
  gates[0].parents = {5};
  CHECK_THROWS_AS(validate_gates(gates, n), std::invalid_argument);  // parent out of range
  gates[0].parents = {1};
  gates[0].gamma = 0.0;
  CHECK_THROWS_AS(validate_gates(gates, n), std::invalid_argument);  // gamma must be positive
  gates[0].gamma = 1.0;
  gates[1].kind = Gate::or_gate;
  gates[1].parents = {0};
  CHECK_THROWS_AS(validate_gates(gates, n), std::invalid_argument);  // 0 <-> 1 cycle
  gates[1].parents = {2};
  CHECK_NOTHROW(validate_gates(gates, n));
  CHECK_NOTHROW(validate_gates({}, n));
}

TEST_CASE("frequency schedules switch the flow at the break") {
  ResourceSystem sys;
  sys.dist = make_explicit({0.9, 0.1});
  sys.eta_eff = 1.0;
  sys.N0 = 0.2;
  sys.schedule.t_break = {1.0};
  sys.schedule.p_after = {{0.1, 0.9}};
  CHECK(&sys.p_at(0.5) == &sys.dist.p);
  CHECK(sys.p_at(1.0)[0] == 0.1);
  CHECK(sys.p_at(7.0)[1] == 0.9);

  auto tr = integrate(sys, 2.0, 0.0, 2001);
  auto ref = rk4_reference(sys, 2.0, 1e-4);
  size_t last = tr.n_rec() - 1;
  for (int i = 0; i < 2; ++i) CHECK(1.0 - tr.skill(last, i) == doctest::Approx(ref[i]).epsilon(1e-5));

  // task 2 drains faster once it owns the frequency mass: compare the decay
  // rate of u_2 just before and just after the break
  size_t rb = 1000;  // t = 1.0 on the 2001-point grid
  double before = (1.0 - tr.skill(rb - 20, 1)) - (1.0 - tr.skill(rb, 1));
  double after = (1.0 - tr.skill(rb, 1)) - (1.0 - tr.skill(rb + 20, 1));
  CHECK(after > 2.0 * before);
}

TEST_CASE("identity-correlated flow reproduces the independent flow") {
  ResourceSystem a;
  a.dist = make_powerlaw(4, 1.2);
  a.eta_eff = 0.7;
  a.N0 = 0.15;
  a.variant = ResourceVariant::independent_mse;
  ResourceSystem b = a;
  b.variant = ResourceVariant::correlated_mse;
  ResourceSystem c = a;
  c.variant = ResourceVariant::correlated_mse;
  c.corr.assign(16, 0.0);
  for (int i = 0; i < 4; ++i) c.corr[static_cast<size_t>(i) * 4 + i] = 1.0;
  auto ta = integrate(a, 3.0, 0.0, 301);
  auto tb = integrate(b, 3.0, 0.0, 301);
  auto tc = integrate(c, 3.0, 0.0, 301);
  for (size_t r = 0; r < ta.n_rec(); ++r) {
    CHECK(std::fabs(ta.total_loss[r] - tb.total_loss[r]) < 1e-9);
    CHECK(std::fabs(ta.total_loss[r] - tc.total_loss[r]) < 1e-9);
  }
}

TEST_CASE("off-diagonal correlation couples the flows") {
  ResourceSystem sys;
  sys.dist = make_explicit({0.8, 0.2});
  sys.eta_eff = 1.0;
  sys.N0 = 0.3;
  sys.variant = ResourceVariant::correlated_mse;
  sys.corr = {1.0, 0.5, 0.5, 1.0};
  auto tr = integrate(sys, 1.0, 0.0, 101);
  // the rare task picks up resources from the frequent one: faster than the
  // independent counterpart at matched parameters
  ResourceSystem ind = sys;
  ind.variant = ResourceVariant::independent_mse;
  ind.corr.clear();
  auto ti = integrate(ind, 1.0, 0.0, 101);
  size_t last = tr.n_rec() - 1;
  CHECK(tr.skill(last, 1) > ti.skill(last, 1) + 0.05);
}

TEST_CASE("degenerate denominators are reported, not propagated as NaN") {
  auto sys = independent({1.0}, 1.0, -2.0);
  CHECK_THROWS_AS(integrate(sys, 1.0), std::runtime_error);
  CHECK_THROWS_AS(integrate(independent({0.5, 0.5}, 1.0, 0.1), 0.0), std::invalid_argument);
}

TEST_CASE("calibration recovers a known waste constant") {
  auto dist = make_powerlaw(6, 1.5);
  double eta = 1.1, n0_true = 0.37;
  std::vector<double> ts, losses;
  for (int k = 1; k <= 24; ++k) {
    double t = 0.25 * k;
    ts.push_back(t);
    losses.push_back(closed_form_loss(dist, eta, n0_true, t));
  }
  ResourceSystem tmpl;
  tmpl.dist = dist;
  tmpl.eta_eff = eta;
  auto fit = calibrate_N0(ts, losses, tmpl);
  CHECK(fit.n0 == doctest::Approx(n0_true).epsilon(0.01));
  CHECK(fit.residual < 1e-8);
  CHECK_THROWS_AS(calibrate_N0({1.0, 2.0}, {0.5, 0.4}, tmpl), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_N0({1.0, 2.0, 3.0}, {0.5, -0.4, 0.3}, tmpl), std::domain_error);
}

TEST_CASE("both calibration paths find the same waste constant") {
  auto dist = make_powerlaw(3, 1.0);
  double eta = 1.0, n0_true = 0.8;
  std::vector<double> ts, losses;
  for (int k = 1; k <= 12; ++k) {
    double t = 0.3 * k;
    ts.push_back(t);
    losses.push_back(closed_form_loss(dist, eta, n0_true, t));
  }
  ResourceSystem tmpl;
  tmpl.dist = dist;
  tmpl.eta_eff = eta;
  auto fast = calibrate_N0(ts, losses, tmpl);
  // a schedule that never fires forces the integration path through identical dynamics
  ResourceSystem slow_tmpl = tmpl;
  slow_tmpl.schedule.t_break = {1e9};
  slow_tmpl.schedule.p_after = {dist.p};
  auto slow = calibrate_N0(ts, losses, slow_tmpl);
  CHECK(slow.n0 == doctest::Approx(fast.n0).epsilon(0.02));
}

TEST_CASE("fit points skip the origin and the converged tail") {
  Trajectory tr;
  tr.n_task = 1;
  tr.steps = {0, 10, 20, 30};
  tr.skills = {0.0, 0.5, 0.9, 0.999};
  tr.task_losses = {1.0, 0.25, 0.01, 1e-6};
  tr.total_loss = {1.0, 0.25, 0.01, 1e-6};
  std::vector<double> ts, losses;
  fit_points_from_trajectory(tr, ts, losses, 1e-5);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0] == 10.0);
  CHECK(ts[1] == 20.0);
  CHECK(losses[1] == 0.01);
}

TEST_CASE("optimal learning rate maximizes the resource gain") {
  auto dist = make_explicit({0.6, 0.4});
  std::vector<double> u{0.8, 0.2};
  double kappa = 2.5;
  auto best = optimal_lr(dist, u, kappa);
  REQUIRE_FALSE(best.degenerate);
  double m = 0.6 * 0.8 + 0.4 * 0.2;
  CHECK(best.eta_star == doctest::Approx(std::sqrt(m / kappa)).epsilon(1e-14));
  auto gain = [&](double eta) { return eta * m / (m + kappa * eta * eta); };
  for (double f : {0.2, 0.5, 0.9, 1.1, 2.0, 5.0})
    CHECK(gain(best.eta_star) >= gain(f * best.eta_star));
  auto degen = optimal_lr(dist, {0.0, 0.0}, kappa);
  CHECK(degen.degenerate);
  CHECK(degen.eta_star == 0.0);
  CHECK_THROWS_AS(optimal_lr(dist, {0.5}, kappa), std::invalid_argument);
  CHECK_THROWS_AS(optimal_lr(dist, u, 0.0), std::invalid_argument);
}

TEST_CASE("response curve machinery runs on a miniature system") {
  ResponseBase base;
  base.n_task = 3;
  base.alpha = 1.0;
  base.n_dim = 64;
  base.tv_seed = 7;
  base.opt.algo = Algo::signgd;
  base.opt.lr = 3e-3;
  base.batch = 32;
  base.n_steps = 3000;
  base.record_every = 10;
  base.run_seed = 5;
  auto curve = n0_response_curve(ResponseAxis::noise, {0.0, 0.5}, base);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].first == 0.0);
  CHECK(curve[0].second >= 0.0);
  // more gradient noise wastes more resources
  CHECK(curve[1].second > curve[0].second);
  CHECK_THROWS_AS(n0_response_curve(ResponseAxis::lr, {}, base), std::invalid_argument);
}

TEST_CASE("integration is deterministic") {
  ResourceSystem sys;
  sys.dist = make_powerlaw(5, 2.0);
  sys.eta_eff = 1.0;
  sys.N0 = 0.25;
  auto a = integrate(sys, 3.0, 0.0, 501);
  auto b = integrate(sys, 3.0, 0.0, 501);
  CHECK(a.total_loss == b.total_loss);
  CHECK(a.skills == b.skills);
}
