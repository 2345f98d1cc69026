#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fgbif/model.hpp"
#include "fgbif/odeint.hpp"

using namespace fgbif;
namespace m = fgbif::model;
namespace oi = fgbif::odeint;

namespace {

ParameterSet reference() { return ParameterSet{1.0, 11.0, 6.5, 10.0, 0.2, 0.5}; }

PlanarSystem zero_system() {
  PlanarSystem sys;
  sys.rhs = [](const State&, const ParameterSet&) { return Eigen::Vector2d::Zero(); };
  sys.jacobian = [](const State&, const ParameterSet&) {
    return Eigen::Matrix2d::Zero();
  };
  sys.param_deriv = [](const State&, const ParameterSet&, Param) {
    return Eigen::Vector2d::Zero();
  };
  return sys;
}

double tail_amplitude(const oi::Trajectory& traj, double window) {
  double fmin = 1e300, fmax = -1e300;
  for (int i = 0; i <= 2000; ++i) {
    const double t = traj.t_end() - window + window * i / 2000.0;
    const double f = traj.interpolate(t).f;
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  return fmax - fmin;
}

}  // namespace

TEST_CASE("zero vector field gives a constant trajectory") {
  const auto traj =
      oi::integrate(zero_system(), State{0.3, 0.4}, reference(), 0.0, 150.0);
  for (const State& st : traj.y) {
    CHECK(st.f == 0.3);
    CHECK(st.x == 0.4);
  }
  const auto verdict = oi::classify_attractor(traj);
  CHECK(verdict.kind == oi::AttractorKind::SteadyState);
  CHECK(verdict.mean.f == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("steady vs oscillating regimes across the cycle onset") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();

  p.k = 4.0;
  auto traj = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 300.0);
  CHECK(tail_amplitude(traj, 30.0) < 1e-3);
  CHECK(oi::classify_attractor(traj).kind == oi::AttractorKind::SteadyState);

  p.k = 4.7;
  traj = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 300.0);
  CHECK(tail_amplitude(traj, 30.0) > 1e-2);
  const auto verdict = oi::classify_attractor(traj);
  CHECK(verdict.kind == oi::AttractorKind::Periodic);
  REQUIRE(verdict.period.has_value());
  CHECK(*verdict.period > 3.5);
  CHECK(*verdict.period < 4.4);
  CHECK(verdict.amplitude > 0.5);
}

TEST_CASE("long transients near the cycle fold stay Undecided") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();
  p.k = 4.57;
  const auto traj = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 90.0);
  CHECK(oi::classify_attractor(traj).kind == oi::AttractorKind::Undecided);
}

TEST_CASE("too-short trajectories are rejected") {
  const auto traj = oi::integrate(zero_system(), State{0.3, 0.4}, reference(), 0.0, 50.0);
  CHECK_THROWS_AS(oi::classify_attractor(traj), TooShortError);
}

TEST_CASE("halving the tolerance leaves converged terminal states unchanged") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();
  p.k = 4.0;
  oi::IntegratorSettings coarse;
  coarse.rtol = 1e-8;
  oi::IntegratorSettings fine;
  fine.rtol = 5e-9;
  const auto a = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 300.0, coarse);
  const auto b = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 300.0, fine);
  CHECK(std::abs(a.y.back().f - b.y.back().f) < 1e-6);
  CHECK(std::abs(a.y.back().x - b.y.back().x) < 1e-6);
}

TEST_CASE("settings validation") {
  oi::IntegratorSettings st;
  st.rtol = 1e-2;
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
  st.rtol = 1e-13;
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
}

TEST_CASE("finite-time blowup raises a numerics error") {
  PlanarSystem sys;
  sys.rhs = [](const State& st, const ParameterSet&) {
    return Eigen::Vector2d(st.f * st.f, 0.0);
  };
  sys.jacobian = [](const State& st, const ParameterSet&) {
    Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
    j(0, 0) = 2.0 * st.f;
    return j;
  };
  CHECK_THROWS_AS(oi::integrate(sys, State{1.0, 0.0}, reference(), 0.0, 2.0),
                  NumericsError);
}

TEST_CASE("state jumps are applied exactly and marked") {
  const PlanarSystem sys = m::forest_grassland_system();
  oi::Scenario sc;
  sc.initial = State{0.33, 0.9};
  sc.params = reference();
  sc.params.h = 0.05;
  sc.horizon = 150.0;
  sc.perturbations.push_back(oi::StateJump{100.0, 0.73, 0.97, false});
  const auto traj = oi::run_scenario(sys, sc);
  REQUIRE(traj.events.size() == 1);
  const std::size_t idx = traj.events[0];
  CHECK(traj.t[idx] == 100.0);
  CHECK(traj.t[idx - 1] == 100.0);  // closing node of the previous segment
  CHECK(traj.y[idx].f == 0.73);
  CHECK(traj.y[idx].x == 0.97);
  REQUIRE(traj.segment_starts.size() == 2);
  CHECK(traj.segment_starts[1] == idx);
}

TEST_CASE("scenario validation rejects bad perturbation times") {
  oi::Scenario sc;
  sc.horizon = 100.0;
  sc.perturbations.push_back(oi::StateJump{50.0, 0.5, {}, false});
  sc.perturbations.push_back(oi::StateJump{40.0, 0.6, {}, false});
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.perturbations.clear();
  sc.perturbations.push_back(oi::StateJump{150.0, 0.5, {}, false});
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("basin crossing after a state perturbation") {
  // multistable window h in (0, SN4): the state perturbation kicks the orbit
  // across the separatrix and it settles on the x=0 family
  const PlanarSystem sys = m::forest_grassland_system();
  oi::Scenario sc;
  sc.initial = State{0.33, 0.9};
  sc.params = reference();
  sc.params.h = 0.05;
  sc.horizon = 500.0;
  sc.perturbations.push_back(oi::StateJump{100.0, 0.73, 0.97, false});
  const auto traj = oi::run_scenario(sys, sc);

  // before the jump: on the x=1 equilibrium
  const State pre = traj.interpolate(99.0);
  CHECK(pre.x > 0.999);
  // after: on the x=0 stable equilibrium of the mirrored branch
  const State post = traj.y.back();
  CHECK(post.x < 1e-6);
  CHECK(post.f == doctest::Approx(0.7313).epsilon(2e-3));
  const auto verdict = oi::classify_attractor(traj, 0.1);
  CHECK(verdict.kind == oi::AttractorKind::SteadyState);
}

TEST_CASE("parameter perturbation across the fold triggers a regime shift") {
  const PlanarSystem sys = m::forest_grassland_system();
  // stable x=0 state just below the fold at h ~ 0.0698
  ParameterSet p = reference();
  p.h = 0.065;
  double lo = 0.69, hi = 0.99;  // invert branch_h_of_f on the outer segment
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (m::branch_h_of_f(mid, BranchFamily::X0, p) > p.h ? lo : hi) = mid;
  }
  oi::Scenario sc;
  sc.initial = State{lo, 0.01};
  sc.params = p;
  sc.horizon = 700.0;
  sc.perturbations.push_back(oi::ParamJump{100.0, Param::H, 0.075});
  const auto traj = oi::run_scenario(sys, sc);
  const State post = traj.y.back();
  CHECK(post.x > 0.999);  // crossed to the x=1 stable state
  CHECK(std::abs(m::branch_h_of_f(post.f, BranchFamily::X1,
                                  traj.segment_params.back()) -
                 0.075) < 1e-4);
}

TEST_CASE("k-jump from the oscillatory regime lands on a steady state") {
  const PlanarSystem sys = m::forest_grassland_system();
  oi::Scenario sc;
  sc.initial = State{0.65, 0.2};
  sc.params = reference();  // k = 6.5: stable cycle regime
  sc.horizon = 400.0;
  sc.perturbations.push_back(oi::ParamJump{100.0, Param::K, 3.0});
  const auto traj = oi::run_scenario(sys, sc);
  const auto verdict = oi::classify_attractor(traj, 0.2);
  CHECK(verdict.kind == oi::AttractorKind::SteadyState);
  CHECK(verdict.mean.f == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("trajectory leaves the watch box only when it actually does") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();
  p.k = 4.0;
  auto traj = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 50.0);
  CHECK_FALSE(traj.left_box);
  traj = oi::integrate(sys, State{1.2, 0.2}, p, 0.0, 1.0);
  CHECK(traj.left_box);
}

TEST_CASE("interpolation matches nodes and stays accurate between them") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();
  const auto traj = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 20.0);
  // node reproduction
  for (std::size_t i = 0; i < traj.t.size(); i += 7) {
    const State st = traj.interpolate(traj.t[i]);
    CHECK(st.f == doctest::Approx(traj.y[i].f).epsilon(1e-12));
  }
  // midpoint accuracy against a fine re-integration
  oi::IntegratorSettings fine;
  fine.rtol = 1e-12;
  fine.atol = 1e-14;
  const auto probe = oi::integrate(sys, State{0.65, 0.2}, p, 0.0, 13.37, fine);
  const State a = traj.interpolate(13.37);
  const State b = probe.y.back();
  CHECK(std::abs(a.f - b.f) < 1e-5);
  CHECK(std::abs(a.x - b.x) < 1e-5);
}
