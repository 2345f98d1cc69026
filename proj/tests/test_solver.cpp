#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fgbif/model.hpp"
#include "fgbif/solver.hpp"

using namespace fgbif;
namespace m = fgbif::model;
namespace sv = fgbif::solver;

namespace {

ParameterSet reference() { return ParameterSet{1.0, 11.0, 6.5, 10.0, 0.2, 0.5}; }

// Brute-force equilibrium count from the closed-form branch functions:
// sign changes of h(f) - h on a dense grid plus the f = 1/2 member.
int analytic_equilibrium_count(const ParameterSet& p) {
  const int n = 200000;
  int count = 0;
  for (auto fam : {BranchFamily::X0, BranchFamily::X1}) {
    double prev = m::branch_h_of_f(0.0, fam, p) - p.h;
    for (int i = 1; i <= n; ++i) {
      const double f = static_cast<double>(i) / n;
      const double cur = m::branch_h_of_f(f, fam, p) - p.h;
      if (prev * cur < 0.0) ++count;
      prev = cur;
    }
  }
  if (p.h != 0.0) ++count;  // the f = 1/2 branch contributes exactly one point
  return count;
}

}  // namespace

TEST_CASE("newton solves a scalar quadratic in a few steps") {
  auto residual = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(1);
    r[0] = v[0] * v[0] - 4.0;
    return r;
  };
  auto jac = [](const Eigen::VectorXd& v) {
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = 2.0 * v[0];
    return j;
  };
  Eigen::VectorXd guess(1);
  guess << 3.0;
  sv::NewtonReport report;
  const Eigen::VectorXd root = sv::newton(residual, jac, guess, {}, &report);
  CHECK(root[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(report.converged);
  CHECK(report.iterations <= 6);
}

TEST_CASE("newton converges onto the x=1 branch from a nearby seed") {
  ParameterSet p{1.0, 11.0, 6.5, 10.0, 0.9, 0.3};
  const PlanarSystem sys = m::forest_grassland_system();
  auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return sys.rhs(State{v[0], v[1]}, p);
  };
  auto jac = [&](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
    return sys.jacobian(State{v[0], v[1]}, p);
  };
  Eigen::VectorXd guess(2);
  guess << 0.34, 0.98;
  const Eigen::VectorXd root = sv::newton(residual, jac, guess);
  CHECK(std::abs(root[1] - 1.0) < 1e-10);
  CHECK(std::abs(m::branch_h_of_f(root[0], BranchFamily::X1, p) - p.h) < 1e-10);
}

TEST_CASE("newton flags failure when seeded exactly at a fold") {
  ParameterSet p = reference();
  // locate the first j11 root by bisection, then sit on the fold
  double lo = 0.51, hi = 0.6;
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    (m::j11(lo, p) * m::j11(mid, p) <= 0.0 ? hi : lo) = mid;
  }
  const double rho1 = 0.5 * (lo + hi);
  ParameterSet q = p;
  q.h = m::branch_h_of_f(rho1, BranchFamily::X0, p) + 1e-9;  // just past the fold
  const PlanarSystem sys = m::forest_grassland_system();
  auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return sys.rhs(State{v[0], v[1]}, q);
  };
  auto jac = [&](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
    return sys.jacobian(State{v[0], v[1]}, q);
  };
  Eigen::VectorXd guess(2);
  guess << rho1, 0.0;
  CHECK_THROWS_AS(sv::newton(residual, jac, guess), NumericsError);
}

TEST_CASE("eigen2 basics") {
  const auto [i1, i2] = sv::eigen2(Eigen::Matrix2d::Identity());
  CHECK(i1 == std::complex<double>(1.0, 0.0));
  CHECK(i2 == std::complex<double>(1.0, 0.0));

  Eigen::Matrix2d bt;
  bt << 0.0, 1.0, 0.0, 0.0;  // ((0, 2h), (0, 0)) shape
  const auto [z1, z2] = sv::eigen2(bt);
  CHECK(std::abs(z1) == 0.0);
  CHECK(std::abs(z2) == 0.0);

  // trace 0, det = 4*s*x*h*(1-x) > 0: purely imaginary pair
  const double s = 10.0, x = 0.3, h = 0.5;
  Eigen::Matrix2d hopf;
  hopf << 0.0, 2.0 * h, -2.0 * s * x * (1.0 - x), 0.0;
  const auto [h1, h2] = sv::eigen2(hopf);
  const double omega = 2.0 * std::sqrt(s * x * h * (1.0 - x));
  CHECK(h1.real() == 0.0);
  CHECK(h1.imag() == doctest::Approx(omega).epsilon(1e-14));
  CHECK(h2.imag() == doctest::Approx(-omega).epsilon(1e-14));
}

TEST_CASE("eigen2 satisfies sum=trace and product=det") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    Eigen::Matrix2d a;
    a << u(rng), u(rng), u(rng), u(rng);
    const auto [l1, l2] = sv::eigen2(a);
    const auto sum = l1 + l2;
    const auto prod = l1 * l2;
    CHECK(std::abs(sum.real() - a.trace()) <=
          1e-12 * std::max(1.0, std::abs(a.trace())));
    CHECK(std::abs(prod.real() - a.determinant()) <=
          1e-12 * std::max(1.0, std::abs(a.determinant())));
    CHECK(std::abs(sum.imag()) < 1e-12);
    CHECK(std::abs(prod.imag()) < 1e-12);
  }
}

TEST_CASE("classification respects the non-hyperbolicity threshold") {
  using sv::Stability;
  CHECK(sv::classify({-1.0, 0.0}, {-2.0, 0.0}) == Stability::StableNode);
  CHECK(sv::classify({1.0, 0.0}, {2.0, 0.0}) == Stability::UnstableNode);
  CHECK(sv::classify({-1.0, 0.0}, {2.0, 0.0}) == Stability::Saddle);
  CHECK(sv::classify({-0.5, 1.0}, {-0.5, -1.0}) == Stability::StableFocus);
  CHECK(sv::classify({0.5, 1.0}, {0.5, -1.0}) == Stability::UnstableFocus);
  CHECK(sv::classify({1e-9, 0.0}, {-2.0, 0.0}) == Stability::NonHyperbolic);
  CHECK(sv::classify({0.0, 1.5}, {0.0, -1.5}) == Stability::NonHyperbolic);
}

TEST_CASE("equilibrium counts at the three reference settings") {
  const PlanarSystem sys = m::forest_grassland_system();

  ParameterSet p = reference();
  p.h = 0.05;
  auto eqs = sv::find_equilibria(sys, p);
  CHECK(eqs.size() == 6);
  CHECK(analytic_equilibrium_count(p) == 6);

  p.h = 1.5;
  eqs = sv::find_equilibria(sys, p);
  CHECK(eqs.size() == 1);
  CHECK(analytic_equilibrium_count(p) == 1);
  CHECK(eqs[0].family.has_value());
  CHECK(*eqs[0].family == BranchFamily::FHalf);

  ParameterSet q{1.0, 11.0, 6.5, 10.0, 0.9, 0.45};
  eqs = sv::find_equilibria(sys, q);
  CHECK(eqs.size() == 4);
  CHECK(analytic_equilibrium_count(q) == 4);
}

TEST_CASE("every equilibrium satisfies its residual and family invariants") {
  const PlanarSystem sys = m::forest_grassland_system();
  for (double h : {0.03, 0.05, 0.2, 0.45, 1.5}) {
    ParameterSet p = reference();
    p.h = h;
    for (const auto& eq : sv::find_equilibria(sys, p)) {
      CHECK(sys.rhs(eq.state, p).norm() < 1e-10);
      REQUIRE(eq.family.has_value());
      switch (*eq.family) {
        case BranchFamily::X0:
          CHECK(std::abs(m::branch_h_of_f(eq.state.f, BranchFamily::X0, p) - p.h) < 1e-8);
          break;
        case BranchFamily::X1:
          CHECK(std::abs(m::branch_h_of_f(eq.state.f, BranchFamily::X1, p) - p.h) < 1e-8);
          break;
        case BranchFamily::FHalf:
          CHECK(std::abs(eq.state.x - m::branch_x_of_h(p)) < 1e-8);
          break;
      }
      // triangular structure: real eigenvalues equal to diagonal entries
      if (*eq.family != BranchFamily::FHalf) {
        const Eigen::Matrix2d jac = sys.jacobian(eq.state, p);
        CHECK(eq.lambda1.imag() == 0.0);
        const double lo = std::min(eq.lambda1.real(), eq.lambda2.real());
        const double hi2 = std::max(eq.lambda1.real(), eq.lambda2.real());
        const double dlo = std::min(jac(0, 0), jac(1, 1));
        const double dhi = std::max(jac(0, 0), jac(1, 1));
        CHECK(lo == doctest::Approx(dlo).epsilon(1e-9));
        CHECK(hi2 == doctest::Approx(dhi).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("stability patterns along X0 and X1 follow the sign tables") {
  const PlanarSystem sys = m::forest_grassland_system();
  const ParameterSet base = reference();
  // sample one f inside each of the four intervals split by 1/2, rho1, rho2
  const double probes[] = {0.3, 0.52, 0.6, 0.8};
  const sv::Stability expect_x0[] = {sv::Stability::Saddle, sv::Stability::StableNode,
                                     sv::Stability::Saddle, sv::Stability::StableNode};
  const sv::Stability expect_x1[] = {sv::Stability::StableNode, sv::Stability::Saddle,
                                     sv::Stability::UnstableNode, sv::Stability::Saddle};
  for (int i = 0; i < 4; ++i) {
    ParameterSet p = base;
    p.h = m::branch_h_of_f(probes[i], BranchFamily::X0, base);
    auto eq = sv::make_equilibrium(sys, State{probes[i], 0.0}, p);
    CHECK(eq.stability == expect_x0[i]);

    p.h = m::branch_h_of_f(probes[i], BranchFamily::X1, base);
    eq = sv::make_equilibrium(sys, State{probes[i], 1.0}, p);
    CHECK(eq.stability == expect_x1[i]);
  }
}

TEST_CASE("equilibrium set mirrors under h -> -h, x -> 1-x") {
  const PlanarSystem sys = m::forest_grassland_system();
  ParameterSet p = reference();
  p.h = 0.05;
  ParameterSet q = p;
  q.h = -p.h;
  const auto eqs_p = sv::find_equilibria(sys, p);
  const auto eqs_q = sv::find_equilibria(sys, q);
  REQUIRE(eqs_p.size() == eqs_q.size());
  for (const auto& ep : eqs_p) {
    const bool found = std::any_of(eqs_q.begin(), eqs_q.end(), [&](const auto& eqm) {
      return std::abs(eqm.state.f - ep.state.f) < 1e-8 &&
             std::abs(eqm.state.x - (1.0 - ep.state.x)) < 1e-8;
    });
    CHECK(found);
  }
}
