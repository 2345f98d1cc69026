#include "fgbif/solver.hpp"

#include <algorithm>
#include <cmath>

namespace fgbif::solver {

namespace {

Eigen::MatrixXd fd_jacobian(const ResidualFn& residual, const Eigen::VectorXd& v) {
  const Eigen::VectorXd r0 = residual(v);
  Eigen::MatrixXd jac(r0.size(), v.size());
  for (int j = 0; j < v.size(); ++j) {
    const double step = 1e-7 * std::max(1.0, std::abs(v[j]));
    Eigen::VectorXd vp = v, vm = v;
    vp[j] += step;
    vm[j] -= step;
    jac.col(j) = (residual(vp) - residual(vm)) / (2.0 * step);
  }
  return jac;
}

// Rough condition estimate from the U factor of a partial-pivot LU.
double lu_condition_estimate(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  if (dmin == 0.0) return std::numeric_limits<double>::infinity();
  return dmax / dmin;
}

}  // namespace

Eigen::VectorXd newton(const ResidualFn& residual, const JacobianFn& jac_fn,
                       Eigen::VectorXd v, const NewtonSettings& settings,
                       NewtonReport* report) {
  Eigen::VectorXd r = residual(v);
  double rnorm = r.norm();
  for (int iter = 0; iter < settings.max_iter; ++iter) {
    if (rnorm < settings.res_tol) {
      if (report) *report = {iter, rnorm, true};
      return v;
    }
    const Eigen::MatrixXd jac =
        (settings.fd_fallback || !jac_fn) ? fd_jacobian(residual, v) : jac_fn(v);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (lu_condition_estimate(lu) > 1e14)
      throw SingularJacobianError("newton: Jacobian numerically singular");
    const Eigen::VectorXd full_step = lu.solve(-r);

    // halving line search when the full step increases the residual
    double lambda = 1.0;
    Eigen::VectorXd v_next;
    Eigen::VectorXd r_next;
    double rnorm_next = 0.0;
    for (int halving = 0; halving <= 8; ++halving) {
      v_next = v + lambda * full_step;
      r_next = residual(v_next);
      rnorm_next = r_next.norm();
      if (std::isfinite(rnorm_next) && (rnorm_next < rnorm || rnorm < settings.res_tol))
        break;
      lambda *= 0.5;
    }
    const double step_size = (lambda * full_step).norm();
    v = v_next;
    r = r_next;
    rnorm = rnorm_next;
    if (step_size < settings.step_tol && rnorm < std::sqrt(settings.res_tol)) break;
  }
  if (rnorm < settings.res_tol) {
    if (report) *report = {settings.max_iter, rnorm, true};
    return v;
  }
  if (report) *report = {settings.max_iter, rnorm, false};
  throw MaxIterationsError("newton: no convergence in " +
                           std::to_string(settings.max_iter) + " iterations");
}

std::pair<std::complex<double>, std::complex<double>> eigen2(const Eigen::Matrix2d& a) {
  const double tr = a.trace();
  const double det = a.determinant();
  const double disc = tr * tr - 4.0 * det;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    // avoid cancellation: compute the larger-magnitude root first
    double l1;
    if (tr >= 0.0)
      l1 = 0.5 * (tr + root);
    else
      l1 = 0.5 * (tr - root);
    const double l2 = (l1 != 0.0) ? det / l1 : 0.5 * (tr + (tr >= 0.0 ? -root : root));
    return {std::complex<double>(l1, 0.0), std::complex<double>(l2, 0.0)};
  }
  const double im = 0.5 * std::sqrt(-disc);
  return {std::complex<double>(0.5 * tr, im), std::complex<double>(0.5 * tr, -im)};
}

std::string_view stability_name(Stability s) {
  switch (s) {
    case Stability::StableNode: return "stable_node";
    case Stability::StableFocus: return "stable_focus";
    case Stability::UnstableNode: return "unstable_node";
    case Stability::UnstableFocus: return "unstable_focus";
    case Stability::Saddle: return "saddle";
    case Stability::NonHyperbolic: return "non_hyperbolic";
  }
  return "?";
}

Stability classify(const std::complex<double>& l1, const std::complex<double>& l2) {
  constexpr double hyperbolicity_tol = 1e-8;
  if (std::abs(l1.real()) < hyperbolicity_tol || std::abs(l2.real()) < hyperbolicity_tol)
    return Stability::NonHyperbolic;
  const bool complex_pair = l1.imag() != 0.0;
  if (complex_pair)
    return l1.real() < 0.0 ? Stability::StableFocus : Stability::UnstableFocus;
  if (l1.real() < 0.0 && l2.real() < 0.0) return Stability::StableNode;
  if (l1.real() > 0.0 && l2.real() > 0.0) return Stability::UnstableNode;
  return Stability::Saddle;
}

Equilibrium make_equilibrium(const PlanarSystem& sys, const State& state,
                             const ParameterSet& p) {
  Equilibrium eq;
  eq.state = state;
  eq.params = p;
  const auto [l1, l2] = eigen2(sys.jacobian(state, p));
  eq.lambda1 = l1;
  eq.lambda2 = l2;
  eq.stability = classify(l1, l2);
  constexpr double family_tol = 1e-6;
  if (std::abs(state.x) < family_tol)
    eq.family = BranchFamily::X0;
  else if (std::abs(state.x - 1.0) < family_tol)
    eq.family = BranchFamily::X1;
  else if (std::abs(state.f - 0.5) < family_tol)
    eq.family = BranchFamily::FHalf;
  return eq;
}

std::vector<Equilibrium> find_equilibria(const PlanarSystem& sys, const ParameterSet& p,
                                         const SeedGrid& grid) {
  std::vector<double> x_levels = {0.0, 0.5, 1.0};
  for (int i = 1; i <= grid.x_interior_count; ++i)
    x_levels.push_back(static_cast<double>(i) / (grid.x_interior_count + 1));

  auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return sys.rhs(State{v[0], v[1]}, p);
  };
  auto jac = [&](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
    return sys.jacobian(State{v[0], v[1]}, p);
  };

  NewtonSettings settings;
  std::vector<State> roots;
  for (int i = 1; i <= grid.f_count; ++i) {
    const double f0 = static_cast<double>(i) / (grid.f_count + 1);
    for (double x0 : x_levels) {
      Eigen::VectorXd guess(2);
      guess << f0, x0;
      try {
        const Eigen::VectorXd root = newton(residual, jac, guess, settings);
        if (root[0] < grid.f_accept_min - 1e-9 || root[0] > grid.f_accept_max + 1e-9)
          continue;
        roots.push_back(State{root[0], root[1]});
      } catch (const NumericsError&) {
        continue;  // seed did not converge; harmless
      } catch (const std::domain_error&) {
        continue;
      }
    }
  }

  std::sort(roots.begin(), roots.end(), [](const State& a, const State& b) {
    if (a.f != b.f) return a.f < b.f;
    return a.x < b.x;
  });

  constexpr double dedup_radius = 1e-6;  // max-norm on (f, x)
  std::vector<Equilibrium> out;
  for (const State& st : roots) {
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Equilibrium& e) {
      return std::max(std::abs(e.state.f - st.f), std::abs(e.state.x - st.x)) <
             dedup_radius;
    });
    if (!duplicate) out.push_back(make_equilibrium(sys, st, p));
  }
  return out;
}

}  // namespace fgbif::solver
