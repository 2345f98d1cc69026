// Dense small-scale nonlinear algebra: damped Newton with user-supplied
// Jacobians, the stable 2x2 eigensolver, and multi-seed equilibrium search.
#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "fgbif/types.hpp"

namespace fgbif::solver {

struct NewtonSettings {
  double res_tol = 1e-10;
  double step_tol = 1e-12;
  int max_iter = 30;
  bool fd_fallback = false;  ///< build the Jacobian by central differences
};

struct NewtonReport {
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Damped Newton iteration (halving line search, at most 8 halvings).
/// Throws MaxIterationsError or SingularJacobianError.
Eigen::VectorXd newton(const ResidualFn& residual, const JacobianFn& jac,
                       Eigen::VectorXd guess, const NewtonSettings& settings = {},
                       NewtonReport* report = nullptr);

/// Eigenvalues of a 2x2 matrix from the characteristic polynomial
/// lambda^2 - tr*lambda + det, using the cancellation-free quadratic formula.
std::pair<std::complex<double>, std::complex<double>> eigen2(const Eigen::Matrix2d& a);

enum class Stability {
  StableNode,
  StableFocus,
  UnstableNode,
  UnstableFocus,
  Saddle,
  NonHyperbolic
};

std::string_view stability_name(Stability s);

struct Equilibrium {
  State state;
  ParameterSet params;
  std::complex<double> lambda1, lambda2;
  Stability stability = Stability::NonHyperbolic;
  std::optional<BranchFamily> family;
};

/// Classify from an eigenvalue pair; |Re lambda| < 1e-8 counts as
/// non-hyperbolic.
Stability classify(const std::complex<double>& l1, const std::complex<double>& l2);

/// Attach eigenvalues, stability class and family tag to a converged state.
Equilibrium make_equilibrium(const PlanarSystem& sys, const State& state,
                             const ParameterSet& p);

struct SeedGrid {
  int f_count = 99;            ///< uniform interior f seeds
  int x_interior_count = 9;    ///< interior x levels in addition to {0, 1/2, 1}
  double f_accept_min = 0.0;   ///< converged roots outside this f-window are dropped
  double f_accept_max = 1.0;
};

/// Multi-seed Newton search for every equilibrium with f inside the
/// acceptance window.  Results are sorted by (f, x) and de-duplicated with a
/// 1e-6 max-norm radius.
std::vector<Equilibrium> find_equilibria(const PlanarSystem& sys, const ParameterSet& p,
                                         const SeedGrid& grid = {});

}  // namespace fgbif::solver
