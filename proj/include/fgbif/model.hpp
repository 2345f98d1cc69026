// The forest-grassland vector field and its closed-form criticality
// quantities.  Everything here is an exact formula evaluation; these routines
// double as analytic oracles for the numeric continuation engine.
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "fgbif/types.hpp"

namespace fgbif::model {

/// Fire-induced grass-to-forest transition rate w(f).  Overflow-safe for any
/// b, k; returns the continuous limit c at f = 1.
double fire_rate(double f, const ParameterSet& p);

/// dw/df.  Positive on [0,1); singular at f = 1 where the limit is 0.
/// Throws std::domain_error at f = 1; use fire_rate_deriv_with_limit when the
/// boundary must be representable.
double fire_rate_deriv(double f, const ParameterSet& p);

struct LimitValue {
  double value;
  bool is_limit;  ///< true when the formula is singular and a limit was used
};

/// Like fire_rate_deriv but reports the f = 1 boundary as {0, limit}.
LimitValue fire_rate_deriv_with_limit(double f, const ParameterSet& p);

/// Right-hand side of the coupled forest/opinion system.
Eigen::Vector2d rhs(const State& state, const ParameterSet& p);

/// Same as rhs but without the domain check on f; used by basin scans that
/// deliberately leave the unit box.
Eigen::Vector2d rhs_unchecked(const State& state, const ParameterSet& p);

/// Analytic state Jacobian.  Rejects f = 1 (fire_rate_deriv singular there).
Eigen::Matrix2d jacobian(const State& state, const ParameterSet& p);

/// Derivative of the right-hand side with respect to one named parameter.
Eigen::Vector2d param_deriv(const State& state, const ParameterSet& p, Param which);

/// The (1,1) Jacobian entry as a scalar function of f; its roots on (0,1)
/// are the fold locations of the x = 0 and x = 1 branches.
double j11(double f, const ParameterSet& p);

/// h value placing (f, x=0) or (f, x=1) on the fixed-point set.
double branch_h_of_f(double f, BranchFamily family, const ParameterSet& p);

/// x coordinate of the f = 1/2 fixed point.  Requires h != 0.
double branch_x_of_h(const ParameterSet& p);

/// Critical h of the transcritical point on the x = 0 branch.
double h_star(const ParameterSet& p);

/// Critical h of the transcritical point on the x = 1 branch (= -h_star).
double h_double_star(const ParameterSet& p);

/// Location b/(b+k) of the near-maximum of j11 and the j11 value there.
/// The value carries the c factor on both terms, as exact evaluation of the
/// J11 formula at b/(b+k) requires.
std::pair<double, double> j11_peak(const ParameterSet& p);

/// c*b/4 + c*(k-b)/(2*(k+b)) - nu.  A root signals the (approximate)
/// collapse of the two folds into a cusp.
double cusp_residual(const ParameterSet& p);

/// c*k*e^{b-k}/(1+e^{b-k})^2 - nu.  Roots in k locate the Andronov-Hopf
/// lines of the f = 1/2 branch.
double hopf_residual(const ParameterSet& p);

/// All k > 0 with hopf_residual = 0, by uniform bracketing on
/// (1e-6, b + 50) followed by bisection; zero, one or two roots.
std::vector<double> hopf_k_roots(const ParameterSet& p);

/// Angular frequency 2*sqrt(s*x*h*(1-x)) of the emergent oscillation at a
/// Hopf point with equilibrium opinion x.  Throws std::domain_error when
/// s*x*h*(1-x) <= 0 (no Hopf there).
double hopf_frequency(double x, const ParameterSet& p);

/// Large-k asymptote of the positive fold-locus branch,
/// c*(1-nu^2)/4 - nu*(1-nu)/2.
double fold_asymptote_h(const ParameterSet& p);

struct BTPoint {
  State state;  ///< (1/2, 0) or (1/2, 1)
  double h;     ///< h_star(k) for X0, h_double_star(k) for X1
  double k;     ///< the Hopf root at which the double-zero eigenvalue occurs
};

/// Double-zero-eigenvalue point of the given family, taken at the largest
/// Hopf k-root.  Throws NoBTError when hopf_k_roots is empty.
BTPoint bt_point(const ParameterSet& p, BranchFamily family);

struct BTTaylorCoeffs {
  double a0;  ///< h - nu/2 + c/(4*(e^{b-k}+1))
  double a1;  ///< equals hopf_residual
  double a2;
};

/// Coefficients of the quadratic truncation of the f-equation around the
/// double-zero point.
BTTaylorCoeffs bt_taylor_coeffs(const ParameterSet& p);

/// The built-in system wired from rhs/jacobian/param_deriv.
PlanarSystem forest_grassland_system();

}  // namespace fgbif::model
