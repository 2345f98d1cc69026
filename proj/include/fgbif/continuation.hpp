// Pseudo-arclength equilibrium continuation with a Moore-Penrose corrector,
// codim-1 test functions (fold, branch point, Hopf), bisection refinement and
// two-parameter fold/Hopf loci with cusp and Bogdanov-Takens detection.
#pragma once

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "fgbif/solver.hpp"
#include "fgbif/types.hpp"

namespace fgbif::continuation {

struct StepSettings {
  double initial = 1e-3;
  double min_step = 1e-8;
  /// Default sized so that neighbouring test-function zeros (the closest
  /// pair on the reference system sits ~0.03 apart in arclength) cannot be
  /// straddled by a single step.
  double max_step = 0.02;
  double grow = 1.3;    ///< applied when the corrector converges in <= 3 iterations
  double shrink = 0.5;  ///< applied when it needs > 6 iterations or fails
  int corrector_max_iter = 8;
  double corrector_tol = 1e-10;
  int direction = +1;  ///< sign of the initial active-parameter motion
  int max_points = 20000;
  double f_stop = 1.0 - 1e-6;  ///< domain boundary: stop when f reaches this
};

struct TestValues {
  double fold = 0.0;        ///< det of the state Jacobian
  double branch = 0.0;      ///< det of the square bordered matrix [J, F_p; t^T]
  double hopf = 0.0;        ///< trace of the state Jacobian
  bool hopf_guard = false;  ///< det <= 0: trace sign changes are not Hopf points
};

struct BranchPoint {
  State state;
  ParameterSet params;
  Param active = Param::H;
  Eigen::Vector3d tangent = Eigen::Vector3d::Zero();  ///< unit (df, dx, dparam)
  TestValues tests;
  std::complex<double> lambda1, lambda2;
  double arclength = 0.0;
};

enum class BifKind { Fold, Transcritical, Hopf, Cusp, BogdanovTakens, LPC };

std::string_view bif_kind_name(BifKind kind);

struct BifurcationPoint {
  BifKind kind = BifKind::Fold;
  State state;
  ParameterSet params;
  double residual = 0.0;  ///< |defining test function| at the refined point
  /// values of the two active parameters, for points found on a locus
  std::optional<std::pair<double, double>> two_param_values;
};

struct Branch {
  std::vector<BranchPoint> points;
  Param active = Param::H;
  std::vector<BifurcationPoint> bifurcations;
};

/// Trace the equilibrium branch through folds until the active parameter
/// leaves [bounds.first, bounds.second], f reaches the domain boundary, or
/// the step count limit.  Throws CorrectorDivergenceError when the step
/// control collapses below min_step.
Branch continue_equilibrium(const PlanarSystem& sys, const solver::Equilibrium& start,
                            Param active, std::pair<double, double> bounds,
                            const StepSettings& settings = {});

/// Same, but from a raw point with a caller-supplied initial tangent (used
/// for branch switching at transcritical points).
Branch continue_equilibrium_from(const PlanarSystem& sys, const State& state,
                                 const ParameterSet& params, Param active,
                                 std::pair<double, double> bounds,
                                 const Eigen::Vector3d& tangent0,
                                 const StepSettings& settings = {});

/// Test-function evaluations for an arbitrary point (mainly for tests; the
/// continuation fills them in for every accepted point).
TestValues evaluate_tests(const PlanarSystem& sys, const State& state,
                          const ParameterSet& params, Param active,
                          const Eigen::Vector3d& tangent);

/// Refine a sign change of `kind`'s test function between branch points
/// [index, index+1] by bisection on arclength with full corrector solves at
/// every probe.  Throws LostBracketError when the pair does not straddle.
BifurcationPoint refine_bifurcation(const PlanarSystem& sys, const Branch& branch,
                                    std::size_t index, BifKind kind,
                                    const StepSettings& settings = {});

/// The second branch direction at a transcritical point, from the null space
/// of the bordered continuation matrix.
Eigen::Vector3d second_tangent(const PlanarSystem& sys, const BifurcationPoint& bp,
                               Param active, const Eigen::Vector3d& current_tangent);

// --- two-parameter loci --------------------------------------------------

enum class LocusKind { FoldLocus, HopfLocus, LPCLocus };

std::string_view locus_kind_name(LocusKind kind);

struct LocusPoint {
  State state;
  ParameterSet params;
  double p1 = 0.0, p2 = 0.0;  ///< active pair values
  Eigen::Vector4d tangent = Eigen::Vector4d::Zero();
  double det = 0.0, trace = 0.0;
  double arclength = 0.0;
};

struct ParamWindow {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct TwoParamLocus {
  LocusKind kind = LocusKind::FoldLocus;
  std::pair<Param, Param> params{Param::H, Param::K};
  std::vector<LocusPoint> points;
  std::vector<BifurcationPoint> codim2;
};

/// Continue the augmented fold system {rhs = 0, det J = 0} in both
/// directions from a refined fold, within the parameter windows.
TwoParamLocus continue_fold_locus(const PlanarSystem& sys, const BifurcationPoint& fold,
                                  std::pair<Param, Param> params, ParamWindow w1,
                                  ParamWindow w2, const StepSettings& settings = {});

/// Continue the augmented Hopf system {rhs = 0, tr J = 0}; each end stops
/// where det J crosses zero (the Hopf ceases to exist) and that endpoint is
/// refined and recorded as a Bogdanov-Takens candidate.
TwoParamLocus continue_hopf_locus(const PlanarSystem& sys, const BifurcationPoint& hopf,
                                  std::pair<Param, Param> params, ParamWindow w1,
                                  ParamWindow w2, const StepSettings& settings = {});

/// Scan a computed locus for codimension-two points: on a fold locus a BT
/// where trace J changes sign and a cusp where the tangent component of the
/// first active parameter changes sign.  Refined points are appended to
/// locus.codim2 and returned.
std::vector<BifurcationPoint> detect_codim2(const PlanarSystem& sys,
                                            TwoParamLocus& locus,
                                            const StepSettings& settings = {});

}  // namespace fgbif::continuation
