#include "fgbif/continuation.hpp"

#include <algorithm>
#include <cmath>

namespace fgbif::continuation {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Residual G: R^{n+1} -> R^n together with its n x (n+1) Jacobian.
struct AugmentedSystem {
  int n = 2;
  std::function<VectorXd(const VectorXd&)> G;
  std::function<MatrixXd(const VectorXd&)> dG;
};

double lu_condition_estimate(const Eigen::PartialPivLU<MatrixXd>& lu) {
  const VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmin = diag.minCoeff();
  if (dmin == 0.0) return std::numeric_limits<double>::infinity();
  return diag.maxCoeff() / dmin;
}

struct MPResult {
  VectorXd u;
  VectorXd tangent;
  int iterations = 0;
  bool ok = false;
};

// Moore-Penrose corrector: the tangent border is refreshed on every
// iteration, so the update converges to the least-norm solution.
MPResult mp_correct(const AugmentedSystem& sys, VectorXd u, VectorXd v, double tol,
                    int max_iter) {
  MPResult out;
  const int n = sys.n;
  VectorXd rhs_x(n + 1), rhs_v(n + 1);
  for (int iter = 0; iter <= max_iter; ++iter) {
    const VectorXd g = sys.G(u);
    if (!g.allFinite()) return out;
    const bool converged = g.norm() < tol;
    if (converged || iter == max_iter) {
      if (!converged) return out;
      // refresh the tangent even when no update was needed, so callers
      // always see the local null direction
      MatrixXd border(n + 1, n + 1);
      border.topRows(n) = sys.dG(u);
      border.row(n) = v.transpose();
      Eigen::PartialPivLU<MatrixXd> lu(border);
      if (lu_condition_estimate(lu) <= 1e14) {
        rhs_v.setZero();
        rhs_v[n] = 1.0;
        const VectorXd w = lu.solve(rhs_v);
        if (w.allFinite() && w.norm() > 0.0) v = w.normalized();
      }
      out.u = u;
      out.tangent = v;
      out.iterations = iter;
      out.ok = true;
      return out;
    }
    MatrixXd border(n + 1, n + 1);
    border.topRows(n) = sys.dG(u);
    border.row(n) = v.transpose();
    Eigen::PartialPivLU<MatrixXd> lu(border);
    if (lu_condition_estimate(lu) > 1e14) return out;

    rhs_x.head(n) = g;
    rhs_x[n] = 0.0;
    const VectorXd step = lu.solve(rhs_x);
    if (!step.allFinite() || step.norm() > 1e3) return out;
    u -= step;

    rhs_v.setZero();
    rhs_v[n] = 1.0;
    const VectorXd w = lu.solve(rhs_v);
    if (!w.allFinite() || w.norm() == 0.0) return out;
    v = w.normalized();
  }
  return out;
}

// Initial tangent when no direction history exists: border with coordinate
// rows until one yields a well-conditioned system.
std::optional<VectorXd> initial_tangent(const AugmentedSystem& sys, const VectorXd& u,
                                        const std::vector<int>& preferred_axes) {
  const int n = sys.n;
  for (int axis : preferred_axes) {
    MatrixXd border(n + 1, n + 1);
    border.topRows(n) = sys.dG(u);
    border.row(n).setZero();
    border(n, axis) = 1.0;
    Eigen::PartialPivLU<MatrixXd> lu(border);
    if (lu_condition_estimate(lu) > 1e10) continue;
    VectorXd rhs = VectorXd::Zero(n + 1);
    rhs[n] = 1.0;
    const VectorXd w = lu.solve(rhs);
    if (w.allFinite() && w.norm() > 0.0) return w.normalized();
  }
  return std::nullopt;
}

struct RawCurve {
  std::vector<VectorXd> points;
  std::vector<VectorXd> tangents;
};

// Predictor-corrector sweep shared by every curve type.  `in_window` sees
// each accepted point; when it returns false the point is kept and the trace
// stops.
RawCurve trace_curve(const AugmentedSystem& sys, const VectorXd& u0, const VectorXd& v0,
                     const StepSettings& st,
                     const std::function<bool(const VectorXd&)>& in_window) {
  RawCurve curve;
  curve.points.push_back(u0);
  curve.tangents.push_back(v0);

  double h = st.initial;
  VectorXd u = u0, v = v0;
  while (static_cast<int>(curve.points.size()) < st.max_points) {
    const VectorXd pred = u + h * v;
    const MPResult res =
        mp_correct(sys, pred, v, st.corrector_tol, st.corrector_max_iter);
    bool reject = !res.ok;
    if (!reject) {
      // guards against hopping onto a neighbouring solution sheet: the
      // corrected point must stay near the predictor and the tangent must
      // turn slowly
      if ((res.u - pred).norm() > 1.5 * h) reject = true;
      const double turn = std::abs(res.tangent.dot(v));
      if (turn < 0.866 && h > 16.0 * st.min_step) reject = true;
    }
    if (reject) {
      h *= st.shrink;
      if (h < st.min_step)
        throw CorrectorDivergenceError(
            "continuation: corrector kept failing below the minimum step");
      continue;
    }
    VectorXd tan = res.tangent;
    if (tan.dot(v) < 0.0) tan = -tan;  // orientation-consistent along the curve

    u = res.u;
    v = tan;
    curve.points.push_back(u);
    curve.tangents.push_back(v);

    if (res.iterations <= 3)
      h = std::min(h * st.grow, st.max_step);
    else if (res.iterations > 6)
      h = std::max(h * st.shrink, st.min_step);
    if (!in_window(u)) break;
  }
  return curve;
}

struct RefineResult {
  VectorXd u;
  VectorXd tangent;
  double test_value = 0.0;
};

// Bisection on the predictor sub-step from `a` toward `b`, re-correcting at
// every probe.  `test` maps a corrected (point, tangent) pair to the scalar
// whose zero is being located.
RefineResult refine_on_curve(
    const AugmentedSystem& sys, const VectorXd& a, const VectorXd& va, const VectorXd& b,
    const StepSettings& st,
    const std::function<double(const VectorXd&, const VectorXd&)>& test) {
  double lo = 0.0;
  double hi = (b - a).norm();
  double t_lo = test(a, va);

  RefineResult best;
  best.u = b;
  best.tangent = va;
  {
    const MPResult res = mp_correct(sys, b, va, st.corrector_tol, st.corrector_max_iter);
    if (res.ok) {
      best.u = res.u;
      best.tangent = res.tangent.dot(va) < 0.0 ? VectorXd(-res.tangent) : res.tangent;
    }
  }
  double t_hi = test(best.u, best.tangent);
  best.test_value = t_hi;
  if (t_lo == 0.0) {
    best.u = a;
    best.tangent = va;
    best.test_value = 0.0;
    return best;
  }
  if (t_lo * t_hi > 0.0)
    throw LostBracketError("refine: test function does not straddle zero");

  const double span = hi;
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    // probes can fail where the bordered system degenerates (for example at
    // a BT, where two det = 0 sheets cross); jitter before giving up
    MPResult res;
    double where = mid;
    for (int attempt = 0; attempt < 4; ++attempt) {
      where = mid + 0.15 * (hi - lo) * attempt * (attempt % 2 == 0 ? 1.0 : -1.0);
      if (where <= lo || where >= hi) where = mid;
      const VectorXd pred = a + where * va;
      res = mp_correct(sys, pred, va, st.corrector_tol, st.corrector_max_iter);
      // locality guard: a probe that converged far from the segment has
      // hopped onto another solution sheet
      if (res.ok && (res.u - pred).norm() > std::max(span, 1e-6)) res.ok = false;
      if (res.ok) break;
    }
    if (!res.ok) {
      hi = mid;
      continue;
    }
    VectorXd tan = res.tangent;
    if (tan.dot(va) < 0.0) tan = -tan;
    const double t_mid = test(res.u, tan);
    best.u = res.u;
    best.tangent = tan;
    best.test_value = t_mid;
    if (std::abs(t_mid) < 1e-8 && (hi - lo) < 1e-10) break;
    if (t_lo * t_mid <= 0.0) {
      hi = where;
      t_hi = t_mid;
    } else {
      lo = where;
      t_lo = t_mid;
    }
  }
  return best;
}

// --- equilibrium branches --------------------------------------------------

AugmentedSystem equilibrium_system(const PlanarSystem& sys, ParameterSet base,
                                   Param active) {
  AugmentedSystem aug;
  aug.n = 2;
  aug.G = [&sys, base, active](const VectorXd& u) -> VectorXd {
    ParameterSet p = base;
    p.set(active, u[2]);
    return sys.rhs(State{u[0], u[1]}, p);
  };
  aug.dG = [&sys, base, active](const VectorXd& u) -> MatrixXd {
    ParameterSet p = base;
    p.set(active, u[2]);
    const State st{u[0], u[1]};
    MatrixXd jac(2, 3);
    jac.block<2, 2>(0, 0) = sys.jacobian(st, p);
    jac.col(2) = sys.param_deriv(st, p, active);
    return jac;
  };
  return aug;
}

BranchPoint make_branch_point(const PlanarSystem& sys, const ParameterSet& base,
                              Param active, const VectorXd& u, const VectorXd& tangent,
                              double arclength) {
  BranchPoint bp;
  bp.state = State{u[0], u[1]};
  bp.params = base;
  bp.params.set(active, u[2]);
  bp.active = active;
  bp.tangent = tangent;
  bp.arclength = arclength;
  const Eigen::Matrix2d jac = sys.jacobian(bp.state, bp.params);
  bp.tests.fold = jac.determinant();
  bp.tests.hopf = jac.trace();
  bp.tests.hopf_guard = !(bp.tests.fold > 0.0);
  Eigen::Matrix3d bordered;
  bordered.block<2, 2>(0, 0) = jac;
  bordered.block<2, 1>(0, 2) = sys.param_deriv(bp.state, bp.params, active);
  bordered.row(2) = tangent.transpose();
  bp.tests.branch = bordered.determinant();
  const auto [l1, l2] = solver::eigen2(jac);
  bp.lambda1 = l1;
  bp.lambda2 = l2;
  return bp;
}

}  // namespace

std::string_view bif_kind_name(BifKind kind) {
  switch (kind) {
    case BifKind::Fold: return "fold";
    case BifKind::Transcritical: return "transcritical";
    case BifKind::Hopf: return "hopf";
    case BifKind::Cusp: return "cusp";
    case BifKind::BogdanovTakens: return "bogdanov_takens";
    case BifKind::LPC: return "lpc";
  }
  return "?";
}

std::string_view locus_kind_name(LocusKind kind) {
  switch (kind) {
    case LocusKind::FoldLocus: return "fold_locus";
    case LocusKind::HopfLocus: return "hopf_locus";
    case LocusKind::LPCLocus: return "lpc_locus";
  }
  return "?";
}

TestValues evaluate_tests(const PlanarSystem& sys, const State& state,
                          const ParameterSet& params, Param active,
                          const Eigen::Vector3d& tangent) {
  VectorXd u(3);
  u << state.f, state.x, params.get(active);
  return make_branch_point(sys, params, active, u, tangent, 0.0).tests;
}

Branch continue_equilibrium_from(const PlanarSystem& sys, const State& state,
                                 const ParameterSet& params, Param active,
                                 std::pair<double, double> bounds,
                                 const Eigen::Vector3d& tangent0,
                                 const StepSettings& settings) {
  const AugmentedSystem aug = equilibrium_system(sys, params, active);
  VectorXd u0(3);
  u0 << state.f, state.x, params.get(active);

  const MPResult start = mp_correct(aug, u0, tangent0.normalized(),
                                    settings.corrector_tol, settings.corrector_max_iter);
  if (!start.ok)
    throw CorrectorDivergenceError("continue_equilibrium: start point did not converge");
  // keep the caller's direction verbatim: at a branch point the refreshed
  // tangent would snap back onto the branch being switched away from
  const VectorXd v0 = tangent0.normalized();

  auto in_window = [&](const VectorXd& u) {
    if (u[2] < bounds.first || u[2] > bounds.second) return false;
    if (u[0] >= settings.f_stop) return false;
    return true;
  };
  const RawCurve curve = trace_curve(aug, start.u, v0, settings, in_window);

  Branch branch;
  branch.active = active;
  double arc = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i > 0) arc += (curve.points[i] - curve.points[i - 1]).norm();
    branch.points.push_back(
        make_branch_point(sys, params, active, curve.points[i], curve.tangents[i], arc));
  }

  auto push_unique = [&branch](const BifurcationPoint& bp) {
    for (const auto& seen : branch.bifurcations)
      if (seen.kind == bp.kind && std::abs(seen.state.f - bp.state.f) < 1e-7 &&
          std::abs(seen.state.x - bp.state.x) < 1e-7 &&
          std::abs(seen.params.get(branch.active) - bp.params.get(branch.active)) < 1e-7)
        return;
    branch.bifurcations.push_back(bp);
  };
  for (std::size_t i = 0; i + 1 < branch.points.size(); ++i) {
    const TestValues& t0 = branch.points[i].tests;
    const TestValues& t1 = branch.points[i + 1].tests;
    try {
      if (t0.fold * t1.fold < 0.0) {
        push_unique(refine_bifurcation(sys, branch, i, BifKind::Fold, settings));
      } else if (!t0.hopf_guard && !t1.hopf_guard && t0.hopf * t1.hopf < 0.0) {
        push_unique(refine_bifurcation(sys, branch, i, BifKind::Hopf, settings));
      }
    } catch (const LostBracketError&) {
      // tangential touch without a true crossing; skip
    }
  }
  return branch;
}

Branch continue_equilibrium(const PlanarSystem& sys, const solver::Equilibrium& start,
                            Param active, std::pair<double, double> bounds,
                            const StepSettings& settings) {
  const AugmentedSystem aug = equilibrium_system(sys, start.params, active);
  VectorXd u0(3);
  u0 << start.state.f, start.state.x, start.params.get(active);
  auto v0 = initial_tangent(aug, u0, {2, 0, 1});
  if (!v0)
    throw SingularJacobianError(
        "continue_equilibrium: singular bordered system at the start point");
  Eigen::Vector3d v = *v0;
  // direction refers to the active parameter; when the start sits exactly at
  // a fold the parameter component vanishes and arclength orientation is kept
  if (settings.direction * v[2] < 0.0) v = -v;
  return continue_equilibrium_from(sys, start.state, start.params, active, bounds, v,
                                   settings);
}

BifurcationPoint refine_bifurcation(const PlanarSystem& sys, const Branch& branch,
                                    std::size_t index, BifKind kind,
                                    const StepSettings& settings) {
  if (index + 1 >= branch.points.size())
    throw std::invalid_argument("refine_bifurcation: bracket out of range");
  const BranchPoint& a = branch.points[index];
  const BranchPoint& b = branch.points[index + 1];
  const AugmentedSystem aug = equilibrium_system(sys, a.params, branch.active);

  VectorXd ua(3), ub(3);
  ua << a.state.f, a.state.x, a.params.get(branch.active);
  ub << b.state.f, b.state.x, b.params.get(branch.active);

  auto test = [&](const VectorXd& u, const VectorXd& tan) -> double {
    const BranchPoint probe = make_branch_point(sys, a.params, branch.active, u, tan, 0.0);
    switch (kind) {
      case BifKind::Fold:
      case BifKind::Transcritical: return probe.tests.fold;
      case BifKind::Hopf: return probe.tests.hopf;
      default:
        throw std::invalid_argument("refine_bifurcation: unsupported kind on a branch");
    }
  };

  const RefineResult res = refine_on_curve(aug, ua, a.tangent, ub, settings, test);
  BifurcationPoint bp;
  bp.state = State{res.u[0], res.u[1]};
  bp.params = a.params;
  bp.params.set(branch.active, res.u[2]);
  bp.residual = std::abs(res.test_value);

  if (kind == BifKind::Fold) {
    // a det crossing with a simultaneously vanishing bordered determinant is
    // a branch (transcritical) point, not a turning point
    const BranchPoint probe =
        make_branch_point(sys, a.params, branch.active, res.u, res.tangent, 0.0);
    bp.kind =
        std::abs(probe.tests.branch) < 1e-7 ? BifKind::Transcritical : BifKind::Fold;
    if (bp.kind == BifKind::Transcritical)
      bp.residual = std::max(bp.residual, std::abs(probe.tests.branch));
  } else {
    bp.kind = kind;
  }
  return bp;
}

Eigen::Vector3d second_tangent(const PlanarSystem& sys, const BifurcationPoint& bp,
                               Param active, const Eigen::Vector3d& current_tangent) {
  MatrixXd a(2, 3);
  a.block<2, 2>(0, 0) = sys.jacobian(bp.state, bp.params);
  a.col(2) = sys.param_deriv(bp.state, bp.params, active);
  // at a branch point the 2x3 system has a two-dimensional null space
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector3d n1 = svd.matrixV().col(1);
  const Eigen::Vector3d n2 = svd.matrixV().col(2);
  const Eigen::Vector3d t = current_tangent.normalized();
  const Eigen::Vector3d w1 = n1 - n1.dot(t) * t;
  const Eigen::Vector3d w2 = n2 - n2.dot(t) * t;
  Eigen::Vector3d w = w1.norm() >= w2.norm() ? w1 : w2;
  if (w.norm() < 1e-10)
    throw SingularJacobianError("second_tangent: no transversal null direction");
  return w.normalized();
}

// --- two-parameter loci ------------------------------------------------------

namespace {

AugmentedSystem locus_system(const PlanarSystem& sys, ParameterSet base,
                             std::pair<Param, Param> params, bool fold_kind) {
  AugmentedSystem aug;
  aug.n = 3;
  auto scalar = [&sys, base, params, fold_kind](const VectorXd& u) -> double {
    ParameterSet p = base;
    p.set(params.first, u[2]);
    p.set(params.second, u[3]);
    const Eigen::Matrix2d jac = sys.jacobian(State{u[0], u[1]}, p);
    return fold_kind ? jac.determinant() : jac.trace();
  };
  aug.G = [&sys, base, params, scalar](const VectorXd& u) -> VectorXd {
    ParameterSet p = base;
    p.set(params.first, u[2]);
    p.set(params.second, u[3]);
    VectorXd g(3);
    g.head(2) = sys.rhs(State{u[0], u[1]}, p);
    g[2] = scalar(u);
    return g;
  };
  aug.dG = [&sys, base, params, scalar](const VectorXd& u) -> MatrixXd {
    ParameterSet p = base;
    p.set(params.first, u[2]);
    p.set(params.second, u[3]);
    const State st{u[0], u[1]};
    MatrixXd jac = MatrixXd::Zero(3, 4);
    jac.block<2, 2>(0, 0) = sys.jacobian(st, p);
    jac.block<2, 1>(0, 2) = sys.param_deriv(st, p, params.first);
    jac.block<2, 1>(0, 3) = sys.param_deriv(st, p, params.second);
    for (int j = 0; j < 4; ++j) {  // test-function row by central differences
      const double step = 1e-6 * std::max(1.0, std::abs(u[j]));
      VectorXd up = u, um = u;
      up[j] += step;
      um[j] -= step;
      jac(2, j) = (scalar(up) - scalar(um)) / (2.0 * step);
    }
    return jac;
  };
  return aug;
}

// Refinement of a scalar-test crossing by polynomial interpolation through
// corrected probes placed a safe distance from the crossing.  Plain bisection
// stalls at a BT because the corrector degenerates where two solution sheets
// cross; the curve itself is analytic there, so interpolation through nearby
// on-curve points recovers full precision.
struct InterpResult {
  VectorXd u;
  bool ok = false;
};

InterpResult refine_by_interpolation(const AugmentedSystem& sys, const VectorXd& a,
                                     const VectorXd& va, const VectorXd& b,
                                     const StepSettings& st,
                                     const std::function<double(const VectorXd&)>& test) {
  const double span = (b - a).norm();
  const double t_a = test(a);
  const double t_b = test(b);
  if (t_a == t_b || span == 0.0) return {};
  const double sigma0 = span * t_a / (t_a - t_b);

  const double offsets[] = {-0.15, -0.08, -0.03, 0.03, 0.08, 0.15};
  std::vector<double> sig, val;
  std::vector<VectorXd> pts;
  for (double c : offsets) {
    const double sigma = sigma0 + c * span;
    const VectorXd pred = a + sigma * va;
    const MPResult res =
        mp_correct(sys, pred, va, st.corrector_tol, st.corrector_max_iter);
    if (!res.ok || (res.u - pred).norm() > span) continue;
    sig.push_back(sigma);
    pts.push_back(res.u);
    val.push_back(test(res.u));
  }
  if (sig.size() < 4) return {};

  auto lagrange = [&](double s, const std::function<double(std::size_t)>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      double li = 1.0;
      for (std::size_t j = 0; j < sig.size(); ++j)
        if (j != i) li *= (s - sig[j]) / (sig[i] - sig[j]);
      acc += li * y(i);
    }
    return acc;
  };
  auto interp_test = [&](double s) {
    return lagrange(s, [&](std::size_t i) { return val[i]; });
  };
  double lo = sig.front(), hi = sig.back();
  double f_lo = interp_test(lo);
  if (f_lo * interp_test(hi) > 0.0) return {};
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = interp_test(mid);
    if (f_lo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      f_lo = fm;
    }
  }
  const double s_star = 0.5 * (lo + hi);

  InterpResult out;
  out.u = VectorXd::Zero(a.size());
  for (int d = 0; d < a.size(); ++d)
    out.u[d] = lagrange(s_star, [&](std::size_t i) { return pts[i][d]; });
  out.ok = true;
  return out;
}

LocusPoint make_locus_point(const PlanarSystem& sys, const ParameterSet& base,
                            std::pair<Param, Param> params, const VectorXd& u,
                            const VectorXd& tangent, double arclength) {
  LocusPoint lp;
  lp.state = State{u[0], u[1]};
  lp.params = base;
  lp.params.set(params.first, u[2]);
  lp.params.set(params.second, u[3]);
  lp.p1 = u[2];
  lp.p2 = u[3];
  lp.tangent = tangent;
  lp.arclength = arclength;
  const Eigen::Matrix2d jac = sys.jacobian(lp.state, lp.params);
  lp.det = jac.determinant();
  lp.trace = jac.trace();
  return lp;
}

struct LocusTraceResult {
  std::vector<LocusPoint> points;
  std::vector<BifurcationPoint> codim2;  // endpoint BT candidates on Hopf loci
};

LocusTraceResult trace_locus(const PlanarSystem& sys, const ParameterSet& base,
                             std::pair<Param, Param> params, bool fold_kind,
                             const VectorXd& u0, ParamWindow w1, ParamWindow w2,
                             const StepSettings& settings) {
  const AugmentedSystem aug = locus_system(sys, base, params, fold_kind);

  auto v0 = initial_tangent(aug, u0, {3, 2, 0, 1});
  if (!v0)
    throw SingularJacobianError("locus continuation: no tangent at the start point");
  const MPResult start =
      mp_correct(aug, u0, *v0, settings.corrector_tol, settings.corrector_max_iter);
  if (!start.ok)
    throw CorrectorDivergenceError("locus continuation: start point did not converge");

  auto in_window = [&](const VectorXd& u) {
    if (u[2] < w1.lo || u[2] > w1.hi) return false;
    if (u[3] < w2.lo || u[3] > w2.hi) return false;
    if (u[0] >= settings.f_stop) return false;
    return true;
  };

  LocusTraceResult result;
  std::vector<LocusPoint> legs[2];
  for (int leg = 0; leg < 2; ++leg) {
    const VectorXd dir = (leg == 0) ? VectorXd(start.tangent) : VectorXd(-start.tangent);
    const RawCurve curve = trace_curve(aug, start.u, dir, settings, in_window);
    std::vector<LocusPoint>& pts = legs[leg];
    for (std::size_t i = 0; i < curve.points.size(); ++i)
      pts.push_back(
          make_locus_point(sys, base, params, curve.points[i], curve.tangents[i], 0.0));

    // a Hopf point ceases to exist where det J crosses zero; that boundary is
    // a BT candidate and ends the leg
    if (!fold_kind) {
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i].det * pts[i + 1].det < 0.0) {
          VectorXd ua(4), ub(4);
          ua << pts[i].state.f, pts[i].state.x, pts[i].p1, pts[i].p2;
          ub << pts[i + 1].state.f, pts[i + 1].state.x, pts[i + 1].p1, pts[i + 1].p2;
          auto det_test = [&](const VectorXd& u, const VectorXd&) -> double {
            ParameterSet p = base;
            p.set(params.first, u[2]);
            p.set(params.second, u[3]);
            return sys.jacobian(State{u[0], u[1]}, p).determinant();
          };
          auto det_scalar = [&](const VectorXd& u) -> double {
            ParameterSet p = base;
            p.set(params.first, u[2]);
            p.set(params.second, u[3]);
            return sys.jacobian(State{u[0], u[1]}, p).determinant();
          };
          VectorXd at;
          const InterpResult ir =
              refine_by_interpolation(aug, ua, pts[i].tangent, ub, settings, det_scalar);
          if (ir.ok) {
            at = ir.u;
          } else {
            at = refine_on_curve(aug, ua, pts[i].tangent, ub, settings, det_test).u;
          }
          ParameterSet p_at = base;
          p_at.set(params.first, at[2]);
          p_at.set(params.second, at[3]);
          const Eigen::Matrix2d jac_at = sys.jacobian(State{at[0], at[1]}, p_at);
          BifurcationPoint bt;
          bt.kind = BifKind::BogdanovTakens;
          bt.state = State{at[0], at[1]};
          bt.params = p_at;
          bt.residual =
              std::max(std::abs(jac_at.determinant()), std::abs(jac_at.trace()));
          bt.two_param_values = {{at[2], at[3]}};
          result.codim2.push_back(bt);
          pts.resize(i + 1);
          pts.push_back(make_locus_point(sys, base, params, at, pts.back().tangent, 0.0));
          break;
        }
      }
    }
  }

  // stitch: reversed backward leg, then the forward leg without its
  // duplicated start point
  std::vector<LocusPoint>& backward = legs[1];
  std::reverse(backward.begin(), backward.end());
  for (LocusPoint& lp : backward) lp.tangent = -lp.tangent;
  result.points = std::move(backward);
  result.points.insert(result.points.end(), legs[0].begin() + 1, legs[0].end());
  double arc = 0.0;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    if (i > 0) {
      const LocusPoint& p0 = result.points[i - 1];
      const LocusPoint& p1 = result.points[i];
      VectorXd a(4), b(4);
      a << p0.state.f, p0.state.x, p0.p1, p0.p2;
      b << p1.state.f, p1.state.x, p1.p1, p1.p2;
      arc += (b - a).norm();
    }
    result.points[i].arclength = arc;
  }
  return result;
}

}  // namespace

TwoParamLocus continue_fold_locus(const PlanarSystem& sys, const BifurcationPoint& fold,
                                  std::pair<Param, Param> params, ParamWindow w1,
                                  ParamWindow w2, const StepSettings& settings) {
  VectorXd u0(4);
  u0 << fold.state.f, fold.state.x, fold.params.get(params.first),
      fold.params.get(params.second);
  TwoParamLocus locus;
  locus.kind = LocusKind::FoldLocus;
  locus.params = params;
  LocusTraceResult traced =
      trace_locus(sys, fold.params, params, /*fold_kind=*/true, u0, w1, w2, settings);
  locus.points = std::move(traced.points);
  return locus;
}

TwoParamLocus continue_hopf_locus(const PlanarSystem& sys, const BifurcationPoint& hopf,
                                  std::pair<Param, Param> params, ParamWindow w1,
                                  ParamWindow w2, const StepSettings& settings) {
  VectorXd u0(4);
  u0 << hopf.state.f, hopf.state.x, hopf.params.get(params.first),
      hopf.params.get(params.second);
  TwoParamLocus locus;
  locus.kind = LocusKind::HopfLocus;
  locus.params = params;
  LocusTraceResult traced =
      trace_locus(sys, hopf.params, params, /*fold_kind=*/false, u0, w1, w2, settings);
  locus.points = std::move(traced.points);
  locus.codim2 = std::move(traced.codim2);
  return locus;
}

std::vector<BifurcationPoint> detect_codim2(const PlanarSystem& sys,
                                            TwoParamLocus& locus,
                                            const StepSettings& settings) {
  std::vector<BifurcationPoint> found;
  if (locus.points.size() < 3) return found;
  const bool fold_kind = locus.kind == LocusKind::FoldLocus;
  if (locus.kind == LocusKind::LPCLocus) return found;
  const ParameterSet base = locus.points.front().params;
  const AugmentedSystem aug = locus_system(sys, base, locus.params, fold_kind);

  auto point_vec = [](const LocusPoint& lp) {
    VectorXd u(4);
    u << lp.state.f, lp.state.x, lp.p1, lp.p2;
    return u;
  };
  auto refine_to_bif =
      [&](std::size_t i, BifKind kind,
          const std::function<double(const VectorXd&, const VectorXd&)>& test)
      -> std::optional<BifurcationPoint> {
    try {
      VectorXd at;
      double residual = 0.0;
      bool have = false;
      if (kind == BifKind::BogdanovTakens) {
        // the corrector degenerates at the BT itself; interpolate through
        // nearby on-curve probes instead of bisecting into the point
        auto scalar = [&](const VectorXd& u) -> double { return test(u, VectorXd()); };
        const InterpResult ir = refine_by_interpolation(
            aug, point_vec(locus.points[i]), locus.points[i].tangent,
            point_vec(locus.points[i + 1]), settings, scalar);
        if (ir.ok) {
          at = ir.u;
          ParameterSet p = base;
          p.set(locus.params.first, at[2]);
          p.set(locus.params.second, at[3]);
          const Eigen::Matrix2d jac = sys.jacobian(State{at[0], at[1]}, p);
          residual = std::max(std::abs(jac.determinant()), std::abs(jac.trace()));
          have = true;
        }
      }
      if (!have) {
        const RefineResult res =
            refine_on_curve(aug, point_vec(locus.points[i]), locus.points[i].tangent,
                            point_vec(locus.points[i + 1]), settings, test);
        at = res.u;
        residual = std::abs(res.test_value);
      }
      BifurcationPoint bp;
      bp.kind = kind;
      bp.state = State{at[0], at[1]};
      bp.params = base;
      bp.params.set(locus.params.first, at[2]);
      bp.params.set(locus.params.second, at[3]);
      bp.residual = residual;
      bp.two_param_values = {{at[2], at[3]}};
      return bp;
    } catch (const LostBracketError&) {
      return std::nullopt;
    }
  };

  auto trace_test = [&](const VectorXd& u, const VectorXd&) -> double {
    ParameterSet p = base;
    p.set(locus.params.first, u[2]);
    p.set(locus.params.second, u[3]);
    return sys.jacobian(State{u[0], u[1]}, p).trace();
  };
  auto det_test = [&](const VectorXd& u, const VectorXd&) -> double {
    ParameterSet p = base;
    p.set(locus.params.first, u[2]);
    p.set(locus.params.second, u[3]);
    return sys.jacobian(State{u[0], u[1]}, p).determinant();
  };
  auto component_test = [](const VectorXd&, const VectorXd& tan) -> double {
    return tan[2];
  };

  for (std::size_t i = 0; i + 1 < locus.points.size(); ++i) {
    const LocusPoint& a = locus.points[i];
    const LocusPoint& b = locus.points[i + 1];
    if (fold_kind && a.trace * b.trace < 0.0) {
      if (auto bp = refine_to_bif(i, BifKind::BogdanovTakens, trace_test))
        found.push_back(*bp);
    }
    if (!fold_kind && a.det * b.det < 0.0) {
      if (auto bp = refine_to_bif(i, BifKind::BogdanovTakens, det_test))
        found.push_back(*bp);
    }
    if (fold_kind && a.tangent[2] * b.tangent[2] < 0.0) {
      // turning point of the locus in the first active parameter: a cusp
      if (auto bp = refine_to_bif(i, BifKind::Cusp, component_test))
        found.push_back(*bp);
    }
  }

  for (const BifurcationPoint& bp : found) locus.codim2.push_back(bp);
  return found;
}

}  // namespace fgbif::continuation
