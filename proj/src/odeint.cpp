#include "fgbif/odeint.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace fgbif::odeint {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b*: weights of the embedded error estimate
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

using Vec2 = Eigen::Vector2d;

bool inside_watch_box(const Vec2& y) {
  return y[0] >= -0.05 && y[0] <= 1.05 && y[1] >= -0.05 && y[1] <= 1.05;
}

double error_norm(const Vec2& err, const Vec2& y0, const Vec2& y1, double atol,
                  double rtol) {
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / 2.0);
}

State hermite(double t0, double t1, const State& y0, const Vec2& d0, const State& y1,
              const Vec2& d1, double time) {
  const double dt = t1 - t0;
  const double u = (time - t0) / dt;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  State out;
  out.f = h00 * y0.f + h10 * dt * d0[0] + h01 * y1.f + h11 * dt * d1[0];
  out.x = h00 * y0.x + h10 * dt * d0[1] + h01 * y1.x + h11 * dt * d1[1];
  return out;
}

double hermite_f_deriv(double t0, double t1, const State& y0, const Vec2& d0,
                       const State& y1, const Vec2& d1, double time) {
  const double dt = t1 - t0;
  const double u = (time - t0) / dt;
  const double u2 = u * u;
  const double dh00 = (6 * u2 - 6 * u) / dt;
  const double dh10 = 3 * u2 - 4 * u + 1;
  const double dh01 = (-6 * u2 + 6 * u) / dt;
  const double dh11 = 3 * u2 - 2 * u;
  return dh00 * y0.f + dh10 * d0[0] + dh01 * y1.f + dh11 * d1[0];
}

// Append one adaptive integration segment [t0, t1] to traj.
void integrate_segment(const PlanarSystem& sys, State y0s, const ParameterSet& p,
                       double t0, double t1, const IntegratorSettings& st,
                       Trajectory& traj) {
  const double span = t1 - t0;
  auto f_eval = [&](const Vec2& y) -> Vec2 { return sys.rhs(State{y[0], y[1]}, p); };

  Vec2 y(y0s.f, y0s.x);
  double t = t0;
  Vec2 k1 = f_eval(y);
  if (!k1.allFinite() || !y.allFinite())
    throw NonFiniteStateError("integrate: non-finite initial data");

  traj.segment_starts.push_back(traj.t.size());
  traj.segment_params.push_back(p);
  traj.t.push_back(t);
  traj.y.push_back(State{y[0], y[1]});
  traj.dy.push_back(k1);
  if (!inside_watch_box(y)) traj.left_box = true;

  double h;
  {
    const double d0 = std::max(1e-8, y.norm());
    const double d1 = std::max(1e-8, k1.norm());
    h = std::min({0.01 * d0 / d1, span, st.max_step});
    h = std::max(h, 1e-10 * span);
  }

  double err_prev = 1.0;
  const double min_step = 1e-14 * span;
  bool last = false;
  while (!last) {
    if (t + h >= t1) {
      h = t1 - t;
      last = true;
    }
    const Vec2 k2 = f_eval(y + h * (a21 * k1));
    const Vec2 k3 = f_eval(y + h * (a31 * k1 + a32 * k2));
    const Vec2 k4 = f_eval(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec2 k5 = f_eval(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec2 k6 = f_eval(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec2 y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec2 k7 = f_eval(y1);  // FSAL stage
    const Vec2 err_vec =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    if (!y1.allFinite() || !k7.allFinite())
      throw NonFiniteStateError("integrate: state became non-finite");

    const double err = error_norm(err_vec, y, y1, st.atol, st.rtol);
    if (err <= 1.0) {
      assert(err <= 1.0);  // no step is accepted above tolerance
      t = last ? t1 : t + h;
      y = y1;
      k1 = k7;
      traj.t.push_back(t);
      traj.y.push_back(State{y[0], y[1]});
      traj.dy.push_back(k7);
      if (!inside_watch_box(y)) traj.left_box = true;

      // PI controller (orders 5/4)
      const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                         std::pow(err_prev, 0.4 / 5.0);
      h *= std::clamp(fac, 0.2, 5.0);
      h = std::min(h, st.max_step);
      err_prev = std::max(err, 1e-10);
    } else {
      last = false;
      h *= std::max(0.1, 0.9 * std::pow(err, -1.0 / 5.0));
    }
    if (h < min_step)
      throw StepUnderflowError("integrate: step size underflow at t = " +
                               std::to_string(t));
  }
}

}  // namespace

void IntegratorSettings::validate() const {
  if (!(rtol >= 1e-12 && rtol <= 1e-3))
    throw std::invalid_argument("integrator rtol must lie in [1e-12, 1e-3]");
  if (!(atol > 0.0)) throw std::invalid_argument("integrator atol must be positive");
}

State Trajectory::interpolate(double time) const {
  // last node with t[i] <= time wins, so the post-jump state is used at a
  // duplicated event time
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = (it == t.begin()) ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  if (i + 1 >= t.size()) return y.back();
  if (t[i + 1] == t[i]) return y[i + 1];
  return hermite(t[i], t[i + 1], y[i], dy[i], y[i + 1], dy[i + 1], time);
}

double Trajectory::f_derivative(double time) const {
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = (it == t.begin()) ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  if (i + 1 >= t.size()) return dy.back()[0];
  if (t[i + 1] == t[i]) return dy[i + 1][0];
  return hermite_f_deriv(t[i], t[i + 1], y[i], dy[i], y[i + 1], dy[i + 1], time);
}

Trajectory integrate(const PlanarSystem& sys, const State& y0, const ParameterSet& p,
                     double t0, double t1, const IntegratorSettings& settings) {
  settings.validate();
  if (!(t1 > t0)) throw std::invalid_argument("integrate: t1 must exceed t0");
  Trajectory traj;
  integrate_segment(sys, y0, p, t0, t1, settings, traj);
  return traj;
}

void Scenario::validate() const {
  double prev = 0.0;
  for (const auto& pert : perturbations) {
    const double time = std::visit([](const auto& j) { return j.time; }, pert);
    if (!(time > prev))
      throw std::invalid_argument("scenario: perturbation times must strictly increase");
    if (!(time < horizon))
      throw std::invalid_argument("scenario: perturbation beyond the horizon");
    prev = time;
  }
}

Trajectory run_scenario(const PlanarSystem& sys, const Scenario& sc,
                        const IntegratorSettings& settings) {
  sc.validate();
  Trajectory traj;
  State y = sc.initial;
  ParameterSet p = sc.params;
  double t = 0.0;
  for (const auto& pert : sc.perturbations) {
    const double time = std::visit([](const auto& j) { return j.time; }, pert);
    integrate_segment(sys, y, p, t, time, settings, traj);
    y = traj.y.back();
    if (std::holds_alternative<StateJump>(pert)) {
      const auto& jump = std::get<StateJump>(pert);
      if (jump.is_delta) {
        if (jump.f) y.f += *jump.f;
        if (jump.x) y.x += *jump.x;
      } else {
        if (jump.f) y.f = *jump.f;
        if (jump.x) y.x = *jump.x;
      }
    } else {
      const auto& jump = std::get<ParamJump>(pert);
      p.set(jump.param, jump.value);
    }
    traj.events.push_back(traj.t.size());  // the opening node of the next segment
    t = time;
  }
  integrate_segment(sys, y, p, t, sc.horizon, settings, traj);
  return traj;
}

std::string_view attractor_kind_name(AttractorKind k) {
  switch (k) {
    case AttractorKind::SteadyState: return "steady_state";
    case AttractorKind::Periodic: return "periodic";
    case AttractorKind::Undecided: return "undecided";
  }
  return "?";
}

AttractorVerdict classify_attractor(const Trajectory& traj, double tail_fraction) {
  if (traj.t.size() < 2) throw TooShortError("classify_attractor: empty trajectory");
  const double span = traj.t_end() - traj.t_begin();
  const double tail_start = traj.t_end() - tail_fraction * span;

  // dense sampling of the tail for amplitude and mean
  const int samples = 4000;
  double fmin = 1e300, fmax = -1e300;
  double fsum = 0.0, xsum = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double time = tail_start + (traj.t_end() - tail_start) * i / samples;
    const State st = traj.interpolate(time);
    fmin = std::min(fmin, st.f);
    fmax = std::max(fmax, st.f);
    fsum += st.f;
    xsum += st.x;
  }
  AttractorVerdict verdict;
  verdict.mean = State{fsum / (samples + 1), xsum / (samples + 1)};
  verdict.amplitude = fmax - fmin;

  // peaks of f in the tail: + -> - sign changes of the dense-output derivative
  std::vector<double> peak_times, peak_heights;
  {
    const int scan = 8000;
    double prev_t = tail_start;
    double prev_d = traj.f_derivative(prev_t);
    for (int i = 1; i <= scan; ++i) {
      const double time = tail_start + (traj.t_end() - tail_start) * i / scan;
      const double d = traj.f_derivative(time);
      if (prev_d > 0.0 && d <= 0.0) {
        double lo = prev_t, hi = time;
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (lo + hi);
          (traj.f_derivative(mid) > 0.0 ? lo : hi) = mid;
        }
        const double tp = 0.5 * (lo + hi);
        peak_times.push_back(tp);
        peak_heights.push_back(traj.interpolate(tp).f);
      }
      prev_t = time;
      prev_d = d;
    }
    // prominence filter: ignore ripples below 1e-4
    std::vector<double> pt, ph;
    for (std::size_t i = 0; i < peak_times.size(); ++i)
      if (peak_heights[i] - fmin >= 1e-4) {
        pt.push_back(peak_times[i]);
        ph.push_back(peak_heights[i]);
      }
    peak_times.swap(pt);
    peak_heights.swap(ph);
  }

  // precondition: at least 100 time units, or five candidate periods
  if (span < 100.0 * (1.0 - 1e-12)) {
    bool enough = false;
    if (peak_times.size() >= 2) {
      const double cand = (peak_times.back() - peak_times.front()) /
                          static_cast<double>(peak_times.size() - 1);
      enough = span >= 5.0 * cand;
    }
    if (!enough)
      throw TooShortError("classify_attractor: trajectory too short to classify");
  }

  if (verdict.amplitude < 1e-3) {
    verdict.kind = AttractorKind::SteadyState;
    return verdict;
  }

  if (peak_times.size() >= 4) {
    std::vector<double> spacing;
    for (std::size_t i = 1; i < peak_times.size(); ++i)
      spacing.push_back(peak_times[i] - peak_times[i - 1]);
    double mean = 0.0;
    for (double sp : spacing) mean += sp;
    mean /= spacing.size();
    double var = 0.0;
    for (double sp : spacing) var += (sp - mean) * (sp - mean);
    const double cv = std::sqrt(var / spacing.size()) / mean;

    const double drift =
        std::abs(peak_heights.back() - peak_heights.front()) / verdict.amplitude;
    if (cv < 0.10 && drift < 0.03) {
      verdict.kind = AttractorKind::Periodic;
      verdict.period = mean;
      return verdict;
    }
  }
  verdict.kind = AttractorKind::Undecided;
  return verdict;
}

}  // namespace fgbif::odeint
