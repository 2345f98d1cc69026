#include "fgbif/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fgbif {

std::string_view param_name(Param p) {
  switch (p) {
    case Param::C: return "c";
    case Param::B: return "b";
    case Param::K: return "k";
    case Param::S: return "s";
    case Param::Nu: return "nu";
    case Param::H: return "h";
  }
  return "?";
}

Param param_from_name(std::string_view name) {
  if (name == "c") return Param::C;
  if (name == "b") return Param::B;
  if (name == "k") return Param::K;
  if (name == "s") return Param::S;
  if (name == "nu" || name == "v") return Param::Nu;
  if (name == "h") return Param::H;
  throw std::invalid_argument("unknown parameter name: " + std::string(name));
}

double ParameterSet::get(Param p) const {
  switch (p) {
    case Param::C: return c;
    case Param::B: return b;
    case Param::K: return k;
    case Param::S: return s;
    case Param::Nu: return nu;
    case Param::H: return h;
  }
  return 0.0;
}

void ParameterSet::set(Param p, double value) {
  switch (p) {
    case Param::C: c = value; break;
    case Param::B: b = value; break;
    case Param::K: k = value; break;
    case Param::S: s = value; break;
    case Param::Nu: nu = value; break;
    case Param::H: h = value; break;
  }
}

void ParameterSet::validate() const {
  if (!(c > 0.0)) throw std::invalid_argument("parameter c must be positive");
  if (!(s > 0.0)) throw std::invalid_argument("parameter s must be positive");
  if (!(k > 0.0)) throw std::invalid_argument("parameter k must be positive");
  if (!(nu >= 0.0)) throw std::invalid_argument("parameter nu must be non-negative");
}

std::string_view family_name(BranchFamily fam) {
  switch (fam) {
    case BranchFamily::X0: return "x0";
    case BranchFamily::X1: return "x1";
    case BranchFamily::FHalf: return "fhalf";
  }
  return "?";
}

}  // namespace fgbif

namespace fgbif::model {

namespace {

// Logistic function, safe against overflow for any argument.
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// e^t / (1 + e^t)^2 = sigmoid(t) * sigmoid(-t); symmetric in t -> -t.
double logistic_bump(double t) { return sigmoid(t) * sigmoid(-t); }

// Exponent argument k*f/(1-f) - b of the fire response, in the orientation
// where w = c * sigmoid(arg).
double fire_arg(double f, const ParameterSet& p) {
  return p.k * f / (1.0 - f) - p.b;
}

}  // namespace

double fire_rate(double f, const ParameterSet& p) {
  if (f < 0.0 || f > 1.0) throw std::domain_error("fire_rate: f outside [0,1]");
  if (f == 1.0) return p.c;  // continuous limit
  return p.c * sigmoid(fire_arg(f, p));
}

LimitValue fire_rate_deriv_with_limit(double f, const ParameterSet& p) {
  if (f < 0.0 || f > 1.0) throw std::domain_error("fire_rate_deriv: f outside [0,1]");
  if (f == 1.0) return {0.0, true};
  const double om = 1.0 - f;
  return {p.c * p.k * logistic_bump(fire_arg(f, p)) / (om * om), false};
}

double fire_rate_deriv(double f, const ParameterSet& p) {
  const LimitValue v = fire_rate_deriv_with_limit(f, p);
  if (v.is_limit) throw std::domain_error("fire_rate_deriv: formula singular at f = 1");
  return v.value;
}

Eigen::Vector2d rhs_unchecked(const State& st, const ParameterSet& p) {
  const double f = st.f;
  const double x = st.x;
  double w;
  if (f >= 1.0) {
    // y = f/(1-f) -> +inf from the left; the exponent argument diverges and
    // w tends to c at f = 1 and to 0 beyond it.
    w = (f == 1.0) ? p.c : p.c * sigmoid(p.k * f / (1.0 - f) - p.b);
  } else {
    w = p.c * sigmoid(fire_arg(f, p));
  }
  Eigen::Vector2d out;
  out[0] = w * (1.0 - f) * f - p.nu * f - p.h * (1.0 - 2.0 * x);
  out[1] = p.s * x * (1.0 - x) * (1.0 - 2.0 * f);
  return out;
}

Eigen::Vector2d rhs(const State& st, const ParameterSet& p) {
  if (!st.physical()) throw std::domain_error("rhs: state outside the unit box");
  return rhs_unchecked(st, p);
}

Eigen::Matrix2d jacobian(const State& st, const ParameterSet& p) {
  const double f = st.f;
  const double x = st.x;
  if (f == 1.0) throw std::domain_error("jacobian: singular at f = 1");
  const double w = (f >= 0.0 && f <= 1.0) ? fire_rate(f, p)
                                          : p.c * sigmoid(p.k * f / (1.0 - f) - p.b);
  const double om = 1.0 - f;
  const double wp = p.c * p.k * logistic_bump(p.k * f / om - p.b) / (om * om);
  Eigen::Matrix2d jac;
  jac(0, 0) = wp * (f - f * f) + w * (1.0 - 2.0 * f) - p.nu;
  jac(0, 1) = 2.0 * p.h;
  jac(1, 0) = -2.0 * p.s * x * (1.0 - x);
  jac(1, 1) = p.s * (1.0 - 2.0 * x) * (1.0 - 2.0 * f);
  return jac;
}

Eigen::Vector2d param_deriv(const State& st, const ParameterSet& p, Param which) {
  const double f = st.f;
  const double x = st.x;
  const double bump = (f == 1.0) ? 0.0 : logistic_bump(p.k * f / (1.0 - f) - p.b);
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  switch (which) {
    case Param::C:
      out[0] = ((f == 1.0) ? 1.0 : sigmoid(fire_arg(f, p))) * (1.0 - f) * f;
      break;
    case Param::B:
      out[0] = -p.c * bump * (1.0 - f) * f;
      break;
    case Param::K:
      // dw/dk = c * bump * f/(1-f); times (1-f)*f gives c * bump * f^2.
      out[0] = p.c * bump * f * f;
      break;
    case Param::Nu:
      out[0] = -f;
      break;
    case Param::H:
      out[0] = -(1.0 - 2.0 * x);
      break;
    case Param::S:
      out[1] = x * (1.0 - x) * (1.0 - 2.0 * f);
      break;
  }
  return out;
}

double j11(double f, const ParameterSet& p) {
  if (f < 0.0 || f >= 1.0) {
    if (f == 1.0) throw std::domain_error("j11: singular at f = 1");
    throw std::domain_error("j11: f outside [0,1)");
  }
  const double y = f / (1.0 - f);
  const double bump = logistic_bump(p.k * y - p.b);
  // w'(f)*(f - f^2) collapses to c*k*bump*y.
  return p.c * p.k * bump * y + fire_rate(f, p) * (1.0 - 2.0 * f) - p.nu;
}

double branch_h_of_f(double f, BranchFamily family, const ParameterSet& p) {
  if (family == BranchFamily::FHalf)
    throw std::invalid_argument("branch_h_of_f: use branch_x_of_h for the f = 1/2 family");
  if (f < 0.0 || f > 1.0) throw std::domain_error("branch_h_of_f: f outside [0,1]");
  const double h0 = fire_rate(f, p) * (1.0 - f) * f - p.nu * f;
  return family == BranchFamily::X0 ? h0 : -h0;
}

double branch_x_of_h(const ParameterSet& p) {
  if (p.h == 0.0) throw std::domain_error("branch_x_of_h: singular at h = 0");
  const double w_half = fire_rate(0.5, p);
  return 0.5 * (1.0 - (w_half - 2.0 * p.nu) / (4.0 * p.h));
}

double h_star(const ParameterSet& p) { return fire_rate(0.5, p) / 4.0 - p.nu / 2.0; }

double h_double_star(const ParameterSet& p) { return -h_star(p); }

std::pair<double, double> j11_peak(const ParameterSet& p) {
  const double f_peak = p.b / (p.b + p.k);
  const double value = p.c * p.b / 4.0 + p.c * (p.k - p.b) / (2.0 * (p.k + p.b)) - p.nu;
  return {f_peak, value};
}

double cusp_residual(const ParameterSet& p) { return j11_peak(p).second; }

double hopf_residual(const ParameterSet& p) {
  return p.c * p.k * logistic_bump(p.b - p.k) - p.nu;
}

std::vector<double> hopf_k_roots(const ParameterSet& p) {
  const int probes = 2000;
  const double lo = 1e-6;
  const double hi = p.b + 50.0;
  auto residual = [&](double k) {
    ParameterSet q = p;
    q.k = k;
    return hopf_residual(q);
  };
  std::vector<double> roots;
  double k_prev = lo;
  double r_prev = residual(k_prev);
  for (int i = 1; i <= probes; ++i) {
    const double k_next = lo + (hi - lo) * static_cast<double>(i) / probes;
    const double r_next = residual(k_next);
    if (r_prev == 0.0) roots.push_back(k_prev);
    if (r_prev * r_next < 0.0) {
      double a = k_prev, fa = r_prev;
      double b2 = k_next;
      while (b2 - a > 1e-10) {
        const double mid = 0.5 * (a + b2);
        const double fm = residual(mid);
        if (fm == 0.0) {
          a = b2 = mid;
          break;
        }
        if (fa * fm < 0.0) {
          b2 = mid;
        } else {
          a = mid;
          fa = fm;
        }
      }
      roots.push_back(0.5 * (a + b2));
    }
    k_prev = k_next;
    r_prev = r_next;
  }
  return roots;
}

double hopf_frequency(double x, const ParameterSet& p) {
  const double product = p.s * x * p.h * (1.0 - x);
  if (product <= 0.0)
    throw std::domain_error("hopf_frequency: s*x*h*(1-x) must be positive");
  return 2.0 * std::sqrt(product);
}

double fold_asymptote_h(const ParameterSet& p) {
  return p.c * (1.0 - p.nu * p.nu) / 4.0 - (1.0 - p.nu) / 2.0 * p.nu;
}

BTPoint bt_point(const ParameterSet& p, BranchFamily family) {
  if (family == BranchFamily::FHalf)
    throw std::invalid_argument("bt_point: family must be X0 or X1");
  const std::vector<double> roots = hopf_k_roots(p);
  if (roots.empty())
    throw NoBTError("bt_point: no Hopf k-roots, no double-zero point exists");
  const double k = roots.back();
  ParameterSet q = p;
  q.k = k;
  BTPoint bt;
  bt.k = k;
  if (family == BranchFamily::X0) {
    bt.state = State{0.5, 0.0};
    bt.h = h_star(q);
  } else {
    bt.state = State{0.5, 1.0};
    bt.h = h_double_star(q);
  }
  return bt;
}

BTTaylorCoeffs bt_taylor_coeffs(const ParameterSet& p) {
  const double z = std::exp(p.b - p.k);
  const double k = p.k;
  BTTaylorCoeffs out;
  const double inner = 16.0 * k * k * z * z / ((z + 1.0) * (z + 1.0)) +
                       z * 8.0 * (k - k * k) / (4.0 * (z + 1.0));
  out.a2 = p.c * (inner * inner - 1.0 / (z + 1.0));
  out.a1 = hopf_residual(p);
  out.a0 = p.h - p.nu / 2.0 + p.c / (4.0 * (z + 1.0));
  return out;
}

PlanarSystem forest_grassland_system() {
  PlanarSystem sys;
  sys.rhs = [](const State& st, const ParameterSet& p) { return rhs_unchecked(st, p); };
  sys.jacobian = [](const State& st, const ParameterSet& p) { return jacobian(st, p); };
  sys.param_deriv = [](const State& st, const ParameterSet& p, Param which) {
    return param_deriv(st, p, which);
  };
  return sys;
}

}  // namespace fgbif::model
