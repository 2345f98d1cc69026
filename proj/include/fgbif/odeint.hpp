// Adaptive explicit time integration (Dormand-Prince 5(4) with PI step
// control and cubic Hermite dense output), perturbation scenarios and
// attractor classification.
#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "fgbif/types.hpp"

namespace fgbif::odeint {

struct IntegratorSettings {
  double rtol = 1e-8;   ///< relative tolerance, must lie in [1e-12, 1e-3]
  double atol = 1e-10;  ///< absolute tolerance
  double max_step = std::numeric_limits<double>::infinity();

  void validate() const;
};

/// Accepted integration nodes with the node derivatives needed for cubic
/// Hermite interpolation.  Time is strictly increasing within a segment; a
/// state jump contributes a closing node and an opening node at the same
/// time, and the opening node's index is recorded in `events`.
struct Trajectory {
  std::vector<double> t;
  std::vector<State> y;
  std::vector<Eigen::Vector2d> dy;

  std::vector<std::size_t> events;          ///< first node of each new segment
  std::vector<std::size_t> segment_starts;  ///< node index opening each segment
  std::vector<ParameterSet> segment_params;

  bool left_box = false;  ///< trajectory exited [-0.05, 1.05]^2 at some node

  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }

  /// Cubic Hermite interpolation; at a jump time the post-jump state wins.
  State interpolate(double time) const;
  /// Interpolated time derivative of the forest component.
  double f_derivative(double time) const;
};

/// Integrate the system over [t0, t1].  Throws StepUnderflowError or
/// NonFiniteStateError.
Trajectory integrate(const PlanarSystem& sys, const State& y0, const ParameterSet& p,
                     double t0, double t1, const IntegratorSettings& settings = {});

/// Instantaneous replacement (or shift) of state components.
struct StateJump {
  double time = 0.0;
  std::optional<double> f;  ///< absent component is left unchanged
  std::optional<double> x;
  bool is_delta = false;  ///< interpret the components as increments
};

/// Instantaneous change of one named parameter.
struct ParamJump {
  double time = 0.0;
  Param param = Param::H;
  double value = 0.0;
};

using Perturbation = std::variant<StateJump, ParamJump>;

struct Scenario {
  State initial;
  ParameterSet params;
  double horizon = 300.0;
  std::vector<Perturbation> perturbations;  ///< times strictly increasing

  void validate() const;
};

/// Piecewise integration applying each perturbation at its time.
Trajectory run_scenario(const PlanarSystem& sys, const Scenario& sc,
                        const IntegratorSettings& settings = {});

enum class AttractorKind { SteadyState, Periodic, Undecided };

std::string_view attractor_kind_name(AttractorKind k);

struct AttractorVerdict {
  AttractorKind kind = AttractorKind::Undecided;
  State mean;               ///< mean state over the inspected tail
  double amplitude = 0.0;   ///< max - min of f over the tail
  std::optional<double> period;  ///< only for Periodic
};

/// Inspect the final tail_fraction of the trajectory.  Amplitude below 1e-3
/// reports SteadyState; at least three consistent peak spacings with steady
/// peak heights report Periodic; everything else is Undecided.  Throws
/// TooShortError when the trajectory is too short to decide responsibly.
AttractorVerdict classify_attractor(const Trajectory& traj, double tail_fraction = 0.2);

}  // namespace fgbif::odeint
