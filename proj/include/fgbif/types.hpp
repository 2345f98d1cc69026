// Core domain types shared by every fgbif module.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fgbif {

/// Named model parameters, addressable for use as continuation variables.
enum class Param { C, B, K, S, Nu, H };

std::string_view param_name(Param p);
Param param_from_name(std::string_view name);

/// The six model parameters.  c, s, k must be positive and nu non-negative;
/// b and h may take either sign.
struct ParameterSet {
  double c = 1.0;    ///< maximum fire-induced transition rate
  double b = 11.0;   ///< activation offset of the fire response
  double k = 6.5;    ///< activation steepness of the fire response
  double s = 10.0;   ///< social learning rate
  double nu = 0.2;   ///< natural forest-to-grassland transition rate
  double h = 0.5;    ///< magnitude of human influence

  double get(Param p) const;
  void set(Param p, double value);

  /// Throws std::invalid_argument when a sign constraint is violated.
  void validate() const;
};

/// A phase point.  Values outside the unit box are representable; physical()
/// tells whether the point is a meaningful (proportion, fraction) pair.
struct State {
  double f = 0.0;  ///< forest proportion
  double x = 0.0;  ///< fraction of the population preferring forest

  bool physical() const {
    return f >= 0.0 && f <= 1.0 && x >= 0.0 && x <= 1.0;
  }
};

/// Analytic fixed-point families: x = 0, x = 1 and f = 1/2.
enum class BranchFamily { X0, X1, FHalf };

std::string_view family_name(BranchFamily fam);

/// A planar autonomous vector field with analytic state Jacobian and
/// per-parameter derivative.  All evaluators must be pure.
struct PlanarSystem {
  static constexpr int dimension = 2;

  std::function<Eigen::Vector2d(const State&, const ParameterSet&)> rhs;
  std::function<Eigen::Matrix2d(const State&, const ParameterSet&)> jacobian;
  std::function<Eigen::Vector2d(const State&, const ParameterSet&, Param)> param_deriv;
};

// --- error taxonomy ----------------------------------------------------

struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MaxIterationsError : NumericsError {
  using NumericsError::NumericsError;
};
struct SingularJacobianError : NumericsError {
  using NumericsError::NumericsError;
};
struct CorrectorDivergenceError : NumericsError {
  using NumericsError::NumericsError;
};
struct NoConvergenceError : NumericsError {
  using NumericsError::NumericsError;
};
struct MeshMismatchError : NumericsError {
  using NumericsError::NumericsError;
};
struct StepUnderflowError : NumericsError {
  using NumericsError::NumericsError;
};
struct NonFiniteStateError : NumericsError {
  using NumericsError::NumericsError;
};
struct TooShortError : NumericsError {
  using NumericsError::NumericsError;
};
struct LostBracketError : NumericsError {
  using NumericsError::NumericsError;
};
struct IllConditionedError : NumericsError {
  using NumericsError::NumericsError;
};
struct NoBTError : NumericsError {
  using NumericsError::NumericsError;
};

}  // namespace fgbif
