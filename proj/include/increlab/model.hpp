#pragma once

// State-space models  x' = f(x, u),  y = h(x, u)  and their linearizations.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace increlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using VectorOut = Eigen::Ref<Eigen::VectorXd>;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a model is evaluated outside its declared state or input box.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Jacobians {
  Matrix A;  // df/dx
  Matrix B;  // df/du
  Matrix C;  // dh/dx
  Matrix D;  // dh/du
};

/// Per-coordinate closed box; infinite bounds mean unconstrained.
struct Box {
  Vector lower;
  Vector upper;

  static Box unbounded(Eigen::Index n) {
    return {Vector::Constant(n, -std::numeric_limits<double>::infinity()),
            Vector::Constant(n, std::numeric_limits<double>::infinity())};
  }

  /// First coordinate outside the box, or -1 if inside.
  Eigen::Index first_violation(const VectorRef& v) const {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v(i) >= lower(i) && v(i) <= upper(i))) return i;
    }
    return -1;
  }

  bool contains(const VectorRef& v) const { return first_violation(v) < 0; }
  bool bounded(Eigen::Index i) const { return std::isfinite(lower(i)) && std::isfinite(upper(i)); }
};

struct StateSpaceModel {
  using Field = std::function<void(const VectorRef& x, const VectorRef& u, VectorOut out)>;
  using JacobianField = std::function<void(const VectorRef& x, const VectorRef& u, Jacobians& out)>;

  std::string name;
  int n_x = 0;
  int n_u = 1;
  int n_y = 1;
  Field f;
  Field h;
  JacobianField jacobians;  // empty when no analytic form is known
  Box state_domain;
  Box input_domain;
  Vector x0_default;
  // Nominal input operating range, used by falsifier input generation:
  // generated inputs are input_center + input_half_range * r with |r| <= a_max.
  Vector input_center;
  Vector input_half_range;
  nlohmann::json params = nlohmann::json::object();

  Vector dynamics(const VectorRef& x, const VectorRef& u) const {
    Vector dx(n_x);
    f(x, u, dx);
    return dx;
  }

  Vector output(const VectorRef& x, const VectorRef& u) const {
    Vector y(n_y);
    h(x, u, y);
    return y;
  }

  bool has_analytic_jacobians() const { return static_cast<bool>(jacobians); }
};

/// Analytic Jacobians when the model provides them, otherwise central
/// differences with step 1e-6 * (1 + |coordinate|). Throws DomainError if
/// (x, u) lies outside the model's domain.
Jacobians linearize_at(const StateSpaceModel& m, const VectorRef& x, const VectorRef& u);

/// Central-difference Jacobians regardless of whether analytic ones exist.
Jacobians finite_difference_jacobians(const StateSpaceModel& m, const VectorRef& x, const VectorRef& u);

}  // namespace increlab
