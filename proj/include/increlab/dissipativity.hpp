#pragma once

// Supply rates, storages, and checks of the dissipation inequality
//   S(x(t_a)) + int_{t_a}^{t_b} w  >=  S(x(t_b))
// in its plain, incremental and differential (pointwise matrix) forms.

#include "increlab/model.hpp"
#include "increlab/sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace increlab {

struct PassivitySupply {};

struct GainSupply {
  double gamma = 1.0;
};

/// w = [u; y]^T M [u; y] with M symmetric of size (n_u + n_y).
struct QuadraticSupply {
  Matrix M;
};

class SupplyRate {
 public:
  using Form = std::variant<PassivitySupply, GainSupply, QuadraticSupply>;

  static SupplyRate passivity() { return SupplyRate(PassivitySupply{}); }
  static SupplyRate gain(double gamma);
  static SupplyRate quadratic(Matrix M);

  const Form& form() const { return form_; }

  /// Pointwise supply for one (u, y) sample.
  double operator()(const VectorRef& u, const VectorRef& y) const;

  /// The supply as the quadratic form [u; y]^T W [u; y] for given sizes.
  Matrix weight(Eigen::Index n_u, Eigen::Index n_y) const;

  nlohmann::json to_json() const;
  static SupplyRate from_json(const nlohmann::json& j);

 private:
  explicit SupplyRate(Form f) : form_(std::move(f)) {}
  Form form_;
};

enum class StorageMode { state, increment, differential };

/// S(v) = v^T P v, with v a state, a state increment, or a tangent vector.
class QuadraticStorage {
 public:
  QuadraticStorage(Matrix P, StorageMode mode);

  const Matrix& P() const { return P_; }
  StorageMode mode() const { return mode_; }
  double operator()(const VectorRef& v) const { return v.dot(P_ * v); }
  nlohmann::json to_json() const;

 private:
  Matrix P_;
  StorageMode mode_;
};

/// Two-argument incremental storage S(x1, x2) >= 0 with S(x, x) = 0.
struct GeneralStorage {
  std::function<double(const VectorRef&, const VectorRef&)> evaluate;
  std::string description = "general";
};

struct Grid {
  double step = 1e-3;
  double horizon = 10.0;
  nlohmann::json to_json() const { return {{"step", step}, {"horizon", horizon}}; }
};

struct DissipationReport {
  bool pass = false;
  double margin = 0;       // max over t_a < t_b of r(t_b) - r(t_a)
  double worst_time = 0;   // the t_b attaining the margin
  double tolerance = 0;
  double max_abs_residual = 0;
  std::vector<double> residual;  // r(t_k) = S(t_k) - int_0^t_k w
  nlohmann::json storage;
  nlohmann::json supply;
  std::string model;
  Grid grid;

  nlohmann::json to_json() const;
};

struct MarginReport {
  bool pass = false;
  double margin = 0;  // max over grid of the largest eigenvalue of the pointwise matrix
  double worst_time = 0;
  double tolerance = 0;
  nlohmann::json storage;
  nlohmann::json supply;
  std::string model;
  Grid grid;

  nlohmann::json to_json() const;
};

/// Trapezoidal integral of w(u, y) over [0, T].
double supply_integral(const Trajectory& tr, const SupplyRate& s, double T);
/// Trapezoidal integral of the incremental supply w(du, dy) over [0, T].
double supply_integral(const TrajectoryPair& pair, const SupplyRate& s, double T);

DissipationReport check_dissipation(const StateSpaceModel& m, const QuadraticStorage& storage, const SupplyRate& s,
                                    const Signal& u, const VectorRef& x0);

DissipationReport check_incremental_dissipation(const StateSpaceModel& m, const QuadraticStorage& storage,
                                                const SupplyRate& s, const Signal& u1, const Signal& u2,
                                                const VectorRef& x0_1, const VectorRef& x0_2);

DissipationReport check_incremental_dissipation(const StateSpaceModel& m, const GeneralStorage& storage,
                                                const SupplyRate& s, const Signal& u1, const Signal& u2,
                                                const VectorRef& x0_1, const VectorRef& x0_2);

/// Inequality residual scan shared by the checks above: given S along the
/// grid and the supply samples, returns the report's numeric fields.
DissipationReport dissipation_from_samples(const Eigen::VectorXd& storage_values, const Eigen::VectorXd& supply_values,
                                           double step);

/// Symmetric block matrix N with  d/dt(dx^T P dx) - dw = z^T N z,  z = [dx; du].
/// For the passivity supply this is
///   [[A^T P + P A, P B - C^T/2], [B^T P - C/2, -(D + D^T)/2]].
Matrix dissipation_matrix(const Jacobians& J, const Matrix& P, const SupplyRate& s);

/// Pointwise differential check along a trajectory: PASS iff the largest
/// eigenvalue of the dissipation matrix stays <= 1e-8 (1 + ||P||).
MarginReport check_differential_dissipation_pointwise(const StateSpaceModel& m, const Trajectory& base,
                                                      const Matrix& P, const SupplyRate& s);

MarginReport check_differential_passivity_pointwise(const StateSpaceModel& m, const Trajectory& base,
                                                    const Matrix& P);

struct StorageSearchOptions {
  int starts = 20;
  std::uint64_t seed = 1;
  int max_iterations = 2000;
  int max_evaluations_per_start = 4000;
  Eigen::Index max_points_per_base = 256;  // grid points used during search; the final check uses all
};

/// Searches for a constant P = L L^T, L lower triangular, satisfying the
/// pointwise differential check on every base trajectory. Returns nullopt
/// when no candidate reaches the tolerance.
std::optional<Matrix> search_constant_storage(const StateSpaceModel& m, const std::vector<Trajectory>& bases,
                                              const SupplyRate& s, const StorageSearchOptions& opts = {});

/// Largest eigenvalue of the dissipation matrix over all grid points of all bases.
double worst_pointwise_margin(const StateSpaceModel& m, const std::vector<Trajectory>& bases, const Matrix& P,
                              const SupplyRate& s);

}  // namespace increlab
