#pragma once

// Optimization-based search for violations of
//   <P_T u1 - P_T u2, P_T H u1 - P_T H u2> >= 0
// (incremental passivity / monotonicity), lower bounds on the incremental
// gain, and the scattering transform relating the two.

#include "increlab/dissipativity.hpp"
#include "increlab/model.hpp"
#include "increlab/sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace increlab {

/// Finite-dimensional family of input signals. Coefficients live in
/// [-1, 1]^dimension(). The raw waveform r(t) satisfies |r| <= a_max and the
/// physical input is center + half_range * r per channel. Sample 0 always
/// holds the rest value r = 0, so every generated pair starts from the same
/// input as well as the same state.
struct InputParameterization {
  enum class Kind { piecewise_constant, fourier_lowpass };

  Kind kind = Kind::piecewise_constant;
  int K = 8;  // segments, or harmonics
  double horizon = 10.0;
  double a_max = 1.0;
  int channels = 1;
  Vector center;      // defaults to zeros
  Vector half_range;  // defaults to ones

  /// Coefficients per signal: K per channel for piecewise_constant, 2K + 1 for fourier_lowpass.
  int dimension() const;
  Eigen::Index samples(double step) const;

  nlohmann::json to_json() const;
  static InputParameterization from_json(const nlohmann::json& j);
};

/// Parameterization using the model's nominal input range for center/half_range.
InputParameterization default_parameterization(const StateSpaceModel& m,
                                               InputParameterization::Kind kind = InputParameterization::Kind::piecewise_constant,
                                               int K = 8, double horizon = 10.0, double a_max = 1.0);

/// Input signal for coefficients `theta` on the grid of `step`. `samples`
/// limits the output to a prefix of the full horizon (0 = full).
Signal decode(const InputParameterization& p, const Vector& theta, double step, Eigen::Index samples = 0);

/// <P_T du, P_T dy> for the decoded pair, simulated from a shared x0 on [0, T_eval].
/// A domain exit or non-finite state yields +infinity.
double monotonicity_objective(const StateSpaceModel& m, const Vector& theta1, const Vector& theta2,
                              const InputParameterization& p, double T_eval, const VectorRef& x0, double step = 1e-3);

struct ViolationCertificate {
  std::string model_name;
  nlohmann::json model_params = nlohmann::json::object();
  InputParameterization parameterization;
  Vector theta1;
  Vector theta2;
  Vector x0;
  double T_eval = 0;
  double value = 0;
  double tolerance = 0;
  std::uint64_t seed = 0;
  long budget = 0;
  Grid grid;

  nlohmann::json to_json() const;
  static ViolationCertificate from_json(const nlohmann::json& j);
};

struct FalsifyOptions {
  long budget = 5000;
  std::uint64_t seed = 1;
  double step = 1e-3;
  std::optional<Vector> x0;  // model default when empty
  int horizons = 8;
  int refine_starts = 5;
  int nm_iterations = 200;
};

struct FalsifyResult {
  std::optional<ViolationCertificate> certificate;
  double best_value = 0;
  double best_T_eval = 0;
  double tolerance = 0;
  long evaluations = 0;
  long rejected = 0;  // candidates dropped for leaving the model domain

  nlohmann::json summary() const;
};

/// Violation tolerance 1e-6 (1 + a_max^2 T).
double violation_tolerance(const InputParameterization& p);

/// Evaluation horizons: `count` log-spaced points from T/16 to T.
std::vector<double> evaluation_horizons(double T, int count);

/// Random sampling of half the budget followed by Nelder-Mead refinement of
/// the best starts. Deterministic for fixed inputs.
FalsifyResult run_falsifier(const StateSpaceModel& m, const InputParameterization& p, const FalsifyOptions& opts = {});

std::optional<ViolationCertificate> falsify_monotonicity(const StateSpaceModel& m, const InputParameterization& p,
                                                         const FalsifyOptions& opts = {});

struct GainBound {
  double ratio = 0;
  double T_eval = 0;
  Vector theta1;
  Vector theta2;
  long evaluations = 0;
};

/// Best sup ||P_T dy|| / ||P_T du|| found over the parameterization, with
/// ||P_T du|| >= 1e-6 enforced. A lower bound on the incremental gain.
GainBound incremental_gain_search(const StateSpaceModel& m, const InputParameterization& p,
                                  const FalsifyOptions& opts = {});

double incremental_gain_lb(const StateSpaceModel& m, const InputParameterization& p, const FalsifyOptions& opts = {});

struct ReplayResult {
  bool valid = false;
  double recomputed = 0;
  std::string reason;
};

/// Rebuilds the model from the zoo, re-simulates, and checks the stored
/// value to 1e-9 relative and that it is below the violation tolerance.
ReplayResult replay(const ViolationCertificate& cert);

/// Simulated pair for a certificate's inputs on the full horizon.
TrajectoryPair certificate_pair(const ViolationCertificate& cert);

/// (du', dy') = ((du + dy) / sqrt 2, (du - dy) / sqrt 2).
std::pair<Signal, Signal> scatter(const TrajectoryPair& pair);

}  // namespace increlab
