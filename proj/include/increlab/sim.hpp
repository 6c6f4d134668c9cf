#pragma once

// Fixed-step RK4 simulation of state-space models on a sample grid.
//
// Inputs are sampled signals; between samples the input is interpolated
// linearly (first-order hold), so the half-step RK4 stages see the average of
// neighbouring samples. For x' = u this makes the state exactly the
// trapezoidal running integral of u, the same quadrature used by `inner`.

#include "increlab/model.hpp"
#include "increlab/signal.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace increlab {

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  /// First grid time at which the failure was detected.
  double time() const { return time_; }

 private:
  double time_;
};

class DomainExitError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class NonFiniteStateError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

struct SimOptions {
  double max_step = 0.1;
};

struct Trajectory {
  Signal input;
  Signal states;
  Signal outputs;
  Vector x0;
  std::string model_name;
};

/// Two trajectories of one model on one grid. Differences are first - second.
struct TrajectoryPair {
  Trajectory first;
  Trajectory second;

  Signal input_difference() const { return first.input - second.input; }
  Signal state_difference() const { return first.states - second.states; }
  Signal output_difference() const { return first.outputs - second.outputs; }
};

Trajectory simulate(const StateSpaceModel& m, const Signal& u, const VectorRef& x0, const SimOptions& opts = {});

/// Both runs start from x0 (zero initial increment).
TrajectoryPair simulate_pair(const StateSpaceModel& m, const Signal& u1, const Signal& u2, const VectorRef& x0,
                             const SimOptions& opts = {});

/// Runs from distinct initial states, for incremental checks with nonzero initial increment.
TrajectoryPair simulate_pair(const StateSpaceModel& m, const Signal& u1, const Signal& u2, const VectorRef& x0_1,
                             const VectorRef& x0_2, const SimOptions& opts = {});

/// Integrates  dx' = A(t) dx + B(t) du,  dy = C(t) dx + D(t) du  with the
/// Jacobians evaluated along `base` and interpolated linearly at half steps.
/// The result holds du in `input`, dx in `states` and dy in `outputs`.
Trajectory simulate_variational(const StateSpaceModel& m, const Trajectory& base, const Signal& du,
                                const VectorRef& dx0);

/// CSV with columns t, u0.., x0.., y0..; `comments` become leading "# " lines.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& comments = {});

}  // namespace increlab
