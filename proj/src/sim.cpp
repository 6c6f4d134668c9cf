#include "increlab/sim.hpp"

#include "increlab/signal_io.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace increlab {

namespace {

std::string at_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << " at t=" << t;
  return os.str();
}

void check_input(const StateSpaceModel& m, const Signal& u, const SimOptions& opts) {
  if (u.channels() != m.n_u) {
    throw std::invalid_argument("input has " + std::to_string(u.channels()) + " channels, model " + m.name +
                                " expects " + std::to_string(m.n_u));
  }
  if (u.samples() < 1) throw std::invalid_argument("input signal has no samples");
  if (u.step() > opts.max_step) throw std::invalid_argument("input step exceeds the configured maximum step");
}

void check_state(const StateSpaceModel& m, const Vector& x, double t) {
  if (!x.allFinite()) throw NonFiniteStateError("state of " + m.name + " became non-finite" + at_time(t), t);
  if (const auto i = m.state_domain.first_violation(x); i >= 0) {
    std::ostringstream os;
    os.precision(17);
    os << "state x" << i << "=" << x(i) << " left the domain of " << m.name << at_time(t);
    throw DomainExitError(os.str(), t);
  }
}

void check_input_sample(const StateSpaceModel& m, const Vector& u, double t) {
  if (const auto i = m.input_domain.first_violation(u); i >= 0) {
    std::ostringstream os;
    os.precision(17);
    os << "input u" << i << "=" << u(i) << " outside the domain of " << m.name << at_time(t);
    throw DomainExitError(os.str(), t);
  }
}

}  // namespace

Trajectory simulate(const StateSpaceModel& m, const Signal& u, const VectorRef& x0, const SimOptions& opts) {
  check_input(m, u, opts);
  if (x0.size() != m.n_x) throw std::invalid_argument("initial state has wrong dimension for model " + m.name);

  const auto N = u.samples();
  const double h = u.step();
  Signal::Matrix states(N, m.n_x);
  Signal::Matrix outputs(N, m.n_y);

  Vector x = x0;
  Vector uk = u.values().row(0).transpose();
  Vector unext(m.n_u), umid(m.n_u);
  Vector k1(m.n_x), k2(m.n_x), k3(m.n_x), k4(m.n_x), tmp(m.n_x), y(m.n_y);

  check_state(m, x, 0.0);
  check_input_sample(m, uk, 0.0);
  for (Eigen::Index k = 0; k < N; ++k) {
    const double t = u.time(k);
    states.row(k) = x.transpose();
    m.h(x, uk, y);
    if (!y.allFinite()) throw NonFiniteStateError("output of " + m.name + " became non-finite" + at_time(t), t);
    outputs.row(k) = y.transpose();
    if (k + 1 == N) break;

    unext = u.values().row(k + 1).transpose();
    check_input_sample(m, unext, u.time(k + 1));
    umid = 0.5 * (uk + unext);
    if (m.n_x > 0) {
      m.f(x, uk, k1);
      tmp = x + 0.5 * h * k1;
      m.f(tmp, umid, k2);
      tmp = x + 0.5 * h * k2;
      m.f(tmp, umid, k3);
      tmp = x + h * k3;
      m.f(tmp, unext, k4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_state(m, x, u.time(k + 1));
    }
    uk.swap(unext);
  }

  return Trajectory{u, Signal(h, std::move(states)), Signal(h, std::move(outputs)), x0, m.name};
}

TrajectoryPair simulate_pair(const StateSpaceModel& m, const Signal& u1, const Signal& u2, const VectorRef& x0,
                             const SimOptions& opts) {
  return simulate_pair(m, u1, u2, x0, x0, opts);
}

TrajectoryPair simulate_pair(const StateSpaceModel& m, const Signal& u1, const Signal& u2, const VectorRef& x0_1,
                             const VectorRef& x0_2, const SimOptions& opts) {
  require_aligned(u1, u2, "pair inputs");
  return TrajectoryPair{simulate(m, u1, x0_1, opts), simulate(m, u2, x0_2, opts)};
}

Trajectory simulate_variational(const StateSpaceModel& m, const Trajectory& base, const Signal& du,
                                const VectorRef& dx0) {
  require_aligned(base.input, du, "variational input and base input");
  if (dx0.size() != m.n_x) throw std::invalid_argument("tangent initial state has wrong dimension");

  const auto N = du.samples();
  const double h = du.step();
  Signal::Matrix states(N, m.n_x);
  Signal::Matrix outputs(N, m.n_y);

  auto jac_at = [&](Eigen::Index k) {
    const Vector x = base.states.values().row(k).transpose();
    const Vector u = base.input.values().row(k).transpose();
    return linearize_at(m, x, u);
  };

  Vector dx = dx0;
  Jacobians Jk = jac_at(0);
  Vector duk = du.values().row(0).transpose();
  for (Eigen::Index k = 0; k < N; ++k) {
    states.row(k) = dx.transpose();
    outputs.row(k) = (Jk.C * dx + Jk.D * duk).transpose();
    if (k + 1 == N) break;

    const Jacobians Jn = jac_at(k + 1);
    const Vector dun = du.values().row(k + 1).transpose();
    const Matrix Am = 0.5 * (Jk.A + Jn.A);
    const Matrix Bm = 0.5 * (Jk.B + Jn.B);
    const Vector dum = 0.5 * (duk + dun);

    const Vector k1 = Jk.A * dx + Jk.B * duk;
    const Vector k2 = Am * (dx + 0.5 * h * k1) + Bm * dum;
    const Vector k3 = Am * (dx + 0.5 * h * k2) + Bm * dum;
    const Vector k4 = Jn.A * (dx + h * k3) + Jn.B * dun;
    dx += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!dx.allFinite()) {
      throw NonFiniteStateError("variational state became non-finite" + at_time(du.time(k + 1)), du.time(k + 1));
    }
    Jk = Jn;
    duk = dun;
  }
  return Trajectory{du, Signal(h, std::move(states)), Signal(h, std::move(outputs)), dx0, m.name};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& comments) {
  const auto nu = tr.input.channels(), nx = tr.states.channels(), ny = tr.outputs.channels();
  Signal::Matrix all(tr.input.samples(), nu + nx + ny);
  all.leftCols(nu) = tr.input.values();
  all.middleCols(nu, nx) = tr.states.values();
  all.rightCols(ny) = tr.outputs.values();
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < nu; ++i) names.push_back("u" + std::to_string(i));
  for (Eigen::Index i = 0; i < nx; ++i) names.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 0; i < ny; ++i) names.push_back("y" + std::to_string(i));
  write_csv(os, Signal(tr.input.step(), std::move(all)), names, comments);
}

}  // namespace increlab
