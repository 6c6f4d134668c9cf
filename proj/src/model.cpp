#include "increlab/model.hpp"

#include <cmath>
#include <string>

namespace increlab {

namespace {

void require_in_domain(const StateSpaceModel& m, const VectorRef& x, const VectorRef& u) {
  if (x.size() != m.n_x || u.size() != m.n_u) {
    throw ModelError("linearization point has wrong dimensions for model " + m.name);
  }
  if (const auto i = m.state_domain.first_violation(x); i >= 0) {
    throw DomainError("state coordinate " + std::to_string(i) + " outside domain of " + m.name);
  }
  if (const auto i = m.input_domain.first_violation(u); i >= 0) {
    throw DomainError("input coordinate " + std::to_string(i) + " outside domain of " + m.name);
  }
}

}  // namespace

Jacobians finite_difference_jacobians(const StateSpaceModel& m, const VectorRef& x, const VectorRef& u) {
  Jacobians J{Matrix(m.n_x, m.n_x), Matrix(m.n_x, m.n_u), Matrix(m.n_y, m.n_x), Matrix(m.n_y, m.n_u)};
  Vector xp = x, xm = x, up = u, um = u;
  Vector fp(m.n_x), fm(m.n_x), hp(m.n_y), hm(m.n_y);

  for (int j = 0; j < m.n_x; ++j) {
    const double d = 1e-6 * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + d;
    xm(j) = x(j) - d;
    m.f(xp, u, fp);
    m.f(xm, u, fm);
    m.h(xp, u, hp);
    m.h(xm, u, hm);
    J.A.col(j) = (fp - fm) / (2 * d);
    J.C.col(j) = (hp - hm) / (2 * d);
    xp(j) = xm(j) = x(j);
  }
  for (int j = 0; j < m.n_u; ++j) {
    const double d = 1e-6 * (1.0 + std::abs(u(j)));
    up(j) = u(j) + d;
    um(j) = u(j) - d;
    m.f(x, up, fp);
    m.f(x, um, fm);
    m.h(x, up, hp);
    m.h(x, um, hm);
    J.B.col(j) = (fp - fm) / (2 * d);
    J.D.col(j) = (hp - hm) / (2 * d);
    up(j) = um(j) = u(j);
  }
  return J;
}

Jacobians linearize_at(const StateSpaceModel& m, const VectorRef& x, const VectorRef& u) {
  require_in_domain(m, x, u);
  if (!m.has_analytic_jacobians()) return finite_difference_jacobians(m, x, u);
  Jacobians J{Matrix::Zero(m.n_x, m.n_x), Matrix::Zero(m.n_x, m.n_u), Matrix::Zero(m.n_y, m.n_x),
              Matrix::Zero(m.n_y, m.n_u)};
  m.jacobians(x, u, J);
  return J;
}

}  // namespace increlab
