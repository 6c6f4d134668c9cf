#include "increlab/sim.hpp"
#include "increlab/zoo.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace increlab;
using Catch::Approx;

namespace {

Vector vec1(double v) { return Vector::Constant(1, v); }

Eigen::Index count(double step, double T) { return static_cast<Eigen::Index>(std::llround(T / step)) + 1; }

Signal from_fn(double step, double T, const std::function<double(double)>& fn) {
  Signal::Matrix v(count(step, T), 1);
  for (Eigen::Index k = 0; k < v.rows(); ++k) v(k, 0) = fn(static_cast<double>(k) * step);
  return Signal(step, v);
}

Signal random_input(std::mt19937_64& rng, double step, double T, double scale) {
  std::uniform_real_distribution<double> U(-scale, scale);
  // smooth-ish: random Fourier sum
  const double a1 = U(rng), a2 = U(rng), a3 = U(rng), p = U(rng);
  return from_fn(step, T, [=](double t) { return a1 * std::sin(t + p) + a2 * std::cos(2.3 * t) + a3 * std::sin(5.1 * t); });
}

}  // namespace

TEST_CASE("constant input on the linear capacitor", "[sim]") {
  const auto m = zoo("linear_capacitor", {{"C", 1.0}});
  const auto tr = simulate(m, Signal::constant(1e-3, 1001, 1.0), vec1(0.0));
  CHECK(tr.states(1000, 0) == Approx(1.0).margin(1e-9));
  CHECK(tr.outputs(1000, 0) == Approx(1.0).margin(1e-9));
  CHECK(tr.model_name == "linear_capacitor");
}

TEST_CASE("first-order lag step response", "[sim]") {
  const auto tr = simulate(zoo("first_order_lag", {{"a", 1.0}}), Signal::constant(1e-3, 1001, 1.0), vec1(0.0));
  CHECK(tr.states(1000, 0) == Approx(1.0 - std::exp(-1.0)).margin(1e-8));
}

TEST_CASE("equilibria are preserved", "[sim]") {
  auto constant = [](const Trajectory& tr) {
    return (tr.states.values().rowwise() - tr.states.values().row(0)).cwiseAbs().maxCoeff();
  };
  CHECK(constant(simulate(zoo("first_order_lag"), Signal::zeros(1e-2, 501, 1), vec1(0.0))) == 0.0);
  CHECK(constant(simulate(zoo("nonlinear_capacitor"), Signal::zeros(1e-2, 501, 1), vec1(1.5))) == 0.0);

  const double V = -40.0;
  const double n_inf = hh::alpha_n(V) / (hh::alpha_n(V) + hh::beta_n(V));
  const auto hh_tr = simulate(zoo("hh_potassium"), Signal::constant(1e-2, 501, V), vec1(n_inf));
  CHECK(constant(hh_tr) <= 1e-14);
}

TEST_CASE("pair simulation", "[sim]") {
  std::mt19937_64 rng(4);
  const double h = 1e-3;

  SECTION("identical inputs give zero increment") {
    const auto m = zoo("saturated_integrator");
    const auto u = random_input(rng, h, 2.0, 1.0);
    const auto pair = simulate_pair(m, u, u, vec1(0.2));
    CHECK(pair.output_difference().values().isZero(0));
  }

  SECTION("cubic capacitor increment at t = 1") {
    const auto pair = simulate_pair(zoo("nonlinear_capacitor"), Signal::constant(h, 1001, 1.0),
                                    Signal::zeros(h, 1001, 1), vec1(0.0));
    CHECK(pair.output_difference()(1000, 0) == Approx(1.0).margin(1e-8));
  }

  SECTION("linear increments depend only on the input increment") {
    const auto m = zoo("first_order_lag", {{"a", 0.7}});
    const auto u1 = random_input(rng, h, 3.0, 1.0), u2 = random_input(rng, h, 3.0, 1.0);
    const auto shift = random_input(rng, h, 3.0, 5.0);
    const auto a = simulate_pair(m, u1, u2, vec1(0.3)).output_difference();
    const auto b = simulate_pair(m, u1 + shift, u2 + shift, vec1(0.3)).output_difference();
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SECTION("distinct initial states") {
    const auto pair = simulate_pair(zoo("first_order_lag"), Signal::zeros(h, 1001, 1), Signal::zeros(h, 1001, 1),
                                    vec1(1.0), vec1(0.0));
    CHECK(pair.state_difference()(1000, 0) == Approx(std::exp(-1.0)).epsilon(1e-10));
  }
}

TEST_CASE("domain exits are errors carrying the first offending time", "[sim]") {
  const auto cap = zoo("nonlinear_capacitor");
  // x' = 1 from x = 2.5 crosses x = 3 just after t = 0.5; the input box is [-2, 2]
  try {
    simulate(cap, Signal::constant(1e-2, 101, 1.0), vec1(2.5));
    FAIL("expected a domain exit");
  } catch (const DomainExitError& e) {
    CHECK(e.time() >= 0.5 - 1e-9);
    CHECK(e.time() <= 0.51 + 1e-9);
  }
  CHECK_THROWS_AS(simulate(cap, Signal::constant(1e-2, 101, 2.5), vec1(0.0)), DomainExitError);

  const auto hh = zoo("hh_potassium");
  Signal::Matrix v = Signal::Matrix::Constant(101, 1, -60.0);
  v.bottomRows(40).setConstant(-80.0);
  try {
    simulate(hh, Signal(1e-2, v), vec1(0.3));
    FAIL("expected a domain exit");
  } catch (const DomainExitError& e) {
    CHECK(e.time() == Approx(0.61).margin(1e-9));
  }
}

TEST_CASE("causality", "[sim][property]") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> cut(0.1, 1.9);
  const double h = 1e-3;
  for (const char* name : {"first_order_lag", "saturated_integrator", "chua_memristor", "nonlinear_capacitor"}) {
    const auto m = zoo(name);
    for (int trial = 0; trial < 10; ++trial) {
      const auto u1 = random_input(rng, h, 2.0, 0.6);
      const auto tail = random_input(rng, h, 2.0, 0.6);
      const double T = cut(rng);
      const auto k = u1.grid_index(T);
      Signal::Matrix v = u1.values();
      v.bottomRows(v.rows() - k) = tail.values().bottomRows(v.rows() - k);
      const auto a = simulate(m, u1, vec1(0.1)), b = simulate(m, Signal(h, v), vec1(0.1));
      INFO(name << " T = " << T);
      REQUIRE((a.outputs.values().topRows(k) - b.outputs.values().topRows(k)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("RK4 is fourth order on smooth models", "[sim][property]") {
  // inputs linear in time are reproduced exactly by the first-order hold, so
  // the only error left is the integrator's own
  struct Case {
    StateSpaceModel model;
    std::function<double(double)> input;
    double x0;
  };
  std::vector<Case> cases = {
      {zoo("first_order_lag", {{"a", 2.0}}), [](double t) { return 1.0 + 0.5 * t; }, 0.3},
      {zoo("hh_potassium"), [](double) { return -20.0; }, 0.1},
      {zoo("hh_potassium", {{"kinetics", "standard"}, {"g_K", 10.0}}), [](double t) { return -70.0 + 10.0 * t; }, 0.6},
  };
  const double T = 2.0;
  for (const auto& c : cases) {
    const double ref = simulate(c.model, from_fn(1e-5, T, c.input), vec1(c.x0)).states.values().bottomRows<1>()(0, 0);
    const double e1 = std::abs(simulate(c.model, from_fn(0.1, T, c.input), vec1(c.x0)).states.values().bottomRows<1>()(0, 0) - ref);
    const double e2 = std::abs(simulate(c.model, from_fn(0.05, T, c.input), vec1(c.x0)).states.values().bottomRows<1>()(0, 0) - ref);
    INFO(c.model.name << ": e(0.1) = " << e1 << ", e(0.05) = " << e2);
    CHECK(e1 / e2 >= 12.0);
  }
}

TEST_CASE("variational simulation", "[sim]") {
  const double h = 1e-3;
  std::mt19937_64 rng(17);

  SECTION("linear model: variational system is the model itself") {
    const auto m = zoo("first_order_lag", {{"a", 1.3}});
    const auto base = simulate(m, random_input(rng, h, 2.0, 1.0), vec1(0.4));
    const auto du = random_input(rng, h, 2.0, 1.0);
    const auto var = simulate_variational(m, base, du, vec1(-0.2));
    const auto direct = simulate(m, du, vec1(-0.2));
    CHECK((var.outputs.values() - direct.outputs.values()).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SECTION("zero perturbation") {
    const auto m = zoo("hh_potassium");
    const auto base = simulate(m, Signal::constant(h, 1001, -30.0), vec1(0.3));
    const auto var = simulate_variational(m, base, Signal::zeros(h, 1001, 1), vec1(0.0));
    CHECK(var.outputs.values().isZero(0));
  }

  SECTION("cubic capacitor: finite differences converge linearly") {
    const auto m = zoo("nonlinear_capacitor");
    const auto u = from_fn(h, 1.0, [](double t) { return 0.5 + 0.5 * std::sin(3.0 * t); });
    const auto du = from_fn(h, 1.0, [](double t) { return std::cos(2.0 * t); });
    const auto base = simulate(m, u, vec1(0.2));
    const auto dy = simulate_variational(m, base, du, vec1(0.0)).outputs;
    auto error = [&](double eps) {
      const auto pert = simulate(m, u + eps * du, vec1(0.2));
      const Signal::Matrix quotient = (pert.outputs.values() - base.outputs.values()) / eps;
      return (quotient - dy.values()).cwiseAbs().maxCoeff();
    };
    const double e3 = error(1e-3), e4 = error(1e-4);
    INFO("errors " << e3 << " " << e4);
    CHECK(e3 <= 10.0 * 1e-3);
    CHECK(e3 / e4 == Approx(10.0).epsilon(0.2));
  }

  SECTION("HH: finite differences converge linearly") {
    const auto m = zoo("hh_potassium");
    const double hs = 1e-2;
    const auto u = from_fn(hs, 10.0, [](double t) { return -40.0 + 30.0 * std::sin(0.7 * t); });
    const auto du = from_fn(hs, 10.0, [](double t) { return 5.0 * std::cos(1.3 * t); });
    const auto base = simulate(m, u, vec1(0.3));
    const auto dy = simulate_variational(m, base, du, vec1(0.0)).outputs;
    auto error = [&](double eps) {
      const auto pert = simulate(m, u + eps * du, vec1(0.3));
      return ((pert.outputs.values() - base.outputs.values()) / eps - dy.values()).cwiseAbs().maxCoeff();
    };
    const double e3 = error(1e-3), e4 = error(1e-4);
    INFO("errors " << e3 << " " << e4);
    CHECK(e3 / e4 == Approx(10.0).epsilon(0.2));
  }
}

TEST_CASE("trajectory csv layout", "[sim][io]") {
  const auto tr = simulate(zoo("first_order_lag"), Signal::constant(0.1, 3, 1.0), vec1(0.0));
  std::ostringstream os;
  write_trajectory_csv(os, tr, {"hello"});
  const auto text = os.str();
  CHECK(text.rfind("# hello\nt,u0,x0,y0\n0,1,0,0\n", 0) == 0);

  const auto stateless = simulate(zoo("static_resistor"), Signal::constant(0.1, 2, 2.0), Vector(0));
  std::ostringstream os2;
  write_trajectory_csv(os2, stateless);
  CHECK(os2.str() == "t,u0,y0\n0,2,2\n0.1,2,2\n");
}
