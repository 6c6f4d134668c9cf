#include "increlab/dissipativity.hpp"
#include "increlab/falsify.hpp"
#include "increlab/zoo.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace increlab;
using Catch::Approx;
using nlohmann::json;

namespace {

Vector vec1(double v) { return Vector::Constant(1, v); }
Matrix mat1(double v) { return Matrix::Constant(1, 1, v); }

Signal from_fn(double step, double T, const std::function<double(double)>& fn) {
  Signal::Matrix v(static_cast<Eigen::Index>(std::llround(T / step)) + 1, 1);
  for (Eigen::Index k = 0; k < v.rows(); ++k) v(k, 0) = fn(static_cast<double>(k) * step);
  return Signal(step, v);
}

Signal exciting(std::mt19937_64& rng, double step, double T) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a = U(rng), b = U(rng), c = U(rng), w = 1.0 + 2.0 * std::abs(U(rng));
  return from_fn(step, T, [=](double t) { return a + b * std::sin(w * t) + c * std::cos(2.7 * t); });
}

double max_forward_increase(const Eigen::VectorXd& v) {
  double best = -std::numeric_limits<double>::infinity(), low = v(0);
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    best = std::max(best, v(k) - low);
    low = std::min(low, v(k));
  }
  return best;
}

double largest_eig(const Matrix& M) { return Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().maxCoeff(); }

}  // namespace

TEST_CASE("supply rates", "[dissipativity]") {
  const auto identity = zoo("static_resistor");
  const auto tr = simulate(identity, Signal::constant(1e-3, 2001, 1.0), Vector(0));
  CHECK(supply_integral(tr, SupplyRate::passivity(), 1.0) == Approx(1.0).margin(1e-9));
  CHECK(supply_integral(tr, SupplyRate::gain(1.0), 1.0) == Approx(0.0).margin(1e-9));

  std::mt19937_64 rng(1);
  const auto u = exciting(rng, 1e-3, 2.0);
  const auto pair = simulate_pair(zoo("saturated_integrator"), u, u, vec1(0.0));
  CHECK(supply_integral(pair, SupplyRate::passivity(), 2.0) == 0.0);
  CHECK(supply_integral(pair, SupplyRate::gain(3.0), 2.0) == 0.0);

  // pointwise values against the written-out forms
  const Vector uu = (Vector(2) << 1.0, -2.0).finished(), yy = (Vector(2) << 0.5, 3.0).finished();
  CHECK(SupplyRate::passivity()(uu, yy) == Approx(uu.dot(yy)));
  CHECK(SupplyRate::gain(2.0)(uu, yy) == Approx(4.0 * uu.squaredNorm() - yy.squaredNorm()));
  Matrix M = Matrix::Zero(4, 4);
  M(0, 0) = 1.0;
  M(1, 3) = M(3, 1) = 0.5;
  CHECK(SupplyRate::quadratic(M)(uu, yy) == Approx(1.0 + (-2.0) * 3.0));
}

TEST_CASE("supply rate validation and JSON", "[dissipativity]") {
  CHECK_THROWS(SupplyRate::gain(0.0));
  Matrix asym = Matrix::Zero(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS(SupplyRate::quadratic(asym));
  CHECK_THROWS(SupplyRate::from_json(json{{"kind", "passivity"}, {"gamma", 2.0}}));
  CHECK_THROWS(SupplyRate::from_json(json{{"kind", "sideways"}}));

  const auto g = SupplyRate::from_json(SupplyRate::gain(2.5).to_json());
  CHECK(std::get<GainSupply>(g.form()).gamma == 2.5);
  const auto q = SupplyRate::from_json(json{{"kind", "quadratic"}, {"M", {{1.0, 0.0}, {0.0, -1.0}}}});
  CHECK(std::get<QuadraticSupply>(q.form()).M(1, 1) == -1.0);
}

TEST_CASE("quadratic storage validation", "[dissipativity]") {
  CHECK_THROWS(QuadraticStorage(mat1(-1.0), StorageMode::state));
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS(QuadraticStorage(asym, StorageMode::state));
  const QuadraticStorage S(mat1(0.5), StorageMode::state);
  CHECK(S(vec1(2.0)) == 2.0);
}

TEST_CASE("dissipation checks on simple models", "[dissipativity]") {
  std::mt19937_64 rng(2);
  const double h = 1e-3;

  SECTION("lossless capacitor: residual constant") {
    const auto cap = zoo("linear_capacitor");
    for (int trial = 0; trial < 5; ++trial) {
      const auto rep = check_dissipation(cap, QuadraticStorage(mat1(0.5), StorageMode::state),
                                         SupplyRate::passivity(), exciting(rng, h, 10.0), vec1(0.0));
      const Eigen::Map<const Eigen::VectorXd> r(rep.residual.data(), static_cast<Eigen::Index>(rep.residual.size()));
      CHECK((r.array() - r(0)).abs().maxCoeff() <= 1e-6);
      CHECK(rep.pass);
    }
  }

  SECTION("lag: PASS with nonincreasing residual") {
    const auto lag = zoo("first_order_lag");
    const auto rep = check_dissipation(lag, QuadraticStorage(mat1(0.5), StorageMode::state), SupplyRate::passivity(),
                                       exciting(rng, h, 10.0), vec1(0.5));
    CHECK(rep.pass);
    for (std::size_t k = 1; k < rep.residual.size(); ++k) REQUIRE(rep.residual[k] <= rep.residual[k - 1] + 1e-12);
    CHECK(rep.residual.back() < rep.residual.front());
  }

  SECTION("zero supply is a Lyapunov test") {
    const auto lag = zoo("first_order_lag");
    const auto zero = SupplyRate::quadratic(Matrix::Zero(2, 2));
    const auto u = Signal::zeros(h, 5001, 1);
    const auto rep = check_dissipation(lag, QuadraticStorage(mat1(0.5), StorageMode::state), zero, u, vec1(1.0));
    CHECK(rep.pass);

    // margin equals the largest forward increase of S along the flow
    const auto cap = zoo("saturated_integrator");
    const auto v = exciting(rng, h, 5.0);
    const auto tr = simulate(cap, v, vec1(0.0));
    const Eigen::VectorXd S = tr.states.values().col(0).array().square() * 0.5;
    const auto rep2 = check_dissipation(cap, QuadraticStorage(mat1(0.5), StorageMode::state), zero, v, vec1(0.0));
    CHECK(rep2.margin == Approx(max_forward_increase(S)).epsilon(1e-12));
  }

  SECTION("a violated inequality FAILs") {
    // S = x^2/2 with gain 0.5 on the capacitor: storage grows faster than the supply allows
    const auto rep = check_dissipation(zoo("linear_capacitor"), QuadraticStorage(mat1(0.5), StorageMode::state),
                                       SupplyRate::gain(0.5), Signal::constant(h, 2001, 1.0), vec1(0.0));
    CHECK_FALSE(rep.pass);
    CHECK(rep.margin > rep.tolerance);
  }
}

TEST_CASE("residual scan", "[dissipativity]") {
  const Eigen::VectorXd S = (Eigen::VectorXd(4) << 0.0, 1.0, 0.5, 2.0).finished();
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  const auto rep = dissipation_from_samples(S, w, 0.5);
  CHECK(rep.margin == 2.0);
  CHECK(rep.worst_time == 1.5);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("incremental dissipation", "[dissipativity]") {
  std::mt19937_64 rng(3);
  const double h = 1e-3;
  const QuadraticStorage half(mat1(0.5), StorageMode::increment);

  SECTION("linear capacitor increments are lossless") {
    const auto cap = zoo("linear_capacitor");
    const auto rep = check_incremental_dissipation(cap, half, SupplyRate::passivity(), exciting(rng, h, 10.0),
                                                   exciting(rng, h, 10.0), vec1(0.0), vec1(0.0));
    CHECK(std::abs(rep.margin) <= 1e-6);
    CHECK(rep.pass);
  }

  SECTION("identical runs") {
    const auto u = exciting(rng, h, 3.0);
    const auto rep = check_incremental_dissipation(zoo("nonlinear_capacitor"), half, SupplyRate::passivity(), u, u,
                                                   vec1(0.1), vec1(0.1));
    CHECK(*std::max_element(rep.residual.begin(), rep.residual.end()) == 0.0);
    CHECK(*std::min_element(rep.residual.begin(), rep.residual.end()) == 0.0);
    CHECK(rep.pass);
  }

  SECTION("general storage reproduces the quadratic one") {
    const auto lag = zoo("first_order_lag");
    const auto u1 = exciting(rng, h, 4.0), u2 = exciting(rng, h, 4.0);
    const GeneralStorage g{[](const VectorRef& a, const VectorRef& b) { return 0.5 * (a - b).squaredNorm(); }};
    const auto q = check_incremental_dissipation(lag, half, SupplyRate::passivity(), u1, u2, vec1(1.0), vec1(-1.0));
    const auto r = check_incremental_dissipation(lag, g, SupplyRate::passivity(), u1, u2, vec1(1.0), vec1(-1.0));
    CHECK(q.margin == Approx(r.margin).epsilon(1e-12).margin(1e-15));
    CHECK(q.pass == r.pass);
  }

  SECTION("LTI increments match the plain check on the difference input") {
    for (double a : {0.5, 1.0, 3.0}) {
      const auto lag = zoo("first_order_lag", {{"a", a}});
      const auto u1 = exciting(rng, h, 5.0), u2 = exciting(rng, h, 5.0);
      const auto inc = check_incremental_dissipation(lag, half, SupplyRate::passivity(), u1, u2, vec1(0.0), vec1(0.0));
      const auto plain = check_dissipation(lag, QuadraticStorage(mat1(0.5), StorageMode::state),
                                           SupplyRate::passivity(), u1 - u2, vec1(0.0));
      INFO("a = " << a);
      CHECK(inc.margin == Approx(plain.margin).margin(1e-9));
    }
  }
}

TEST_CASE("cubic capacitor fails the incremental check for every scale", "[dissipativity]") {
  const auto m = zoo("nonlinear_capacitor");
  const auto p = default_parameterization(m);
  FalsifyOptions opts;
  opts.budget = 1500;
  const auto cert = falsify_monotonicity(m, p, opts);
  REQUIRE(cert);
  const double h = opts.step;
  const auto full = p.samples(h);
  const auto keep = static_cast<Eigen::Index>(std::floor(cert->T_eval / h + 1e-7)) + 1;
  const Signal u1(h, decode(p, cert->theta1, h).values().topRows(std::min(keep, full)));
  const Signal u2(h, decode(p, cert->theta2, h).values().topRows(std::min(keep, full)));

  for (double c : {0.0, 1e-2, 1e-1, 1.0, 10.0, 100.0}) {
    const auto rep = check_incremental_dissipation(m, QuadraticStorage(mat1(c), StorageMode::increment),
                                                   SupplyRate::passivity(), u1, u2, cert->x0, cert->x0);
    INFO("p = " << c << ", margin " << rep.margin);
    CHECK_FALSE(rep.pass);
  }
}

TEST_CASE("dissipation matrix matches the direct derivative", "[dissipativity][property]") {
  // d/dt(dx' P dx) - w(du, dy) computed directly from the linearized dynamics
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  auto random = [&](Eigen::Index r, Eigen::Index c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return g(rng); })); };
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index nx = 1 + trial % 3, nu = 1 + trial % 2, ny = nu;
    const Jacobians J{random(nx, nx), random(nx, nu), random(ny, nx), random(ny, nu)};
    const Matrix L = random(nx, nx);
    const Matrix P = L * L.transpose();
    Matrix M = random(nu + ny, nu + ny);
    M = 0.5 * (M + M.transpose()).eval();
    for (const auto& s : {SupplyRate::passivity(), SupplyRate::gain(1.7), SupplyRate::quadratic(M)}) {
      const Matrix N = dissipation_matrix(J, P, s);
      REQUIRE(N.rows() == nx + nu);
      REQUIRE((N - N.transpose()).norm() <= 1e-12);
      for (int i = 0; i < 5; ++i) {
        const Vector dx = random(nx, 1), du = random(nu, 1);
        const Vector dy = J.C * dx + J.D * du;
        const double direct = 2.0 * dx.dot(P * (J.A * dx + J.B * du)) - s(du, dy);
        Vector z(nx + nu);
        z << dx, du;
        REQUIRE(z.dot(N * z) == Approx(direct).epsilon(1e-10).margin(1e-10));
      }
    }
  }
}

TEST_CASE("pointwise differential passivity", "[dissipativity]") {
  const double h = 1e-3;
  std::mt19937_64 rng(7);

  SECTION("capacitor with P = 1/2 is lossless") {
    const auto cap = zoo("linear_capacitor");
    const auto base = simulate(cap, exciting(rng, h, 5.0), vec1(0.0));
    const auto rep = check_differential_passivity_pointwise(cap, base, mat1(0.5));
    CHECK(std::abs(rep.margin) <= 1e-12);
    CHECK(rep.pass);
    const Matrix N = dissipation_matrix(linearize_at(cap, vec1(0.3), vec1(1.0)), mat1(0.5), SupplyRate::passivity());
    CHECK(N.cwiseAbs().maxCoeff() <= 1e-12);
  }

  SECTION("lag with P = 1/2") {
    const auto lag = zoo("first_order_lag");
    const Matrix N = dissipation_matrix(linearize_at(lag, vec1(0.2), vec1(0.0)), mat1(0.5), SupplyRate::passivity());
    Matrix expected(2, 2);
    expected << -1.0, 0.0, 0.0, 0.0;
    CHECK((N - expected).cwiseAbs().maxCoeff() <= 1e-12);
    const auto base = simulate(lag, exciting(rng, h, 5.0), vec1(0.0));
    const auto rep = check_differential_passivity_pointwise(lag, base, mat1(0.5));
    CHECK(rep.pass);
    CHECK(rep.margin == Approx(0.0).margin(1e-12));
  }

  SECTION("cubic capacitor: no constant P on a base through q = 0 and q = 1") {
    const auto cap = zoo("nonlinear_capacitor");
    const auto base = simulate(cap, Signal::constant(h, 1001, 1.0), vec1(0.0));
    for (int i = 0; i <= 12; ++i) {
      const double c = std::pow(10.0, -3.0 + 0.5 * i);
      const auto rep = check_differential_passivity_pointwise(cap, base, mat1(c));
      INFO("P = " << c);
      CHECK_FALSE(rep.pass);
      // oracle: eigenvalues of [[0, P - 3q^2/2], [P - 3q^2/2, 0]] are +-|P - 3q^2/2|
      double worst = 0;
      for (Eigen::Index k = 0; k < base.states.samples(); ++k) {
        const double q = base.states(k, 0);
        worst = std::max(worst, std::abs(c - 1.5 * q * q));
      }
      CHECK(rep.margin == Approx(worst).epsilon(1e-9));
    }
    CHECK_FALSE(check_differential_passivity_pointwise(cap, base, mat1(0.0)).pass);
  }

  SECTION("pointwise margins agree with a dense eigen-solver") {
    const auto hh = zoo("hh_potassium");
    const auto base = simulate(hh, from_fn(1e-2, 5.0, [](double t) { return -50.0 + 20.0 * std::sin(t); }), vec1(0.3));
    const auto rep = check_differential_dissipation_pointwise(hh, base, mat1(2.0), SupplyRate::gain(10.0));
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < base.states.samples(); ++k) {
      const Vector x = base.states.values().row(k).transpose(), u = base.input.values().row(k).transpose();
      worst = std::max(worst, largest_eig(dissipation_matrix(linearize_at(hh, x, u), mat1(2.0), SupplyRate::gain(10.0))));
    }
    CHECK(rep.margin == Approx(worst).epsilon(1e-9));
  }
}

TEST_CASE("pointwise PASS implies incremental PASS on the lag", "[dissipativity][property]") {
  const double h = 1e-3;
  std::mt19937_64 rng(10);
  const auto lag = zoo("first_order_lag", {{"a", 0.8}});
  const auto base = simulate(lag, exciting(rng, h, 5.0), vec1(0.0));
  REQUIRE(check_differential_passivity_pointwise(lag, base, mat1(0.5)).pass);
  std::uniform_real_distribution<double> x0(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rep = check_incremental_dissipation(lag, QuadraticStorage(mat1(0.5), StorageMode::increment),
                                                   SupplyRate::passivity(), exciting(rng, h, 5.0),
                                                   exciting(rng, h, 5.0), vec1(x0(rng)), vec1(x0(rng)));
    REQUIRE(rep.margin <= 1e-6);
  }
}

TEST_CASE("pointwise verdict under rescaling of P", "[dissipativity][property]") {
  const double h = 1e-3;
  std::mt19937_64 rng(12);
  const auto zero = SupplyRate::quadratic(Matrix::Zero(2, 2));

  SECTION("homogeneous supply: margins scale with c") {
    // with a zero supply the dissipation matrix is linear in P
    for (const char* name : {"first_order_lag", "hh_potassium"}) {
      const auto m = zoo(name);
      const auto u = name == std::string("hh_potassium")
                         ? from_fn(1e-2, 5.0, [](double t) { return -40.0 + 10.0 * std::sin(t); })
                         : exciting(rng, h, 5.0);
      const auto base = simulate(m, u, m.x0_default);
      const auto ref = check_differential_dissipation_pointwise(m, base, mat1(0.7), zero);
      for (double c : {0.5, 2.0}) {
        const auto scaled = check_differential_dissipation_pointwise(m, base, mat1(0.7 * c), zero);
        INFO(name << " c = " << c);
        CHECK(scaled.pass == ref.pass);
        CHECK(scaled.margin == Approx(c * ref.margin).epsilon(1e-9).margin(1e-14));
      }
    }
  }

  SECTION("infeasibility persists") {
    const auto cap = zoo("nonlinear_capacitor");
    const auto base = simulate(cap, Signal::constant(h, 1001, 1.0), vec1(0.0));
    for (double P : {0.1, 1.0, 5.0}) {
      for (double c : {0.5, 2.0}) {
        CHECK_FALSE(check_differential_passivity_pointwise(cap, base, mat1(c * P)).pass);
      }
    }
  }

  SECTION("the passivity supply is not homogeneous in P") {
    // the lag at P = 1/2 passes exactly on the boundary; P = 1/4 leaves an
    // uncancelled cross term
    const auto lag = zoo("first_order_lag");
    const auto base = simulate(lag, exciting(rng, h, 5.0), vec1(0.0));
    CHECK(check_differential_passivity_pointwise(lag, base, mat1(0.5)).pass);
    CHECK_FALSE(check_differential_passivity_pointwise(lag, base, mat1(0.25)).pass);
  }
}

TEST_CASE("constant storage search", "[dissipativity]") {
  const double h = 1e-3;
  std::mt19937_64 rng(14);

  SECTION("lag admits a storage") {
    const auto lag = zoo("first_order_lag");
    const std::vector<Trajectory> bases{simulate(lag, exciting(rng, h, 5.0), vec1(0.0)),
                                        simulate(lag, exciting(rng, h, 5.0), vec1(1.0))};
    const auto P = search_constant_storage(lag, bases, SupplyRate::passivity());
    REQUIRE(P);
    CHECK(worst_pointwise_margin(lag, bases, *P, SupplyRate::passivity()) <= 1e-8);
    CHECK((*P)(0, 0) == Approx(0.5).margin(1e-3));
  }

  SECTION("cubic capacitor admits none") {
    const auto cap = zoo("nonlinear_capacitor");
    const std::vector<Trajectory> bases{simulate(cap, Signal::constant(h, 1001, 1.0), vec1(0.0))};
    CHECK_FALSE(search_constant_storage(cap, bases, SupplyRate::passivity()));
  }

  SECTION("stateless models") {
    const auto gain = zoo("static_resistor", {{"g", {{"kind", "linear"}, {"slope", 2.0}}}});
    const std::vector<Trajectory> bases{simulate(gain, exciting(rng, h, 2.0), Vector(0))};
    const auto P = search_constant_storage(gain, bases, SupplyRate::passivity());
    REQUIRE(P);
    CHECK(P->size() == 0);

    const auto neg = zoo("negative_resistance_passive");
    const std::vector<Trajectory> wide{simulate(neg, from_fn(h, 2.0, [](double t) { return -3.0 + 3.0 * t; }), Vector(0))};
    CHECK_FALSE(search_constant_storage(neg, wide, SupplyRate::passivity()));
  }
}
