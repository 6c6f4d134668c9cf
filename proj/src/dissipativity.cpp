#include "increlab/dissipativity.hpp"

#include "increlab/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace increlab {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array()) throw std::invalid_argument("matrix must be a number or an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("matrix rows must be arrays of equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row.at(c).get<double>();
  }
  return M;
}

double spectral_norm(const Matrix& P) {
  if (P.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double max_eigenvalue(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  if (M.rows() == 1) return M(0, 0);
  if (M.rows() == 2) {
    const double mean = 0.5 * (M(0, 0) + M(1, 1));
    const double half_diff = 0.5 * (M(0, 0) - M(1, 1));
    return mean + std::hypot(half_diff, M(0, 1));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

void require_symmetric(const Matrix& M, const char* what) {
  if (M.rows() != M.cols()) throw std::invalid_argument(std::string(what) + " must be square");
  if (M.size() > 0 && (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument(std::string(what) + " must be symmetric");
  }
}

const char* mode_name(StorageMode m) {
  switch (m) {
    case StorageMode::state: return "state";
    case StorageMode::increment: return "increment";
    case StorageMode::differential: return "differential";
  }
  return "state";
}

Vector row(const Signal& s, Eigen::Index k) { return s.values().row(k).transpose(); }

}  // namespace

SupplyRate SupplyRate::gain(double gamma) {
  if (!(gamma > 0) || !std::isfinite(gamma)) throw std::invalid_argument("gain supply requires gamma > 0");
  return SupplyRate(GainSupply{gamma});
}

SupplyRate SupplyRate::quadratic(Matrix M) {
  require_symmetric(M, "supply matrix");
  return SupplyRate(QuadraticSupply{std::move(M)});
}

double SupplyRate::operator()(const VectorRef& u, const VectorRef& y) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PassivitySupply>) {
          if (u.size() != y.size()) throw std::invalid_argument("passivity supply needs n_u == n_y");
          return u.dot(y);
        } else if constexpr (std::is_same_v<T, GainSupply>) {
          return f.gamma * f.gamma * u.squaredNorm() - y.squaredNorm();
        } else {
          if (f.M.rows() != u.size() + y.size()) throw std::invalid_argument("supply matrix has wrong size");
          Vector z(u.size() + y.size());
          z << u, y;
          return z.dot(f.M * z);
        }
      },
      form_);
}

Matrix SupplyRate::weight(Eigen::Index n_u, Eigen::Index n_y) const {
  return std::visit(
      [&](const auto& f) -> Matrix {
        using T = std::decay_t<decltype(f)>;
        Matrix W = Matrix::Zero(n_u + n_y, n_u + n_y);
        if constexpr (std::is_same_v<T, PassivitySupply>) {
          if (n_u != n_y) throw std::invalid_argument("passivity supply needs n_u == n_y");
          W.topRightCorner(n_u, n_y).setIdentity();
          W.bottomLeftCorner(n_y, n_u).setIdentity();
          W *= 0.5;
        } else if constexpr (std::is_same_v<T, GainSupply>) {
          W.topLeftCorner(n_u, n_u).diagonal().setConstant(f.gamma * f.gamma);
          W.bottomRightCorner(n_y, n_y).diagonal().setConstant(-1.0);
        } else {
          if (f.M.rows() != n_u + n_y) throw std::invalid_argument("supply matrix has wrong size");
          W = f.M;
        }
        return W;
      },
      form_);
}

json SupplyRate::to_json() const {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PassivitySupply>) {
          return {{"kind", "passivity"}};
        } else if constexpr (std::is_same_v<T, GainSupply>) {
          return {{"kind", "gain"}, {"gamma", f.gamma}};
        } else {
          return {{"kind", "quadratic"}, {"M", matrix_to_json(f.M)}};
        }
      },
      form_);
}

SupplyRate SupplyRate::from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw std::invalid_argument("supply must be an object with a 'kind' string");
  }
  const auto kind = j.at("kind").get<std::string>();
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, _] : j.items()) {
      if (key != "kind" && std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        throw std::invalid_argument("unknown supply key '" + key + "'");
      }
    }
  };
  if (kind == "passivity") {
    only({});
    return passivity();
  }
  if (kind == "gain") {
    only({"gamma"});
    return gain(j.value("gamma", 1.0));
  }
  if (kind == "quadratic") {
    only({"M"});
    if (!j.contains("M")) throw std::invalid_argument("quadratic supply needs 'M'");
    return quadratic(matrix_from_json(j.at("M")));
  }
  throw std::invalid_argument("unknown supply kind '" + kind + "'");
}

QuadraticStorage::QuadraticStorage(Matrix P, StorageMode mode) : P_(std::move(P)), mode_(mode) {
  require_symmetric(P_, "storage matrix P");
  if (P_.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(P_, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-10 * norm) {
      throw std::invalid_argument("storage matrix P must be positive semidefinite");
    }
  }
}

json QuadraticStorage::to_json() const { return {{"kind", "quadratic"}, {"P", matrix_to_json(P_)}, {"mode", mode_name(mode_)}}; }

json DissipationReport::to_json() const {
  return {{"pass", pass},       {"margin", margin}, {"worst_time", worst_time}, {"tolerance", tolerance},
          {"storage", storage}, {"supply", supply}, {"model", model},           {"grid", grid.to_json()}};
}

json MarginReport::to_json() const {
  return {{"pass", pass},       {"margin", margin}, {"worst_time", worst_time}, {"tolerance", tolerance},
          {"storage", storage}, {"supply", supply}, {"model", model},           {"grid", grid.to_json()}};
}

double supply_integral(const Trajectory& tr, const SupplyRate& s, double T) {
  if (tr.input.samples() != tr.outputs.samples() || tr.input.step() != tr.outputs.step()) {
    throw AlignmentError("trajectory input and output are not on the same grid");
  }
  const auto N = tr.input.samples();
  Vector w(N);
  for (Eigen::Index k = 0; k < N; ++k) w(k) = s(row(tr.input, k), row(tr.outputs, k));
  return trapezoid(w, std::min(tr.input.grid_index(T), N - 1), tr.input.step());
}

double supply_integral(const TrajectoryPair& pair, const SupplyRate& s, double T) {
  const Signal du = pair.input_difference();
  const Signal dy = pair.output_difference();
  if (du.samples() != dy.samples() || du.step() != dy.step()) throw AlignmentError("pair is not aligned");
  const auto N = du.samples();
  Vector w(N);
  for (Eigen::Index k = 0; k < N; ++k) w(k) = s(row(du, k), row(dy, k));
  return trapezoid(w, std::min(du.grid_index(T), N - 1), du.step());
}

DissipationReport dissipation_from_samples(const Eigen::VectorXd& storage_values, const Eigen::VectorXd& supply_values,
                                           double step) {
  if (storage_values.size() != supply_values.size()) throw AlignmentError("storage and supply sample counts differ");
  DissipationReport rep;
  const Vector supplied = cumulative_trapezoid(supply_values, step);
  const Vector r = storage_values - supplied;
  rep.residual.assign(r.data(), r.data() + r.size());
  rep.max_abs_residual = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;

  rep.margin = r.size() > 1 ? -std::numeric_limits<double>::infinity() : 0.0;
  double running_min = r.size() > 0 ? r(0) : 0.0;
  for (Eigen::Index b = 1; b < r.size(); ++b) {
    const double increase = r(b) - running_min;
    if (increase > rep.margin) {
      rep.margin = increase;
      rep.worst_time = static_cast<double>(b) * step;
    }
    running_min = std::min(running_min, r(b));
  }
  rep.tolerance = 1e-6 * (1.0 + rep.max_abs_residual);
  rep.pass = rep.margin <= rep.tolerance;
  return rep;
}

DissipationReport check_dissipation(const StateSpaceModel& m, const QuadraticStorage& storage, const SupplyRate& s,
                                    const Signal& u, const VectorRef& x0) {
  if (storage.mode() != StorageMode::state) throw std::invalid_argument("check_dissipation needs a state-mode storage");
  if (storage.P().rows() != m.n_x) throw std::invalid_argument("storage size does not match the state dimension");
  const Trajectory tr = simulate(m, u, x0);
  const auto N = u.samples();
  Vector S(N), w(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    S(k) = storage(row(tr.states, k));
    w(k) = s(row(tr.input, k), row(tr.outputs, k));
  }
  DissipationReport rep = dissipation_from_samples(S, w, u.step());
  rep.storage = storage.to_json();
  rep.supply = s.to_json();
  rep.model = m.name;
  rep.grid = {u.step(), u.horizon()};
  return rep;
}

namespace {

template <typename StorageFn>
DissipationReport incremental_report(const StateSpaceModel& m, StorageFn&& S_of, const SupplyRate& s,
                                     const Signal& u1, const Signal& u2, const VectorRef& x0_1,
                                     const VectorRef& x0_2) {
  const TrajectoryPair pair = simulate_pair(m, u1, u2, x0_1, x0_2);
  const auto N = u1.samples();
  const Signal du = pair.input_difference();
  const Signal dy = pair.output_difference();
  Vector S(N), w(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    S(k) = S_of(row(pair.first.states, k), row(pair.second.states, k));
    w(k) = s(row(du, k), row(dy, k));
  }
  DissipationReport rep = dissipation_from_samples(S, w, u1.step());
  rep.supply = s.to_json();
  rep.model = m.name;
  rep.grid = {u1.step(), u1.horizon()};
  return rep;
}

}  // namespace

DissipationReport check_incremental_dissipation(const StateSpaceModel& m, const QuadraticStorage& storage,
                                                const SupplyRate& s, const Signal& u1, const Signal& u2,
                                                const VectorRef& x0_1, const VectorRef& x0_2) {
  if (storage.mode() != StorageMode::increment) {
    throw std::invalid_argument("incremental check needs an increment-mode storage");
  }
  if (storage.P().rows() != m.n_x) throw std::invalid_argument("storage size does not match the state dimension");
  auto rep = incremental_report(
      m, [&](const Vector& a, const Vector& b) { return storage(a - b); }, s, u1, u2, x0_1, x0_2);
  rep.storage = storage.to_json();
  return rep;
}

DissipationReport check_incremental_dissipation(const StateSpaceModel& m, const GeneralStorage& storage,
                                                const SupplyRate& s, const Signal& u1, const Signal& u2,
                                                const VectorRef& x0_1, const VectorRef& x0_2) {
  if (!storage.evaluate) throw std::invalid_argument("general storage has no evaluator");
  auto rep = incremental_report(
      m, [&](const Vector& a, const Vector& b) { return storage.evaluate(a, b); }, s, u1, u2, x0_1, x0_2);
  rep.storage = {{"kind", "general"}, {"description", storage.description}};
  return rep;
}

Matrix dissipation_matrix(const Jacobians& J, const Matrix& P, const SupplyRate& s) {
  const auto nx = J.A.rows(), nu = J.B.cols(), ny = J.C.rows();
  Matrix N = Matrix::Zero(nx + nu, nx + nu);
  N.topLeftCorner(nx, nx) = J.A.transpose() * P + P * J.A;
  N.topRightCorner(nx, nu) = P * J.B;
  N.bottomLeftCorner(nu, nx) = J.B.transpose() * P;

  // [du; dy] = T z with T = [[0, I], [C, D]].
  Matrix T = Matrix::Zero(nu + ny, nx + nu);
  T.topRightCorner(nu, nu).setIdentity();
  T.bottomLeftCorner(ny, nx) = J.C;
  T.bottomRightCorner(ny, nu) = J.D;
  N -= T.transpose() * s.weight(nu, ny) * T;
  return 0.5 * (N + N.transpose());
}

MarginReport check_differential_dissipation_pointwise(const StateSpaceModel& m, const Trajectory& base,
                                                      const Matrix& P, const SupplyRate& s) {
  const QuadraticStorage storage(P, StorageMode::differential);
  if (P.rows() != m.n_x) throw std::invalid_argument("P size does not match the state dimension");
  MarginReport rep;
  rep.margin = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < base.states.samples(); ++k) {
    const Jacobians J = linearize_at(m, row(base.states, k), row(base.input, k));
    const double lambda = max_eigenvalue(dissipation_matrix(J, P, s));
    if (lambda > rep.margin) {
      rep.margin = lambda;
      rep.worst_time = base.states.time(k);
    }
  }
  rep.tolerance = 1e-8 * (1.0 + spectral_norm(P));
  rep.pass = rep.margin <= rep.tolerance;
  rep.storage = storage.to_json();
  rep.supply = s.to_json();
  rep.model = m.name;
  rep.grid = {base.input.step(), base.input.horizon()};
  return rep;
}

MarginReport check_differential_passivity_pointwise(const StateSpaceModel& m, const Trajectory& base,
                                                    const Matrix& P) {
  return check_differential_dissipation_pointwise(m, base, P, SupplyRate::passivity());
}

double worst_pointwise_margin(const StateSpaceModel& m, const std::vector<Trajectory>& bases, const Matrix& P,
                              const SupplyRate& s) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : bases) worst = std::max(worst, check_differential_dissipation_pointwise(m, b, P, s).margin);
  return worst;
}

std::optional<Matrix> search_constant_storage(const StateSpaceModel& m, const std::vector<Trajectory>& bases,
                                              const SupplyRate& s, const StorageSearchOptions& opts) {
  if (m.n_x > 6) throw std::invalid_argument("constant storage search supports at most 6 states");
  if (bases.empty()) throw std::invalid_argument("storage search needs at least one base trajectory");
  const int n = m.n_x;

  std::vector<Jacobians> points;
  for (const auto& b : bases) {
    const auto N = b.states.samples();
    const auto stride = std::max<Eigen::Index>(1, (N + opts.max_points_per_base - 1) / opts.max_points_per_base);
    for (Eigen::Index k = 0; k < N; k += stride) points.push_back(linearize_at(m, row(b.states, k), row(b.input, k)));
    if ((N - 1) % stride != 0) points.push_back(linearize_at(m, row(b.states, N - 1), row(b.input, N - 1)));
  }

  const int dim = n * (n + 1) / 2;
  auto to_P = [n](const Vector& theta) {
    Matrix L = Matrix::Zero(n, n);
    int idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) L(i, j) = theta(idx++);
    return Matrix(L * L.transpose());
  };
  auto sampled_margin = [&](const Vector& theta) {
    const Matrix P = to_P(theta);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& J : points) worst = std::max(worst, max_eigenvalue(dissipation_matrix(J, P, s)));
    return worst;
  };
  auto passes = [&](const Matrix& P) {
    return worst_pointwise_margin(m, bases, P, s) <= 1e-8 * (1.0 + spectral_norm(P));
  };

  if (dim == 0) {
    const Matrix P(0, 0);
    if (passes(P)) return P;
    return std::nullopt;
  }

  struct Candidate {
    double margin;
    int start;
    Matrix P;
  };
  std::vector<Candidate> candidates;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> offdiag(-1.0, 1.0), diag(0.0, 2.0);
  NelderMeadOptions<double> nm;
  nm.max_iterations = opts.max_iterations;
  nm.max_evaluations = opts.max_evaluations_per_start;
  nm.initial_step = 0.1;
  nm.f_tolerance = 1e-15;
  nm.x_tolerance = 1e-12;

  for (int start = 0; start < opts.starts; ++start) {
    Vector theta(dim);
    int idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) theta(idx++) = (i == j) ? diag(rng) : offdiag(rng);
    const auto res = nelder_mead<double>(sampled_margin, theta, nm);
    candidates.push_back({res.value, start, to_P(res.x)});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.margin < b.margin; });
  for (const auto& c : candidates) {
    if (c.margin > 1e-8 * (1.0 + spectral_norm(c.P))) break;
    if (passes(c.P)) return c.P;
  }
  return std::nullopt;
}

}  // namespace increlab
