#include "increlab/falsify.hpp"

#include "increlab/nelder_mead.hpp"
#include "increlab/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace increlab {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

const char* kind_name(InputParameterization::Kind k) {
  return k == InputParameterization::Kind::piecewise_constant ? "piecewise-constant" : "fourier-lowpass";
}

Vector center_of(const InputParameterization& p) {
  return p.center.size() == p.channels ? p.center : Vector::Zero(p.channels);
}

Vector half_range_of(const InputParameterization& p) {
  return p.half_range.size() == p.channels ? p.half_range : Vector::Ones(p.channels);
}

/// Per-sample sum over channels of a .* b.
Vector products(const Signal& a, const Signal& b) { return a.values().cwiseProduct(b.values()).rowwise().sum(); }

/// One simulated pair, with the truncated quadratic quantities read off at
/// each requested grid index.
struct PairQuantities {
  std::vector<double> cross;  // <P_T du, P_T dy>
  std::vector<double> du_sq;  // ||P_T du||^2
  std::vector<double> dy_sq;  // ||P_T dy||^2
};

std::optional<PairQuantities> evaluate_pair(const StateSpaceModel& m, const InputParameterization& p, double step,
                                            const Vector& x0, const Vector& theta1, const Vector& theta2,
                                            const std::vector<Eigen::Index>& indices, bool need_norms) {
  const Signal u1 = decode(p, theta1, step);
  const Signal u2 = decode(p, theta2, step);
  TrajectoryPair pair;
  try {
    pair = simulate_pair(m, u1, u2, x0);
  } catch (const SimulationError&) {
    return std::nullopt;
  }
  const Signal du = pair.input_difference();
  const Signal dy = pair.output_difference();
  const Vector cross = products(du, dy);
  PairQuantities q;
  for (const auto k : indices) q.cross.push_back(trapezoid(cross, k, step));
  if (need_norms) {
    const Vector uu = products(du, du);
    const Vector yy = products(dy, dy);
    for (const auto k : indices) {
      q.du_sq.push_back(trapezoid(uu, k, step));
      q.dy_sq.push_back(trapezoid(yy, k, step));
    }
  }
  return q;
}

Vector resolve_x0(const StateSpaceModel& m, const FalsifyOptions& opts) {
  Vector x0 = opts.x0 ? *opts.x0 : m.x0_default;
  if (x0.size() != m.n_x) throw std::invalid_argument("x0 has wrong dimension for model " + m.name);
  return x0;
}

void check_parameterization(const StateSpaceModel& m, const InputParameterization& p) {
  if (p.channels != m.n_u) throw std::invalid_argument("parameterization channels do not match model inputs");
  if (p.K < 1) throw std::invalid_argument("parameterization needs K >= 1");
  if (!(p.horizon > 0) || !(p.a_max > 0)) throw std::invalid_argument("parameterization needs T > 0 and a_max > 0");
}

// Joint search over z = [theta1; theta2] in [-1, 1]^(2d): uniform sampling of
// half the budget, then Nelder-Mead from the best starts. `score` maps a
// candidate to (value, horizon index), lower is better.
struct SearchOutcome {
  double value = kInf;
  std::size_t horizon = 0;
  Vector z;
  long evaluations = 0;
  long rejected = 0;
};

template <typename Score>
SearchOutcome joint_search(int d, const FalsifyOptions& opts, Score&& score) {
  if (opts.budget < 1) throw std::invalid_argument("budget must be at least 1");
  const int dim = 2 * d;
  SearchOutcome out;
  out.z = Vector::Zero(dim);

  auto evaluate = [&](const Vector& z) {
    ++out.evaluations;
    const auto [value, horizon] = score(z);
    if (value == kInf) ++out.rejected;
    if (value < out.value) {
      out.value = value;
      out.horizon = horizon;
      out.z = z;
    }
    return value;
  };

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const long random_budget = std::max<long>(1, opts.budget / 2);
  std::vector<std::pair<double, Vector>> samples;
  samples.reserve(static_cast<std::size_t>(random_budget));
  for (long i = 0; i < random_budget; ++i) {
    Vector z(dim);
    for (int j = 0; j < dim; ++j) z(j) = unit(rng);
    const double v = evaluate(z);
    samples.emplace_back(v, std::move(z));
  }

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].first < samples[b].first; });

  NelderMeadOptions<double> nm;
  nm.max_iterations = opts.nm_iterations;
  nm.initial_step = 0.2;
  nm.lower = Vector::Constant(dim, -1.0);
  nm.upper = Vector::Constant(dim, 1.0);

  const int starts = std::min<int>(opts.refine_starts, static_cast<int>(order.size()));
  for (int s = 0; s < starts; ++s) {
    const long remaining = opts.budget - out.evaluations;
    if (remaining <= 0) break;
    const auto& start = samples[order[s]];
    if (start.first == kInf) break;
    nm.max_evaluations = remaining / (starts - s);
    if (nm.max_evaluations <= 0) continue;
    nelder_mead<double>(evaluate, start.second, nm);
  }
  return out;
}

}  // namespace

int InputParameterization::dimension() const {
  return kind == Kind::piecewise_constant ? K * channels : (2 * K + 1) * channels;
}

Eigen::Index InputParameterization::samples(double step) const {
  return static_cast<Eigen::Index>(std::llround(horizon / step)) + 1;
}

json InputParameterization::to_json() const {
  return {{"kind", kind_name(kind)},
          {"K", K},
          {"horizon", horizon},
          {"a_max", a_max},
          {"channels", channels},
          {"center", vector_to_json(center_of(*this))},
          {"half_range", vector_to_json(half_range_of(*this))}};
}

InputParameterization InputParameterization::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("parameterization must be an object");
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> allowed{"kind", "K", "horizon", "a_max", "channels", "center", "half_range"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("unknown parameterization key '" + key + "'");
    }
  }
  InputParameterization p;
  const auto kind = j.value("kind", std::string("piecewise-constant"));
  if (kind == "piecewise-constant") {
    p.kind = Kind::piecewise_constant;
  } else if (kind == "fourier-lowpass") {
    p.kind = Kind::fourier_lowpass;
  } else {
    throw std::invalid_argument("unknown parameterization kind '" + kind + "'");
  }
  p.K = j.value("K", 8);
  p.horizon = j.value("horizon", 10.0);
  p.a_max = j.value("a_max", 1.0);
  p.channels = j.value("channels", 1);
  if (j.contains("center")) p.center = vector_from_json(j.at("center"));
  if (j.contains("half_range")) p.half_range = vector_from_json(j.at("half_range"));
  if (p.K < 1 || p.channels < 1 || !(p.horizon > 0) || !(p.a_max > 0)) {
    throw std::invalid_argument("parameterization needs K >= 1, channels >= 1, horizon > 0, a_max > 0");
  }
  if ((p.center.size() != 0 && p.center.size() != p.channels) ||
      (p.half_range.size() != 0 && p.half_range.size() != p.channels)) {
    throw std::invalid_argument("center/half_range must have one entry per channel");
  }
  return p;
}

InputParameterization default_parameterization(const StateSpaceModel& m, InputParameterization::Kind kind, int K,
                                               double horizon, double a_max) {
  InputParameterization p;
  p.kind = kind;
  p.K = K;
  p.horizon = horizon;
  p.a_max = a_max;
  p.channels = m.n_u;
  p.center = m.input_center.size() == m.n_u ? m.input_center : Vector::Zero(m.n_u);
  p.half_range = m.input_half_range.size() == m.n_u ? m.input_half_range : Vector::Ones(m.n_u);
  return p;
}

Signal decode(const InputParameterization& p, const Vector& theta, double step, Eigen::Index samples) {
  if (theta.size() != p.dimension()) throw std::invalid_argument("coefficient vector has wrong dimension");
  const Eigen::Index full = p.samples(step);
  const Eigen::Index N = samples > 0 ? std::min(samples, full) : full;
  const Vector center = center_of(p), half = half_range_of(p);
  const Eigen::Index last = full - 1;

  Signal::Matrix values(N, p.channels);
  for (int c = 0; c < p.channels; ++c) {
    values(0, c) = center(c);
    if (p.kind == InputParameterization::Kind::piecewise_constant) {
      for (Eigen::Index k = 1; k < N; ++k) {
        const Eigen::Index seg = std::min<Eigen::Index>(p.K - 1, (k * p.K) / std::max<Eigen::Index>(1, last));
        values(k, c) = center(c) + half(c) * p.a_max * theta(c * p.K + seg);
      }
    } else {
      const int stride = 2 * p.K + 1;
      const double scale = p.a_max / stride;
      const double w = 2.0 * std::numbers::pi / p.horizon;
      for (Eigen::Index k = 1; k < N; ++k) {
        const double t = static_cast<double>(k) * step;
        double r = theta(c * stride);
        for (int j = 1; j <= p.K; ++j) {
          r += theta(c * stride + 2 * j - 1) * std::cos(w * j * t) + theta(c * stride + 2 * j) * std::sin(w * j * t);
        }
        values(k, c) = center(c) + half(c) * scale * r;
      }
    }
  }
  return Signal(step, std::move(values));
}

double monotonicity_objective(const StateSpaceModel& m, const Vector& theta1, const Vector& theta2,
                              const InputParameterization& p, double T_eval, const VectorRef& x0, double step) {
  if (T_eval < 0) throw std::invalid_argument("T_eval must be nonnegative");
  const Eigen::Index full = p.samples(step);
  const Eigen::Index last = std::min<Eigen::Index>(full - 1, static_cast<Eigen::Index>(std::floor(T_eval / step + 1e-7)));
  const Signal u1 = decode(p, theta1, step, last + 1);
  const Signal u2 = decode(p, theta2, step, last + 1);
  TrajectoryPair pair;
  try {
    pair = simulate_pair(m, u1, u2, x0);
  } catch (const SimulationError&) {
    return kInf;
  }
  return trapezoid(products(pair.input_difference(), pair.output_difference()), last, step);
}

json ViolationCertificate::to_json() const {
  return {{"model_name", model_name},
          {"params", model_params},
          {"parameterization", parameterization.to_json()},
          {"theta1", vector_to_json(theta1)},
          {"theta2", vector_to_json(theta2)},
          {"x0", vector_to_json(x0)},
          {"T_eval", T_eval},
          {"value", value},
          {"tolerance", tolerance},
          {"seed", seed},
          {"budget", budget},
          {"grid", grid.to_json()}};
}

ViolationCertificate ViolationCertificate::from_json(const json& j) {
  ViolationCertificate c;
  c.model_name = j.at("model_name").get<std::string>();
  c.model_params = j.value("params", json::object());
  c.parameterization = InputParameterization::from_json(j.at("parameterization"));
  c.theta1 = vector_from_json(j.at("theta1"));
  c.theta2 = vector_from_json(j.at("theta2"));
  c.x0 = vector_from_json(j.at("x0"));
  c.T_eval = j.at("T_eval").get<double>();
  c.value = j.at("value").get<double>();
  c.tolerance = j.value("tolerance", violation_tolerance(c.parameterization));
  c.seed = j.value("seed", std::uint64_t{0});
  c.budget = j.value("budget", 0L);
  const auto& g = j.at("grid");
  c.grid = {g.at("step").get<double>(), g.at("horizon").get<double>()};
  return c;
}

json FalsifyResult::summary() const {
  json s = {{"found", certificate.has_value()}, {"best_value", best_value},   {"best_T_eval", best_T_eval},
            {"tolerance", tolerance},            {"evaluations", evaluations}, {"rejected", rejected},
            {"note", "no violation found within the budget; this is not a proof of monotonicity"}};
  if (certificate) s.erase("note");
  if (!std::isfinite(best_value)) s["best_value"] = nullptr;
  return s;
}

double violation_tolerance(const InputParameterization& p) { return 1e-6 * (1.0 + p.a_max * p.a_max * p.horizon); }

std::vector<double> evaluation_horizons(double T, int count) {
  if (count < 1) throw std::invalid_argument("need at least one evaluation horizon");
  std::vector<double> out;
  for (int j = 0; j < count; ++j) {
    const double e = count == 1 ? 0.0 : static_cast<double>(j - (count - 1)) / (count - 1);
    out.push_back(T * std::pow(16.0, e));
  }
  return out;
}

FalsifyResult run_falsifier(const StateSpaceModel& m, const InputParameterization& p, const FalsifyOptions& opts) {
  check_parameterization(m, p);
  const Vector x0 = resolve_x0(m, opts);
  const auto horizons = evaluation_horizons(p.horizon, opts.horizons);
  const Eigen::Index last = p.samples(opts.step) - 1;
  std::vector<Eigen::Index> indices;
  for (const double T : horizons) {
    indices.push_back(std::min<Eigen::Index>(last, static_cast<Eigen::Index>(std::floor(T / opts.step + 1e-7))));
  }
  const int d = p.dimension();

  auto score = [&](const Vector& z) -> std::pair<double, std::size_t> {
    const auto q = evaluate_pair(m, p, opts.step, x0, z.head(d), z.tail(d), indices, false);
    if (!q) return {kInf, 0};
    const auto it = std::min_element(q->cross.begin(), q->cross.end());
    return {*it, static_cast<std::size_t>(it - q->cross.begin())};
  };
  const auto found = joint_search(d, opts, score);

  FalsifyResult res;
  res.best_value = found.value;
  res.best_T_eval = static_cast<double>(indices[found.horizon]) * opts.step;
  res.tolerance = violation_tolerance(p);
  res.evaluations = found.evaluations;
  res.rejected = found.rejected;
  if (found.value < -res.tolerance) {
    ViolationCertificate cert;
    cert.model_name = m.name;
    cert.model_params = m.params;
    cert.parameterization = p;
    cert.parameterization.center = center_of(p);
    cert.parameterization.half_range = half_range_of(p);
    cert.theta1 = found.z.head(d);
    cert.theta2 = found.z.tail(d);
    cert.x0 = x0;
    cert.T_eval = res.best_T_eval;
    cert.value = found.value;
    cert.tolerance = res.tolerance;
    cert.seed = opts.seed;
    cert.budget = opts.budget;
    cert.grid = {opts.step, p.horizon};
    // Only keep witnesses that survive an independent re-simulation.
    if (replay(cert).valid) res.certificate = std::move(cert);
  }
  return res;
}

std::optional<ViolationCertificate> falsify_monotonicity(const StateSpaceModel& m, const InputParameterization& p,
                                                         const FalsifyOptions& opts) {
  return run_falsifier(m, p, opts).certificate;
}

GainBound incremental_gain_search(const StateSpaceModel& m, const InputParameterization& p,
                                  const FalsifyOptions& opts) {
  check_parameterization(m, p);
  const Vector x0 = resolve_x0(m, opts);
  const auto horizons = evaluation_horizons(p.horizon, opts.horizons);
  const Eigen::Index last = p.samples(opts.step) - 1;
  std::vector<Eigen::Index> indices;
  for (const double T : horizons) {
    indices.push_back(std::min<Eigen::Index>(last, static_cast<Eigen::Index>(std::floor(T / opts.step + 1e-7))));
  }
  const int d = p.dimension();

  auto score = [&](const Vector& z) -> std::pair<double, std::size_t> {
    const auto q = evaluate_pair(m, p, opts.step, x0, z.head(d), z.tail(d), indices, true);
    if (!q) return {kInf, 0};
    double best = kInf;
    std::size_t at = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (q->du_sq[i] < 1e-12) continue;  // ||P_T du|| >= 1e-6
      const double neg_ratio = -std::sqrt(q->dy_sq[i] / q->du_sq[i]);
      if (neg_ratio < best) {
        best = neg_ratio;
        at = i;
      }
    }
    return {best, at};
  };
  const auto found = joint_search(d, opts, score);

  GainBound g;
  g.evaluations = found.evaluations;
  if (found.value < kInf) {
    g.ratio = -found.value;
    g.T_eval = static_cast<double>(indices[found.horizon]) * opts.step;
    g.theta1 = found.z.head(d);
    g.theta2 = found.z.tail(d);
  }
  return g;
}

double incremental_gain_lb(const StateSpaceModel& m, const InputParameterization& p, const FalsifyOptions& opts) {
  return incremental_gain_search(m, p, opts).ratio;
}

ReplayResult replay(const ViolationCertificate& cert) {
  ReplayResult r;
  StateSpaceModel m;
  try {
    m = zoo(cert.model_name, cert.model_params);
  } catch (const ModelError& e) {
    r.reason = std::string("cannot rebuild model: ") + e.what();
    return r;
  }
  try {
    r.recomputed = monotonicity_objective(m, cert.theta1, cert.theta2, cert.parameterization, cert.T_eval, cert.x0,
                                          cert.grid.step);
  } catch (const std::exception& e) {
    r.reason = std::string("replay failed: ") + e.what();
    return r;
  }
  if (!std::isfinite(r.recomputed)) {
    r.reason = "replay left the model domain";
    return r;
  }
  if (std::abs(r.recomputed - cert.value) > 1e-9 * std::abs(cert.value)) {
    r.reason = "recomputed value does not match the certificate";
    return r;
  }
  if (!(cert.value < -violation_tolerance(cert.parameterization))) {
    r.reason = "certificate value is not below the violation tolerance";
    return r;
  }
  r.valid = true;
  return r;
}

TrajectoryPair certificate_pair(const ViolationCertificate& cert) {
  const StateSpaceModel m = zoo(cert.model_name, cert.model_params);
  const Signal u1 = decode(cert.parameterization, cert.theta1, cert.grid.step);
  const Signal u2 = decode(cert.parameterization, cert.theta2, cert.grid.step);
  return simulate_pair(m, u1, u2, cert.x0);
}

std::pair<Signal, Signal> scatter(const TrajectoryPair& pair) {
  const Signal du = pair.input_difference();
  const Signal dy = pair.output_difference();
  require_aligned(du, dy, "input and output increments");
  const double s = 1.0 / std::numbers::sqrt2;
  return {Signal(du.step(), s * (du.values() + dy.values())), Signal(du.step(), s * (du.values() - dy.values()))};
}

}  // namespace increlab
