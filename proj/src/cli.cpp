#include "increlab/cli.hpp"

#include "increlab/dissipativity.hpp"
#include "increlab/falsify.hpp"
#include "increlab/signal_io.hpp"
#include "increlab/sim.hpp"
#include "increlab/zoo.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace increlab::cli {

using nlohmann::json;

namespace {

void allow_only(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
  return obj.at(key).get<double>();
}

Vector vector_of(const json& j, Eigen::Index n, const std::string& where) {
  if (j.is_number()) return Vector::Constant(n, j.get<double>());
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw ConfigError(where + " must be a number or an array of " + std::to_string(n) + " numbers");
  }
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!j.at(i).is_number()) throw ConfigError(where + " must contain numbers");
    v(i) = j.at(i).get<double>();
  }
  return v;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Matrix matrix_of(const json& j, Eigen::Index n, const std::string& where) {
  if (j.is_number() && n == 1) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw ConfigError(where + " must be a " + std::to_string(n) + "x" + std::to_string(n) + " array of rows");
  }
  Matrix M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) M.row(i) = vector_of(j.at(i), n, where).transpose();
  return M;
}

StateSpaceModel model_of(const json& cfg) {
  try {
    return zoo(cfg.at("model").get<std::string>(), cfg.at("params"));
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

Grid grid_of(const json& cfg) { return {cfg.at("grid").at("step").get<double>(), cfg.at("grid").at("horizon").get<double>()}; }

Eigen::Index samples_of(const Grid& g) { return static_cast<Eigen::Index>(std::llround(g.horizon / g.step)) + 1; }

json resolve_input(const json& spec, const StateSpaceModel& m, const std::string& where) {
  if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string()) {
    throw ConfigError(where + " must be an object with a 'kind' string");
  }
  const auto kind = spec.at("kind").get<std::string>();
  json out = {{"kind", kind}};
  if (kind == "constant") {
    allow_only(spec, {"kind", "value"}, where);
    out["value"] = to_json(vector_of(spec.value("value", json(0.0)), m.n_u, where + ".value"));
  } else if (kind == "step") {
    allow_only(spec, {"kind", "before", "after", "time"}, where);
    out["before"] = to_json(vector_of(spec.value("before", json(0.0)), m.n_u, where + ".before"));
    out["after"] = to_json(vector_of(spec.value("after", json(1.0)), m.n_u, where + ".after"));
    out["time"] = number_or(spec, "time", 1.0, where);
  } else if (kind == "sine") {
    allow_only(spec, {"kind", "amplitude", "frequency", "phase", "offset"}, where);
    out["amplitude"] = to_json(vector_of(spec.value("amplitude", json(1.0)), m.n_u, where + ".amplitude"));
    out["offset"] = to_json(vector_of(spec.value("offset", json(0.0)), m.n_u, where + ".offset"));
    out["frequency"] = number_or(spec, "frequency", 1.0, where);
    out["phase"] = number_or(spec, "phase", 0.0, where);
  } else if (kind == "csv") {
    allow_only(spec, {"kind", "path"}, where);
    if (!spec.contains("path") || !spec.at("path").is_string()) throw ConfigError(where + ".path must be a string");
    out["path"] = spec.at("path");
  } else {
    throw ConfigError("unknown input kind '" + kind + "' in " + where);
  }
  return out;
}

Signal build_input(const json& spec, const Grid& g, int n_u) {
  const auto N = samples_of(g);
  const auto kind = spec.at("kind").get<std::string>();
  Signal::Matrix v(N, n_u);
  auto vec = [&](const char* key) { return vector_of(spec.at(key), n_u, key); };
  if (kind == "constant") {
    const Vector c = vec("value");
    for (Eigen::Index k = 0; k < N; ++k) v.row(k) = c.transpose();
  } else if (kind == "step") {
    const Vector before = vec("before"), after = vec("after");
    const double t0 = spec.at("time").get<double>();
    for (Eigen::Index k = 0; k < N; ++k) v.row(k) = (static_cast<double>(k) * g.step < t0 ? before : after).transpose();
  } else if (kind == "sine") {
    const Vector amp = vec("amplitude"), off = vec("offset");
    const double w = 2.0 * std::numbers::pi * spec.at("frequency").get<double>();
    const double phase = spec.at("phase").get<double>();
    for (Eigen::Index k = 0; k < N; ++k) {
      v.row(k) = (off + amp * std::sin(w * static_cast<double>(k) * g.step + phase)).transpose();
    }
  } else {
    std::ifstream in(spec.at("path").get<std::string>());
    if (!in) throw ConfigError("cannot open input CSV " + spec.at("path").get<std::string>());
    Signal s;
    try {
      s = read_csv(in);
    } catch (const CsvError& e) {
      throw ConfigError(std::string("input CSV: ") + e.what());
    }
    if (s.channels() != n_u || s.samples() != N || std::abs(s.step() - g.step) > 1e-9 * g.step) {
      throw ConfigError("input CSV does not match the configured grid and input dimension");
    }
    return s;
  }
  try {
    return Signal(g.step, std::move(v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("input: ") + e.what());
  }
}

json resolve_supply(const json& cfg) {
  try {
    return SupplyRate::from_json(cfg.value("supply", json{{"kind", "passivity"}})).to_json();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("supply: ") + e.what());
  }
}

json resolve_parameterization(const json& cfg, const StateSpaceModel& m, const Grid& g) {
  json raw = cfg.value("parameterization", json::object());
  allow_only(raw, {"kind", "K", "a_max", "center", "half_range", "horizon", "channels"}, "parameterization");
  // horizon and channels follow from the grid and the model; they are only
  // accepted so that an echoed configuration can be fed back in
  if (raw.contains("horizon") && !(raw.at("horizon").is_number() && raw.at("horizon").get<double>() == g.horizon)) {
    throw ConfigError("parameterization.horizon must equal grid.horizon");
  }
  if (raw.contains("channels") && !(raw.at("channels").is_number_integer() && raw.at("channels").get<int>() == m.n_u)) {
    throw ConfigError("parameterization.channels must equal the model's input count");
  }
  raw["horizon"] = g.horizon;
  raw["channels"] = m.n_u;
  InputParameterization p;
  try {
    p = InputParameterization::from_json(raw);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("parameterization: ") + e.what());
  }
  const auto defaults = default_parameterization(m, p.kind, p.K, p.horizon, p.a_max);
  if (p.center.size() == 0) p.center = defaults.center;
  if (p.half_range.size() == 0) p.half_range = defaults.half_range;
  return p.to_json();
}

json resolve_bases(const json& cfg, const StateSpaceModel& m) {
  json inputs = json::array();
  if (cfg.contains("inputs")) {
    if (!cfg.at("inputs").is_array() || cfg.at("inputs").empty()) throw ConfigError("inputs must be a non-empty array");
    for (std::size_t i = 0; i < cfg.at("inputs").size(); ++i) {
      inputs.push_back(resolve_input(cfg.at("inputs").at(i), m, "inputs[" + std::to_string(i) + "]"));
    }
  } else {
    inputs.push_back(resolve_input(cfg.value("input", json{{"kind", "constant"}}), m, "input"));
  }
  return inputs;
}

}  // namespace

json resolve_config(const std::string& command, const json& raw, std::optional<std::int64_t> seed_override) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> keys{"model", "params", "grid", "x0", "seed"};
  if (command == "simulate") {
    keys.insert("input");
  } else if (command == "falsify") {
    keys.insert({"parameterization", "budget", "horizons"});
  } else if (command == "check") {
    keys.insert({"mode", "supply", "storage", "input", "input2", "inputs", "x0_2", "parameterization", "budget",
                 "horizons", "starts"});
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  allow_only(raw, keys, "config");
  if (!raw.contains("model") || !raw.at("model").is_string()) throw ConfigError("config needs a 'model' string");

  json cfg = json::object();
  cfg["model"] = raw.at("model");
  cfg["params"] = raw.value("params", json::object());
  const StateSpaceModel m = model_of(cfg);
  cfg["params"] = m.params;

  const json grid_raw = raw.value("grid", json::object());
  allow_only(grid_raw, {"step", "horizon"}, "grid");
  const Grid g{number_or(grid_raw, "step", 1e-3, "grid"), number_or(grid_raw, "horizon", 10.0, "grid")};
  if (!(g.step > 0) || !(g.horizon > 0) || g.step > g.horizon) throw ConfigError("grid needs 0 < step <= horizon");
  cfg["grid"] = g.to_json();
  cfg["x0"] = to_json(raw.contains("x0") ? vector_of(raw.at("x0"), m.n_x, "x0") : m.x0_default);

  std::int64_t seed = 1;
  if (raw.contains("seed")) {
    if (!raw.at("seed").is_number_integer()) throw ConfigError("seed must be an integer");
    seed = raw.at("seed").get<std::int64_t>();
  }
  if (seed_override) seed = *seed_override;
  cfg["seed"] = seed;

  auto budget = [&] {
    const auto b = raw.value("budget", json(5000));
    if (!b.is_number_integer() || b.get<long>() < 1) throw ConfigError("budget must be a positive integer");
    return b.get<long>();
  };
  auto horizons = [&] {
    const auto h = raw.value("horizons", json(8));
    if (!h.is_number_integer() || h.get<int>() < 1) throw ConfigError("horizons must be a positive integer");
    return h.get<int>();
  };

  if (command == "simulate") {
    cfg["input"] = resolve_input(raw.value("input", json{{"kind", "constant"}}), m, "input");
  } else if (command == "falsify") {
    cfg["parameterization"] = resolve_parameterization(raw, m, g);
    cfg["budget"] = budget();
    cfg["horizons"] = horizons();
  } else {
    if (!raw.contains("mode") || !raw.at("mode").is_string()) throw ConfigError("check needs a 'mode' string");
    const auto mode = raw.at("mode").get<std::string>();
    cfg["mode"] = mode;
    std::set<std::string> mode_keys{"model", "params", "grid", "x0", "seed", "mode"};
    if (mode == "dissipation" || mode == "incremental") {
      mode_keys.insert({"supply", "storage", "input"});
      cfg["supply"] = resolve_supply(raw);
      cfg["input"] = resolve_input(raw.value("input", json{{"kind", "constant"}}), m, "input");
      if (!raw.contains("storage")) throw ConfigError(mode + " check needs a 'storage' object with 'P'");
      allow_only(raw.at("storage"), {"P"}, "storage");
      if (!raw.at("storage").contains("P")) throw ConfigError("storage needs 'P'");
      cfg["storage"] = {{"P", matrix_json(matrix_of(raw.at("storage").at("P"), m.n_x, "storage.P"))}};
      if (mode == "incremental") {
        mode_keys.insert({"input2", "x0_2"});
        cfg["input2"] = resolve_input(raw.value("input2", json{{"kind", "constant"}}), m, "input2");
        cfg["x0_2"] = raw.contains("x0_2") ? to_json(vector_of(raw.at("x0_2"), m.n_x, "x0_2")) : cfg["x0"];
      }
    } else if (mode == "diffpass") {
      mode_keys.insert({"supply", "storage", "input", "inputs"});
      cfg["supply"] = resolve_supply(raw);
      cfg["inputs"] = resolve_bases(raw, m);
      const json st = raw.value("storage", json{{"scan", json::object()}});
      allow_only(st, {"P", "scan"}, "storage");
      if (st.contains("P") == st.contains("scan")) throw ConfigError("storage needs exactly one of 'P' or 'scan'");
      if (st.contains("P")) {
        cfg["storage"] = {{"P", matrix_json(matrix_of(st.at("P"), m.n_x, "storage.P"))}};
      } else {
        const json& sc = st.at("scan");
        allow_only(sc, {"from", "to", "count"}, "storage.scan");
        const double from = number_or(sc, "from", 1e-3, "storage.scan"), to = number_or(sc, "to", 1e3, "storage.scan");
        const int count = sc.value("count", 13);
        if (!(from > 0) || !(to >= from) || count < 1) throw ConfigError("storage.scan needs 0 < from <= to, count >= 1");
        cfg["storage"] = {{"scan", {{"from", from}, {"to", to}, {"count", count}}}};
      }
    } else if (mode == "gain") {
      mode_keys.insert({"parameterization", "budget", "horizons"});
      cfg["parameterization"] = resolve_parameterization(raw, m, g);
      cfg["budget"] = budget();
      cfg["horizons"] = horizons();
    } else if (mode == "storage_search") {
      mode_keys.insert({"supply", "input", "inputs", "starts"});
      cfg["supply"] = resolve_supply(raw);
      cfg["inputs"] = resolve_bases(raw, m);
      const auto starts = raw.value("starts", json(20));
      if (!starts.is_number_integer() || starts.get<int>() < 1) throw ConfigError("starts must be a positive integer");
      cfg["starts"] = starts;
    } else {
      throw ConfigError("unknown check mode '" + mode + "'");
    }
    allow_only(raw, mode_keys, "config for mode " + mode);
  }
  return cfg;
}

namespace {

struct Outcome {
  int code;
  std::string body;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<Trajectory> simulate_bases(const StateSpaceModel& m, const json& cfg, const Grid& g, const Vector& x0) {
  std::vector<Trajectory> bases;
  for (const auto& spec : cfg.at("inputs")) bases.push_back(simulate(m, build_input(spec, g, m.n_u), x0));
  return bases;
}

Outcome cmd_simulate(const json& cfg) {
  const StateSpaceModel m = model_of(cfg);
  const Grid g = grid_of(cfg);
  const Vector x0 = vector_of(cfg.at("x0"), m.n_x, "x0");
  const Trajectory tr = simulate(m, build_input(cfg.at("input"), g, m.n_u), x0);
  std::ostringstream os;
  write_trajectory_csv(os, tr, {"config: " + cfg.dump(), "seed: " + std::to_string(cfg.at("seed").get<std::int64_t>())});
  return {kSuccess, os.str()};
}

Outcome cmd_falsify(const json& cfg) {
  const StateSpaceModel m = model_of(cfg);
  const Grid g = grid_of(cfg);
  const auto p = InputParameterization::from_json(cfg.at("parameterization"));
  FalsifyOptions opts;
  opts.budget = cfg.at("budget").get<long>();
  opts.seed = static_cast<std::uint64_t>(cfg.at("seed").get<std::int64_t>());
  opts.step = g.step;
  opts.x0 = vector_of(cfg.at("x0"), m.n_x, "x0");
  opts.horizons = cfg.at("horizons").get<int>();
  const FalsifyResult res = run_falsifier(m, p, opts);
  if (res.certificate) {
    json out = res.certificate->to_json();
    out["config"] = cfg;
    return {kSuccess, dump(out)};
  }
  return {kNegative, dump({{"summary", res.summary()}, {"config", cfg}})};
}

Outcome cmd_check(const json& cfg) {
  const StateSpaceModel m = model_of(cfg);
  const Grid g = grid_of(cfg);
  const Vector x0 = vector_of(cfg.at("x0"), m.n_x, "x0");
  const auto mode = cfg.at("mode").get<std::string>();
  json report;
  bool positive = true;

  if (mode == "dissipation" || mode == "incremental") {
    const SupplyRate s = SupplyRate::from_json(cfg.at("supply"));
    const Matrix P = matrix_of(cfg.at("storage").at("P"), m.n_x, "storage.P");
    const Signal u = build_input(cfg.at("input"), g, m.n_u);
    DissipationReport rep;
    try {
      if (mode == "dissipation") {
        rep = check_dissipation(m, QuadraticStorage(P, StorageMode::state), s, u, x0);
      } else {
        const Signal u2 = build_input(cfg.at("input2"), g, m.n_u);
        const Vector x0_2 = vector_of(cfg.at("x0_2"), m.n_x, "x0_2");
        rep = check_incremental_dissipation(m, QuadraticStorage(P, StorageMode::increment), s, u, u2, x0, x0_2);
      }
    } catch (const std::invalid_argument& e) {
      if (dynamic_cast<const AlignmentError*>(&e) == nullptr) throw ConfigError(e.what());
      throw;
    }
    report = rep.to_json();
    positive = rep.pass;
  } else if (mode == "diffpass") {
    const SupplyRate s = SupplyRate::from_json(cfg.at("supply"));
    const auto bases = simulate_bases(m, cfg, g, x0);
    std::vector<Matrix> candidates;
    const json& st = cfg.at("storage");
    if (st.contains("P")) {
      candidates.push_back(matrix_of(st.at("P"), m.n_x, "storage.P"));
    } else {
      const double from = st.at("scan").at("from"), to = st.at("scan").at("to");
      const int count = st.at("scan").at("count");
      for (int i = 0; i < count; ++i) {
        const double c = count == 1 ? from : from * std::pow(to / from, static_cast<double>(i) / (count - 1));
        candidates.push_back(c * Matrix::Identity(m.n_x, m.n_x));
      }
    }
    json scan = json::array();
    std::optional<MarginReport> best;
    for (const auto& P : candidates) {
      MarginReport worst;
      worst.margin = -std::numeric_limits<double>::infinity();
      for (const auto& b : bases) {
        MarginReport r;
        try {
          r = check_differential_dissipation_pointwise(m, b, P, s);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
        if (r.margin > worst.margin) worst = r;
      }
      scan.push_back({{"P", matrix_json(P)}, {"margin", worst.margin}, {"pass", worst.pass}});
      if (!best || (worst.pass && !best->pass) || (worst.pass == best->pass && worst.margin < best->margin)) best = worst;
    }
    report = best->to_json();
    report["scan"] = scan;
    positive = best->pass;
  } else if (mode == "gain") {
    const auto p = InputParameterization::from_json(cfg.at("parameterization"));
    FalsifyOptions opts;
    opts.budget = cfg.at("budget").get<long>();
    opts.seed = static_cast<std::uint64_t>(cfg.at("seed").get<std::int64_t>());
    opts.step = g.step;
    opts.x0 = x0;
    opts.horizons = cfg.at("horizons").get<int>();
    const GainBound gb = incremental_gain_search(m, p, opts);
    report = {{"value", gb.ratio},
              {"T_eval", gb.T_eval},
              {"theta1", to_json(gb.theta1)},
              {"theta2", to_json(gb.theta2)},
              {"evaluations", gb.evaluations},
              {"model", m.name},
              {"grid", g.to_json()}};
  } else {
    const SupplyRate s = SupplyRate::from_json(cfg.at("supply"));
    const auto bases = simulate_bases(m, cfg, g, x0);
    StorageSearchOptions opts;
    opts.starts = cfg.at("starts").get<int>();
    opts.seed = static_cast<std::uint64_t>(cfg.at("seed").get<std::int64_t>());
    std::optional<Matrix> P;
    try {
      P = search_constant_storage(m, bases, s, opts);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    report = {{"found", P.has_value()}, {"supply", s.to_json()}, {"model", m.name}, {"grid", g.to_json()}};
    if (P) {
      report["storage"] = {{"kind", "quadratic"}, {"P", matrix_json(*P)}, {"mode", "differential"}};
      report["margin"] = worst_pointwise_margin(m, bases, *P, s);
    }
    positive = P.has_value();
  }
  return {positive ? kSuccess : kNegative, dump({{"report", report}, {"config", cfg}})};
}

Outcome cmd_replay(const json& raw) {
  ViolationCertificate cert;
  try {
    cert = ViolationCertificate::from_json(raw);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed certificate: ") + e.what());
  }
  const ReplayResult r = replay(cert);
  json out = {{"valid", r.valid}, {"recomputed", r.recomputed}, {"stored", cert.value}, {"model_name", cert.model_name}};
  if (!r.valid) out["reason"] = r.reason;
  return {r.valid ? kSuccess : kRuntimeError, dump(out)};
}

}  // namespace

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  Outcome outcome{kSuccess, {}};
  try {
    std::ifstream in(inv.config);
    if (!in) throw ConfigError("cannot open config file " + inv.config.string());
    json raw;
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    if (inv.command == "replay") {
      outcome = cmd_replay(raw);
    } else {
      const json cfg = resolve_config(inv.command, raw, inv.seed);
      if (inv.command == "simulate") {
        outcome = cmd_simulate(cfg);
      } else if (inv.command == "falsify") {
        outcome = cmd_falsify(cfg);
      } else {
        outcome = cmd_check(cfg);
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << " (first offending time " << e.time() << ")\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }

  if (inv.out) {
    std::ofstream f(*inv.out);
    if (!f) {
      err << "error: cannot write " << inv.out->string() << '\n';
      return kRuntimeError;
    }
    f << outcome.body;
  } else {
    out << outcome.body;
  }
  if (outcome.code == kRuntimeError) err << "replay mismatch\n";
  return outcome.code;
}

}  // namespace increlab::cli
