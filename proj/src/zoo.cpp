#include "increlab/zoo.hpp"

#include <cmath>
#include <set>
#include <string>

namespace increlab {

namespace {

using nlohmann::json;

/// Reads typed parameters out of a JSON object and rejects leftovers.
class ParamReader {
 public:
  ParamReader(std::string context, const json& params) : context_(std::move(context)), params_(params) {
    if (!params_.is_object()) throw ModelError(context_ + ": params must be a JSON object");
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    if (!params_.contains(key)) return resolved_[key] = fallback;
    const auto& v = params_.at(key);
    if (!v.is_number()) throw ModelError(context_ + ": parameter '" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ModelError(context_ + ": parameter '" + key + "' must be finite");
    return resolved_[key] = d;
  }

  double positive(const std::string& key, double fallback) {
    const double d = number(key, fallback);
    if (!(d > 0)) throw ModelError(context_ + ": parameter '" + key + "' must be positive");
    return d;
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
    used_.insert(key);
    std::string s = fallback;
    if (params_.contains(key)) {
      if (!params_.at(key).is_string()) throw ModelError(context_ + ": parameter '" + key + "' must be a string");
      s = params_.at(key).get<std::string>();
    }
    if (!allowed.contains(s)) throw ModelError(context_ + ": unsupported value '" + s + "' for '" + key + "'");
    resolved_[key] = s;
    return s;
  }

  StaticMap map(const std::string& key, const json& fallback, bool require_monotone) {
    used_.insert(key);
    StaticMap m = static_map_from_json(params_.contains(key) ? params_.at(key) : fallback);
    if (require_monotone && !m.monotone) {
      throw ModelError(context_ + ": parameter '" + key + "' must be a monotone map");
    }
    resolved_[key] = m.params;
    return m;
  }

  json finish() const {
    for (const auto& [key, _] : params_.items()) {
      if (!used_.contains(key)) throw ModelError(context_ + ": unknown parameter '" + key + "'");
    }
    return resolved_;
  }

 private:
  std::string context_;
  const json& params_;
  std::set<std::string> used_;
  json resolved_ = json::object();
};

StaticMap make_map(std::string name, json params, bool monotone, std::function<double(double)> value,
                   std::function<double(double)> slope, std::function<double(double)> curvature) {
  return StaticMap{std::move(name), std::move(value), std::move(slope), std::move(curvature), monotone,
                   std::move(params)};
}

StateSpaceModel base(std::string name, int n_x, int n_u, int n_y) {
  StateSpaceModel m;
  m.name = std::move(name);
  m.n_x = n_x;
  m.n_u = n_u;
  m.n_y = n_y;
  m.state_domain = Box::unbounded(n_x);
  m.input_domain = Box::unbounded(n_u);
  m.x0_default = Vector::Zero(n_x);
  m.input_center = Vector::Zero(n_u);
  m.input_half_range = Vector::Ones(n_u);
  return m;
}

/// x' = u, y = out(x): the integrator-then-static-map element shared by the
/// capacitor, inductor and saturated integrator presets.
StateSpaceModel integrator_with_output(std::string name, StaticMap out) {
  StateSpaceModel m = base(std::move(name), 1, 1, 1);
  m.f = [](const VectorRef&, const VectorRef& u, VectorOut dx) { dx(0) = u(0); };
  m.h = [value = out.value](const VectorRef& x, const VectorRef&, VectorOut y) { y(0) = value(x(0)); };
  m.jacobians = [slope = out.slope](const VectorRef& x, const VectorRef&, Jacobians& J) {
    J.B(0, 0) = 1.0;
    J.C(0, 0) = slope(x(0));
  };
  return m;
}

StateSpaceModel make_linear_capacitor(const json& params) {
  ParamReader p("linear_capacitor", params);
  const double C = p.positive("C", 1.0);
  StateSpaceModel m = base("linear_capacitor", 1, 1, 1);
  m.f = [](const VectorRef&, const VectorRef& u, VectorOut dx) { dx(0) = u(0); };
  m.h = [C](const VectorRef& x, const VectorRef&, VectorOut y) { y(0) = x(0) / C; };
  m.jacobians = [C](const VectorRef&, const VectorRef&, Jacobians& J) {
    J.B(0, 0) = 1.0;
    J.C(0, 0) = 1.0 / C;
  };
  m.params = p.finish();
  return m;
}

StateSpaceModel make_nonlinear_capacitor(const json& params) {
  ParamReader p("nonlinear_capacitor", params);
  StaticMap c = p.map("c", "cubic", true);
  StateSpaceModel m = integrator_with_output("nonlinear_capacitor", std::move(c));
  m.state_domain = {Vector::Constant(1, -3.0), Vector::Constant(1, 3.0)};
  m.input_domain = {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)};
  m.params = p.finish();
  return m;
}

StateSpaceModel make_saturated_integrator(const json& params) {
  ParamReader p("saturated_integrator", params);
  const double k = p.positive("k", 1.0);
  StateSpaceModel m = integrator_with_output("saturated_integrator", static_map_from_json({{"kind", "tanh"}, {"gain", k}}));
  m.params = p.finish();
  return m;
}

StateSpaceModel make_hh_potassium(const json& params) {
  ParamReader p("hh_potassium", params);
  const double g_K = p.positive("g_K", 36.0);
  const double V_K = p.number("V_K", -77.0);
  const std::string kinetics = p.choice("kinetics", "standard", {"standard", "paper-literal"});
  const bool standard = kinetics == "standard";

  StateSpaceModel m = base("hh_potassium", 1, 1, 1);
  if (standard) {
    m.f = [](const VectorRef& x, const VectorRef& u, VectorOut dx) {
      const double n = x(0), V = u(0);
      dx(0) = hh::alpha_n(V) * (1.0 - n) - hh::beta_n(V) * n;
    };
  } else {
    m.f = [](const VectorRef& x, const VectorRef& u, VectorOut dx) {
      const double n = x(0), V = u(0);
      dx(0) = hh::alpha_n(V) * n + hh::beta_n(V) * (1.0 - n);
    };
  }
  m.h = [g_K, V_K](const VectorRef& x, const VectorRef& u, VectorOut y) {
    const double n2 = x(0) * x(0);
    y(0) = g_K * n2 * n2 * (u(0) - V_K);
  };
  m.jacobians = [g_K, V_K, standard](const VectorRef& x, const VectorRef& u, Jacobians& J) {
    const double n = x(0), V = u(0);
    const double a = hh::alpha_n(V), b = hh::beta_n(V);
    const double da = hh::alpha_n_slope(V), db = hh::beta_n_slope(V);
    if (standard) {
      J.A(0, 0) = -(a + b);
      J.B(0, 0) = da * (1.0 - n) - db * n;
    } else {
      J.A(0, 0) = a - b;
      J.B(0, 0) = da * n + db * (1.0 - n);
    }
    J.C(0, 0) = 4.0 * g_K * n * n * n * (V - V_K);
    J.D(0, 0) = g_K * n * n * n * n;
  };
  m.state_domain = {Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
  m.input_domain = {Vector::Constant(1, V_K), Vector::Constant(1, V_K + 120.0)};
  m.x0_default = Vector::Constant(1, 0.3);
  m.input_center = Vector::Constant(1, V_K + 60.0);
  m.input_half_range = Vector::Constant(1, 60.0);
  m.params = p.finish();
  return m;
}

StateSpaceModel make_chua_inductor(const json& params) {
  ParamReader p("chua_inductor", params);
  StaticMap l = p.map("l", "stiffening", true);
  StateSpaceModel m = integrator_with_output("chua_inductor", std::move(l));
  m.params = p.finish();
  return m;
}

StateSpaceModel make_chua_memristor(const json& params) {
  ParamReader p("chua_memristor", params);
  StaticMap mu = p.map("mu", "cubic_third", true);
  StateSpaceModel m = base("chua_memristor", 1, 1, 1);
  m.f = [](const VectorRef&, const VectorRef& u, VectorOut dx) { dx(0) = u(0); };
  m.h = [slope = mu.slope](const VectorRef& x, const VectorRef& u, VectorOut y) { y(0) = slope(x(0)) * u(0); };
  m.jacobians = [slope = mu.slope, curvature = mu.curvature](const VectorRef& x, const VectorRef& u, Jacobians& J) {
    J.B(0, 0) = 1.0;
    J.C(0, 0) = curvature(x(0)) * u(0);
    J.D(0, 0) = slope(x(0));
  };
  m.params = p.finish();
  return m;
}

StateSpaceModel static_model(std::string name, StaticMap g) {
  StateSpaceModel m = base(std::move(name), 0, 1, 1);
  m.f = [](const VectorRef&, const VectorRef&, VectorOut) {};
  m.h = [value = g.value](const VectorRef&, const VectorRef& u, VectorOut y) { y(0) = value(u(0)); };
  m.jacobians = [slope = g.slope](const VectorRef&, const VectorRef& u, Jacobians& J) { J.D(0, 0) = slope(u(0)); };
  return m;
}

StateSpaceModel make_static_resistor(const json& params) {
  ParamReader p("static_resistor", params);
  StaticMap g = p.map("g", "linear", false);
  StateSpaceModel m = static_model("static_resistor", std::move(g));
  m.params = p.finish();
  return m;
}

StateSpaceModel make_negative_resistance_passive(const json& params) {
  ParamReader p("negative_resistance_passive", params);
  StateSpaceModel m = static_model("negative_resistance_passive", static_map_from_json("negative_resistance"));
  m.params = p.finish();
  return m;
}

StateSpaceModel make_first_order_lag(const json& params) {
  ParamReader p("first_order_lag", params);
  const double a = p.positive("a", 1.0);
  StateSpaceModel m = base("first_order_lag", 1, 1, 1);
  m.f = [a](const VectorRef& x, const VectorRef& u, VectorOut dx) { dx(0) = -a * x(0) + u(0); };
  m.h = [](const VectorRef& x, const VectorRef&, VectorOut y) { y(0) = x(0); };
  m.jacobians = [a](const VectorRef&, const VectorRef&, Jacobians& J) {
    J.A(0, 0) = -a;
    J.B(0, 0) = 1.0;
    J.C(0, 0) = 1.0;
  };
  m.params = p.finish();
  return m;
}

}  // namespace

StaticMap static_map_from_json(const json& spec) {
  std::string kind;
  const json empty = json::object();
  const json* args = &empty;
  if (spec.is_string()) {
    kind = spec.get<std::string>();
  } else if (spec.is_object() && spec.contains("kind") && spec.at("kind").is_string()) {
    kind = spec.at("kind").get<std::string>();
    args = &spec;
  } else {
    throw ModelError("static map must be a preset name or an object with a 'kind' string");
  }

  json filtered = json::object();
  for (const auto& [key, value] : args->items()) {
    if (key != "kind") filtered[key] = value;
  }
  ParamReader p("static map '" + kind + "'", filtered);
  StaticMap m;
  if (kind == "linear") {
    const double s = p.number("slope", 1.0);
    m = make_map(kind, {}, s >= 0, [s](double v) { return s * v; }, [s](double) { return s; },
                 [](double) { return 0.0; });
  } else if (kind == "cubic") {
    m = make_map(kind, {}, true, [](double v) { return v * v * v; }, [](double v) { return 3 * v * v; },
                 [](double v) { return 6 * v; });
  } else if (kind == "stiffening") {
    m = make_map(kind, {}, true, [](double v) { return v + v * v * v; }, [](double v) { return 1 + 3 * v * v; },
                 [](double v) { return 6 * v; });
  } else if (kind == "cubic_third") {
    m = make_map(kind, {}, true, [](double v) { return v + v * v * v / 3; }, [](double v) { return 1 + v * v; },
                 [](double v) { return 2 * v; });
  } else if (kind == "tanh") {
    const double k = p.positive("gain", 1.0);
    m = make_map(
        kind, {}, true, [k](double v) { return std::tanh(k * v); },
        [k](double v) {
          const double t = std::tanh(k * v);
          return k * (1 - t * t);
        },
        [k](double v) {
          const double t = std::tanh(k * v);
          return -2 * k * k * t * (1 - t * t);
        });
  } else if (kind == "negative_resistance") {
    m = make_map(
        kind, {}, false, [](double v) { return 0.5 * v * (1.1 + std::cos(3 * v)); },
        [](double v) { return 0.5 * (1.1 + std::cos(3 * v)) - 1.5 * v * std::sin(3 * v); },
        [](double v) { return -3.0 * std::sin(3 * v) - 4.5 * v * std::cos(3 * v); });
  } else {
    throw ModelError("unknown static map '" + kind + "'");
  }
  json resolved = p.finish();
  resolved["kind"] = kind;
  m.params = std::move(resolved);
  return m;
}

StateSpaceModel zoo(std::string_view name, const json& params) {
  const json& p = params.is_null() ? json::object() : params;
  if (name == "linear_capacitor") return make_linear_capacitor(p);
  if (name == "nonlinear_capacitor") return make_nonlinear_capacitor(p);
  if (name == "saturated_integrator") return make_saturated_integrator(p);
  if (name == "hh_potassium") return make_hh_potassium(p);
  if (name == "chua_inductor") return make_chua_inductor(p);
  if (name == "chua_memristor") return make_chua_memristor(p);
  if (name == "static_resistor") return make_static_resistor(p);
  if (name == "negative_resistance_passive") return make_negative_resistance_passive(p);
  if (name == "first_order_lag") return make_first_order_lag(p);
  throw ModelError("unknown model '" + std::string(name) + "'");
}

std::vector<std::string> zoo_names() {
  return {"linear_capacitor", "nonlinear_capacitor", "saturated_integrator",
          "hh_potassium",     "chua_inductor",       "chua_memristor",
          "static_resistor",  "negative_resistance_passive", "first_order_lag"};
}

namespace hh {

namespace {

// z / (1 - exp(-z)) and its derivative, continuous through z = 0.
double exprel(double z) {
  if (std::abs(z) < 1e-8) return 1.0 + 0.5 * z;
  return z / -std::expm1(-z);
}

double exprel_slope(double z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0;
  const double e = std::exp(-z);
  const double d = -std::expm1(-z);
  return (d - z * e) / (d * d);
}

}  // namespace

double alpha_n(double V) { return 0.1 * exprel((V + 55.0) / 10.0); }
double alpha_n_slope(double V) { return 0.01 * exprel_slope((V + 55.0) / 10.0); }
double beta_n(double V) { return 0.125 * std::exp(-(V + 65.0) / 80.0); }
double beta_n_slope(double V) { return -beta_n(V) / 80.0; }

}  // namespace hh

}  // namespace increlab
