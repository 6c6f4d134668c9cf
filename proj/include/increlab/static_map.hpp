#pragma once

#include "increlab/model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>

namespace increlab {

/// Scalar nonlinearity applied coordinatewise, with its first two derivatives.
/// Used for resistor laws, capacitor c(q), inductor and memristor relations.
struct StaticMap {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> slope;
  std::function<double(double)> curvature;
  bool monotone = false;
  nlohmann::json params = nlohmann::json::object();

  double operator()(double v) const { return value(v); }

  Vector operator()(const VectorRef& v) const { return v.unaryExpr(value); }
};

/// Builds a map from a preset name ("cubic") or an object
/// ({"kind": "linear", "slope": 2}). Presets:
///   linear (slope s, default 1)   s * v
///   cubic                         v^3
///   stiffening                    v + v^3
///   cubic_third                   v + v^3 / 3
///   tanh (gain k > 0, default 1)  tanh(k v)
///   negative_resistance           0.5 v (1.1 + cos 3v)   (not monotone)
StaticMap static_map_from_json(const nlohmann::json& spec);

}  // namespace increlab
