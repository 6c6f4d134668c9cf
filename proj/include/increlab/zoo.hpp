#pragma once

#include "increlab/model.hpp"
#include "increlab/static_map.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace increlab {

/// Named preset models. `params` is a JSON object; unknown keys and
/// out-of-range values raise ModelError. The resolved parameters (defaults
/// filled in) are stored in the returned model's `params`.
///
///   linear_capacitor             {C > 0 = 1}                 x' = u, y = x / C
///   nonlinear_capacitor          {c = "cubic"}               x' = u, y = c(x)
///   saturated_integrator         {k > 0 = 1}                 x' = u, y = tanh(k x)
///   hh_potassium                 {g_K = 36, V_K = -77, kinetics = "standard"}
///   chua_inductor                {l = "stiffening"}          x' = u, y = l(x)
///   chua_memristor               {mu = "cubic_third"}        x' = u, y = mu'(x) u
///   static_resistor              {g = "linear"}              y = g(u)
///   negative_resistance_passive  {}                          y = 0.5 u (1.1 + cos 3u)
///   first_order_lag              {a > 0 = 1}                 x' = -a x + u, y = x
StateSpaceModel zoo(std::string_view name, const nlohmann::json& params = nlohmann::json::object());

std::vector<std::string> zoo_names();

namespace hh {

/// Potassium activation opening rate, 1/ms, V in mV; the removable
/// singularity at V = -55 is filled by its limit 0.1.
double alpha_n(double V);
double alpha_n_slope(double V);
/// Potassium activation closing rate, 1/ms.
double beta_n(double V);
double beta_n_slope(double V);

}  // namespace hh

}  // namespace increlab
