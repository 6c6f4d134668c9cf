#pragma once

// Box-clamped Nelder-Mead simplex minimizer.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace increlab {

template <typename Scalar>
struct NelderMeadOptions {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar reflection = 1;
  Scalar expansion = 2;
  Scalar contraction = 0.5;
  Scalar shrink = 0.5;
  int max_iterations = 200;
  long max_evaluations = std::numeric_limits<long>::max();
  Scalar initial_step = 0.1;
  // Stop once both the spread of simplex values and its diameter fall below these.
  Scalar f_tolerance = 0;
  Scalar x_tolerance = 0;
  // Optional box; candidate points are clamped into it before evaluation.
  Vec lower;
  Vec upper;
};

template <typename Scalar>
struct NelderMeadResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar value = std::numeric_limits<Scalar>::infinity();
  int iterations = 0;
  long evaluations = 0;
};

template <typename Scalar, typename Objective>
NelderMeadResult<Scalar> nelder_mead(Objective&& objective, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& start,
                                     const NelderMeadOptions<Scalar>& opts) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = start.size();
  const bool boxed = opts.lower.size() == n && opts.upper.size() == n;

  NelderMeadResult<Scalar> result;
  result.x = start;

  auto clamp = [&](Vec v) {
    if (boxed) v = v.cwiseMax(opts.lower).cwiseMin(opts.upper);
    return v;
  };
  auto budget_left = [&] { return result.evaluations < opts.max_evaluations; };
  auto eval = [&](const Vec& v) {
    ++result.evaluations;
    const Scalar f = objective(v);
    if (f < result.value) {
      result.value = f;
      result.x = v;
    }
    return f;
  };

  if (!budget_left()) return result;

  std::vector<Vec> simplex;
  std::vector<Scalar> values;
  simplex.reserve(n + 1);
  simplex.push_back(clamp(start));
  values.push_back(eval(simplex[0]));
  for (Eigen::Index i = 0; i < n && budget_left(); ++i) {
    Vec v = simplex[0];
    v(i) += opts.initial_step;
    if (boxed && v(i) > opts.upper(i)) v(i) = simplex[0](i) - opts.initial_step;
    simplex.push_back(clamp(v));
    values.push_back(eval(simplex.back()));
  }
  if (static_cast<Eigen::Index>(simplex.size()) != n + 1 || n == 0) return result;

  std::vector<std::size_t> order(n + 1);
  for (; result.iterations < opts.max_iterations && budget_left(); ++result.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second_worst = order[n - 1];

    if (opts.f_tolerance > 0 || opts.x_tolerance > 0) {
      Scalar diameter = 0;
      for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).template lpNorm<Eigen::Infinity>());
      if (values[worst] - values[best] <= opts.f_tolerance && diameter <= opts.x_tolerance) break;
    }

    Vec centroid = Vec::Zero(n);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<Scalar>(n);

    const Vec xr = clamp(centroid + opts.reflection * (centroid - simplex[worst]));
    const Scalar fr = eval(xr);
    if (fr < values[best]) {
      if (!budget_left()) {
        simplex[worst] = xr;
        values[worst] = fr;
        break;
      }
      const Vec xe = clamp(centroid + opts.expansion * (xr - centroid));
      const Scalar fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second_worst]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    if (!budget_left()) break;

    bool accepted = false;
    if (fr < values[worst]) {
      const Vec xc = clamp(centroid + opts.contraction * (xr - centroid));
      const Scalar fc = eval(xc);
      if (fc <= fr) {
        simplex[worst] = xc;
        values[worst] = fc;
        accepted = true;
      }
    } else {
      const Vec xc = clamp(centroid + opts.contraction * (simplex[worst] - centroid));
      const Scalar fc = eval(xc);
      if (fc < values[worst]) {
        simplex[worst] = xc;
        values[worst] = fc;
        accepted = true;
      }
    }
    if (accepted) continue;

    for (std::size_t i = 0; i <= static_cast<std::size_t>(n) && budget_left(); ++i) {
      if (i == best) continue;
      simplex[i] = clamp(simplex[best] + opts.shrink * (simplex[i] - simplex[best]));
      values[i] = eval(simplex[i]);
    }
  }
  return result;
}

}  // namespace increlab
