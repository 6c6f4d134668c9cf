#pragma once

// Uniformly sampled multichannel signals on [0, horizon] and the L2 operations
// used throughout the toolkit: truncation, inner product, norm.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace increlab {

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sampled signal with one row per sample and one column per channel.
/// Sample k sits at time k * step; the first sample is always at t = 0.
template <typename Scalar>
class BasicSignal {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Index = Eigen::Index;

  BasicSignal() = default;

  BasicSignal(Scalar step, Matrix values) : step_(step), values_(std::move(values)) {
    if (!(step_ > Scalar(0)) || !std::isfinite(static_cast<double>(step_))) {
      throw std::invalid_argument("signal step must be positive and finite");
    }
    if (!values_.allFinite()) {
      throw std::invalid_argument("signal values must be finite");
    }
  }

  static BasicSignal zeros(Scalar step, Index samples, Index channels) {
    return BasicSignal(step, Matrix::Zero(samples, channels));
  }

  static BasicSignal constant(Scalar step, Index samples, Scalar value, Index channels = 1) {
    return BasicSignal(step, Matrix::Constant(samples, channels, value));
  }

  Scalar step() const { return step_; }
  Index samples() const { return values_.rows(); }
  Index channels() const { return values_.cols(); }
  Scalar time(Index k) const { return static_cast<Scalar>(k) * step_; }
  Scalar horizon() const { return samples() > 0 ? time(samples() - 1) : Scalar(0); }

  const Matrix& values() const { return values_; }
  Scalar operator()(Index k, Index channel) const { return values_(k, channel); }

  bool aligned_with(const BasicSignal& other) const {
    return step_ == other.step_ && samples() == other.samples() && channels() == other.channels();
  }

  /// Index of the last grid point not after T (T rounded down onto the grid).
  Index grid_index(Scalar T) const {
    if (T <= Scalar(0)) return 0;
    const double ratio = static_cast<double>(T / step_);
    const double k = std::floor(ratio + 1e-7);
    return static_cast<Index>(k);
  }

 private:
  Scalar step_{1};
  Matrix values_;
};

using Signal = BasicSignal<double>;

template <typename Scalar>
void require_aligned(const BasicSignal<Scalar>& a, const BasicSignal<Scalar>& b,
                     const char* what = "signals") {
  if (!a.aligned_with(b)) {
    throw AlignmentError(std::string(what) + " are not aligned (step, channels, samples differ)");
  }
}

template <typename Scalar>
BasicSignal<Scalar> operator-(const BasicSignal<Scalar>& a, const BasicSignal<Scalar>& b) {
  require_aligned(a, b);
  return BasicSignal<Scalar>(a.step(), a.values() - b.values());
}

template <typename Scalar>
BasicSignal<Scalar> operator+(const BasicSignal<Scalar>& a, const BasicSignal<Scalar>& b) {
  require_aligned(a, b);
  return BasicSignal<Scalar>(a.step(), a.values() + b.values());
}

template <typename Scalar>
BasicSignal<Scalar> operator*(Scalar c, const BasicSignal<Scalar>& a) {
  return BasicSignal<Scalar>(a.step(), c * a.values());
}

/// P_T: keeps samples at t < T and zeroes the rest. T is rounded down onto the grid.
template <typename Scalar>
BasicSignal<Scalar> truncate(const BasicSignal<Scalar>& s, Scalar T) {
  if (T < Scalar(0)) throw std::invalid_argument("truncation time must be nonnegative");
  const auto keep = std::min(s.grid_index(T), s.samples());
  typename BasicSignal<Scalar>::Matrix v = s.values();
  v.bottomRows(s.samples() - keep).setZero();
  return BasicSignal<Scalar>(s.step(), std::move(v));
}

/// Trapezoidal sum over samples 0..last of a per-sample column of values.
template <typename Derived>
typename Derived::Scalar trapezoid(const Eigen::MatrixBase<Derived>& per_sample, Eigen::Index last,
                                   typename Derived::Scalar step) {
  using Scalar = typename Derived::Scalar;
  if (last <= 0) return Scalar(0);
  const Scalar interior = per_sample.segment(1, last - 1).sum();
  return step * (interior + Scalar(0.5) * (per_sample(0) + per_sample(last)));
}

/// Running trapezoidal integral; entry k integrates over [0, t_k].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> cumulative_trapezoid(
    const Eigen::MatrixBase<Derived>& per_sample, typename Derived::Scalar step) {
  using Scalar = typename Derived::Scalar;
  const auto n = per_sample.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  if (n == 0) return out;
  out(0) = Scalar(0);
  for (Eigen::Index k = 1; k < n; ++k) {
    out(k) = out(k - 1) + Scalar(0.5) * step * (per_sample(k - 1) + per_sample(k));
  }
  return out;
}

/// <P_T a, P_T b>: trapezoidal quadrature of sum_i a_i b_i over [0, min(T, end)].
template <typename Scalar>
Scalar inner(const BasicSignal<Scalar>& a, const BasicSignal<Scalar>& b, Scalar T) {
  require_aligned(a, b);
  if (T < Scalar(0)) throw std::invalid_argument("horizon must be nonnegative");
  if (a.samples() == 0) return Scalar(0);
  const auto last = std::min(a.grid_index(T), a.samples() - 1);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> products =
      a.values().cwiseProduct(b.values()).rowwise().sum();
  return trapezoid(products, last, a.step());
}

template <typename Scalar>
Scalar norm(const BasicSignal<Scalar>& a, Scalar T) {
  return std::sqrt(std::max(Scalar(0), inner(a, a, T)));
}

}  // namespace increlab
