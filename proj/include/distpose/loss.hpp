#pragma once

// Piecewise quadratic-linear regression loss over descriptor residuals, with a
// focal-weighted variant, analytic gradients, and a compensated batch reduction.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"

namespace distpose {

enum class LossVariant { piecewise, focal };

struct LossParams {
  double alpha = 8.0;
  double beta = 0.2;
  double delta = 0.3;
  // Derived so the quadratic and linear branches agree at delta; kept as a
  // field for reporting. See gamma_from_delta.
  double gamma = 8.0 * 0.3 * 0.3 - 0.2 * 0.3;
  double epsilon = 15.0;  // focal exponent

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0) || !(delta > 0.0)) {
      throw ArgumentError("LossParams: alpha, beta, delta must be positive");
    }
    if (!(epsilon >= 0.0)) {
      throw ArgumentError("LossParams: epsilon must be non-negative");
    }
  }
};

// Offset that makes beta*e + gamma meet alpha*e^2 at e = delta.
inline double gamma_from_delta(const LossParams& params) {
  return params.alpha * params.delta * params.delta - params.beta * params.delta;
}

inline double loss_scalar(double e, const LossParams& params) {
  if (!(e >= 0.0)) {
    throw ArgumentError("loss_scalar: residual must be non-negative, got " +
                        std::to_string(e));
  }
  if (e < params.delta) return params.alpha * e * e;
  // Same line as beta*e + gamma, but written so that at e == delta it evaluates
  // to exactly alpha*delta*delta for every parameter choice: the branches are
  // bitwise continuous, not merely continuous up to rounding.
  return params.beta * (e - params.delta) + params.alpha * params.delta * params.delta;
}

inline double focal_loss_scalar(double e, const LossParams& params) {
  if (!(e >= 0.0)) {
    throw ArgumentError("focal_loss_scalar: residual must be non-negative, got " +
                        std::to_string(e));
  }
  return std::pow(e, params.epsilon) * loss_scalar(e, params);
}

inline double loss_value(double e, const LossParams& params, LossVariant variant) {
  return variant == LossVariant::piecewise ? loss_scalar(e, params)
                                           : focal_loss_scalar(e, params);
}

// Derivative with respect to the residual; the gradient at e = 0 is 0.
inline double loss_gradient(double e, const LossParams& params,
                            LossVariant variant = LossVariant::piecewise) {
  if (e == 0.0) return 0.0;
  const double base = (e < params.delta) ? 2.0 * params.alpha * e : params.beta;
  if (variant == LossVariant::piecewise) return base;
  return params.epsilon * std::pow(e, params.epsilon - 1.0) * loss_scalar(e, params) +
         std::pow(e, params.epsilon) * base;
}

struct BatchLossResult {
  double mean_loss = 0.0;
  std::vector<double> losses;     // per point, in row order
  std::vector<double> residuals;  // per point Euclidean row distance
};

// Per-row Euclidean residuals, per-row loss, and the mean over rows.
// The reduction runs in row order with compensated summation so the result is
// independent of any parallel split of the per-point work.
inline BatchLossResult batch_loss(const DescriptorSet& pred, const DescriptorSet& ref,
                                  const LossParams& params, LossVariant variant) {
  params.validate();
  if (pred.rows() != ref.rows() || pred.dim() != ref.dim()) {
    throw ArgumentError("batch_loss: shape mismatch (" + std::to_string(pred.rows()) +
                        "x" + std::to_string(pred.dim()) + " vs " +
                        std::to_string(ref.rows()) + "x" + std::to_string(ref.dim()) +
                        ")");
  }
  const int n = pred.rows();
  if (n == 0) throw EmptyInputError("batch_loss: empty descriptor sets");

  BatchLossResult result;
  result.losses.reserve(static_cast<std::size_t>(n));
  result.residuals.reserve(static_cast<std::size_t>(n));
  double sum = 0.0;
  double carry = 0.0;  // Kahan compensation
  for (int i = 0; i < n; ++i) {
    const double e = feature_distance(pred.vectors.row(i), ref.vectors.row(i));
    const double value = loss_value(e, params, variant);
    result.residuals.push_back(e);
    result.losses.push_back(value);
    const double y = value - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  result.mean_loss = sum / static_cast<double>(n);
  return result;
}

}  // namespace distpose
