#pragma once

#include <cstddef>

namespace tbcal {

enum class PulseKind { Rectangular, OneSidedExponential, Gaussian };

/// Unit-area detector response pulse f(t) with characteristic width tau_p.
///
/// Shapes:
///   Rectangular          f(t) = 1/w            on [-w/2, w/2)
///   OneSidedExponential  f(t) = exp(-t/w)/w    on [0, 30 w]
///   Gaussian             f(t) = N(0, sigma^2)  on [-7 sigma, 7 sigma],
///                        sigma = w / sqrt(2 pi) so the peak height is 1/w.
/// Supports are truncated where the tail mass is < 1e-11, so the numeric
/// area stays within 1e-9 of unity.
class PulseShape {
 public:
  PulseShape(PulseKind kind, double width);

  PulseKind kind() const { return kind_; }
  double width() const { return width_; }

  /// f(t); zero outside the truncated support.
  double value(double t) const;

  double support_lo() const;
  double support_hi() const;

  /// Closed-form correlation F12(tau) = integral f1(t) f2(t + tau) dt
  /// with this pulse as f1. Truncation of the supports is ignored
  /// (relative error < 1e-9).
  double correlation(const PulseShape& other, double tau) const;

  /// Composite-Simpson area over the truncated support, splitting at the
  /// discontinuities. Used to enforce the unit-area invariant.
  double numeric_area(std::size_t n_per_piece = 1 << 14) const;

  /// Gaussian sigma (only meaningful for Gaussian pulses).
  double sigma() const;

 private:
  PulseKind kind_;
  double width_;
};

}  // namespace tbcal
