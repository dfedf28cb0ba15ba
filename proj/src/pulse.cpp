#include "tbcal/pulse.hpp"

#include <algorithm>
#include <cmath>

#include "tbcal/errors.hpp"

namespace tbcal {

namespace {

constexpr double kExpCutoffWidths = 30.0;  // exp(-30) ~ 9e-14
constexpr double kGaussCutoffSigmas = 7.0; // two-sided tail ~ 2.6e-12
const double kSqrt2Pi = std::sqrt(2.0 * std::acos(-1.0));

double normal_pdf(double x, double sigma) {
  const double z = x / sigma;
  return std::exp(-0.5 * z * z) / (sigma * kSqrt2Pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// F(tau) for a centered rectangle (width w) against a one-sided exponential
// (scale b), rectangle first: integral R(t) E(t + tau) dt.
double corr_rect_exp(double w, double b, double tau) {
  if (tau <= -0.5 * w) return 0.0;
  if (tau >= 0.5 * w)
    return (std::exp(-(tau - 0.5 * w) / b) - std::exp(-(tau + 0.5 * w) / b)) / w;
  return (1.0 - std::exp(-(tau + 0.5 * w) / b)) / w;
}

// Centered Gaussian (sigma) against one-sided exponential (scale b),
// Gaussian first: exponentially modified Gaussian density at tau.
double corr_gauss_exp(double sigma, double b, double tau) {
  const double z = tau / sigma - sigma / b;
  if (z < -37.0) return 0.0;  // product underflows; avoid inf * 0
  return std::exp(0.5 * sigma * sigma / (b * b) - tau / b) * normal_cdf(z) / b;
}

}  // namespace

PulseShape::PulseShape(PulseKind kind, double width) : kind_(kind), width_(width) {
  if (!(width > 0.0)) throw ConfigError("pulse width must be > 0");
}

double PulseShape::sigma() const { return width_ / kSqrt2Pi; }

double PulseShape::support_lo() const {
  switch (kind_) {
    case PulseKind::Rectangular: return -0.5 * width_;
    case PulseKind::OneSidedExponential: return 0.0;
    case PulseKind::Gaussian: return -kGaussCutoffSigmas * sigma();
  }
  return 0.0;
}

double PulseShape::support_hi() const {
  switch (kind_) {
    case PulseKind::Rectangular: return 0.5 * width_;
    case PulseKind::OneSidedExponential: return kExpCutoffWidths * width_;
    case PulseKind::Gaussian: return kGaussCutoffSigmas * sigma();
  }
  return 0.0;
}

double PulseShape::value(double t) const {
  switch (kind_) {
    case PulseKind::Rectangular:
      // half-open support so a grid with dt | w sees exactly w/dt samples
      return (t >= -0.5 * width_ && t < 0.5 * width_) ? 1.0 / width_ : 0.0;
    case PulseKind::OneSidedExponential:
      return (t >= 0.0 && t <= support_hi()) ? std::exp(-t / width_) / width_ : 0.0;
    case PulseKind::Gaussian: {
      const double s = sigma();
      if (std::abs(t) > kGaussCutoffSigmas * s) return 0.0;
      return normal_pdf(t, s);
    }
  }
  return 0.0;
}

double PulseShape::correlation(const PulseShape& other, double tau) const {
  const PulseKind k1 = kind_, k2 = other.kind_;
  if (k1 == PulseKind::Rectangular && k2 == PulseKind::Rectangular) {
    const double w1 = width_, w2 = other.width_;
    const double overlap = std::min({w1, w2, 0.5 * (w1 + w2) - std::abs(tau)});
    return overlap > 0.0 ? overlap / (w1 * w2) : 0.0;
  }
  if (k1 == PulseKind::Gaussian && k2 == PulseKind::Gaussian) {
    const double s1 = sigma(), s2 = other.sigma();
    return normal_pdf(tau, std::sqrt(s1 * s1 + s2 * s2));
  }
  if (k1 == PulseKind::OneSidedExponential && k2 == PulseKind::OneSidedExponential) {
    const double a = width_, b = other.width_;
    return (tau >= 0.0 ? std::exp(-tau / b) : std::exp(tau / a)) / (a + b);
  }
  if (k1 == PulseKind::Rectangular && k2 == PulseKind::Gaussian) {
    const double w = width_, s = other.sigma();
    return (normal_cdf((tau + 0.5 * w) / s) - normal_cdf((tau - 0.5 * w) / s)) / w;
  }
  if (k1 == PulseKind::Rectangular && k2 == PulseKind::OneSidedExponential)
    return corr_rect_exp(width_, other.width_, tau);
  if (k1 == PulseKind::Gaussian && k2 == PulseKind::OneSidedExponential)
    return corr_gauss_exp(sigma(), other.width_, tau);
  // remaining combinations via F12(tau) = F21(-tau)
  return other.correlation(*this, -tau);
}

double PulseShape::numeric_area(std::size_t n_per_piece) const {
  // Simpson on each smooth piece; pieces are bounded by the support edges.
  auto simpson = [this](double a, double b, std::size_t n) {
    if (n % 2) ++n;
    const double h = (b - a) / static_cast<double>(n);
    double s = value(a) + value(b);
    for (std::size_t i = 1; i < n; ++i)
      s += value(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  if (kind_ == PulseKind::Rectangular) {
    // piecewise constant: area is exact on the support
    return (support_hi() - support_lo()) / width_;
  }
  return simpson(support_lo(), support_hi(), n_per_piece);
}

}  // namespace tbcal
