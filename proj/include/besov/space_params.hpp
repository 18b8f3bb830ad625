#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace besov {

/// Distinguished value for an infinite exponent (p, q or r = ∞).
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_inf(double v) { return v == kInf; }

/// (x)_+ = max(x, 0)
inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

/// 1/p with 1/∞ = 0.
inline double reciprocal(double p) { return is_inf(p) ? 0.0 : 1.0 / p; }

enum class NormMode { isotropic, mixed };

/// Smoothness/integrability parameters of a (mixed) Besov ball together with
/// the spline order and dimension used to represent it.
///
/// In the mixed case `s` plays the role of the mixed smoothness α.
struct SpaceParams {
  double s = 1.0;
  double p = 2.0;
  double q = 2.0;
  double r = 2.0;
  int d = 1;
  int m = 2;
  bool mixed = false;

  NormMode mode() const { return mixed ? NormMode::mixed : NormMode::isotropic; }

  /// δ = d(1/p − 1/r)_+ (isotropic) or (1/p − 1/r)_+ (mixed).
  double delta() const;

  /// ν = (s − δ)/(2δ); +∞ when δ = 0 (the adaptive tail is empty then).
  double nu() const;

  /// 1/ν with 1/∞ = 0.
  double inv_nu() const;

  /// Throws std::invalid_argument when the regime violates
  /// s > d(1/p − 1/r)_+ (mixed: s > (1/p − 1/r)_+) or 0 < s < min(m, m − 1 + 1/p).
  void validate() const;

  /// Same checks, without throwing; returns an empty string when valid.
  std::string check() const;
};

}  // namespace besov
