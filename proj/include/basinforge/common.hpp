#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace basinforge {

using cplx = std::complex<double>;

/// A point of C^2, written (z, w).
struct Point {
  cplx z{};
  cplx w{};

  double norm() const { return std::sqrt(std::norm(z) + std::norm(w)); }
  bool finite() const {
    return std::isfinite(z.real()) && std::isfinite(z.imag()) && std::isfinite(w.real()) &&
           std::isfinite(w.imag());
  }

  friend Point operator+(Point a, Point b) { return {a.z + b.z, a.w + b.w}; }
  friend Point operator-(Point a, Point b) { return {a.z - b.z, a.w - b.w}; }
  friend Point operator*(cplx s, Point a) { return {s * a.z, s * a.w}; }
  friend Point operator*(double s, Point a) { return {s * a.z, s * a.w}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return (a - b).norm(); }

/// Raised when a numeric precondition or residual check fails.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when input violates a documented precondition (e.g. D^{k+1} >= C).
class PreconditionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Complex 2x2 matrix acting on column vectors (z, w).
struct Mat2 {
  cplx a11{1.0}, a12{}, a21{}, a22{1.0};

  static Mat2 identity() { return {}; }
  static Mat2 diagonal(cplx a, cplx b) { return {a, 0.0, 0.0, b}; }

  cplx det() const { return a11 * a22 - a12 * a21; }
  Mat2 adjoint() const { return {std::conj(a11), std::conj(a21), std::conj(a12), std::conj(a22)}; }
  Mat2 inverse() const {
    const cplx d = det();
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
  }
  Point apply(Point p) const { return {a11 * p.z + a12 * p.w, a21 * p.z + a22 * p.w}; }
  double max_abs() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
  }

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a11 * y.a11 + x.a12 * y.a21, x.a11 * y.a12 + x.a12 * y.a22,
            x.a21 * y.a11 + x.a22 * y.a21, x.a21 * y.a12 + x.a22 * y.a22};
  }
  friend Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.a11 - y.a11, x.a12 - y.a12, x.a21 - y.a21, x.a22 - y.a22};
  }
};

/// 64-bit FNV-1a; used for spec hashes in sidecars and manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

/// Van der Corput radical inverse, the building block of Halton sequences.
inline double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

/// Deterministic quasi-random point on the sphere of radius `r` in C^2 = R^4.
inline Point halton_sphere_point(std::uint64_t index, double r) {
  constexpr double two_pi = 6.283185307179586;
  const double u1 = radical_inverse(index + 1, 2);
  const double u2 = radical_inverse(index + 1, 3);
  const double u3 = radical_inverse(index + 1, 5);
  const double m1 = std::sqrt(u1);
  const double m2 = std::sqrt(1.0 - u1);
  return {r * std::polar(m1, two_pi * u2), r * std::polar(m2, two_pi * u3)};
}

}  // namespace basinforge
