#pragma once

#include <array>

namespace crowdforge {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

// 2x3 affine map in image coordinates (x right, y down):
//   x' = a*x + b*y + tx
//   y' = c*x + d*y + ty
struct Affine {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static Affine identity() { return {}; }
  static Affine translation(double dx, double dy) { return {1.0, 0.0, dx, 0.0, 1.0, dy}; }
  static Affine linear(double a, double b, double c, double d) { return {a, b, 0.0, c, d, 0.0}; }
  static Affine rotation_degrees(double degrees);

  Point apply(Point p) const noexcept { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  double linear_determinant() const noexcept { return a * d - b * c; }
  // Throws ShapeError on a singular linear part.
  Affine inverse() const;

  // (lhs * rhs).apply(p) == lhs.apply(rhs.apply(p))
  friend Affine operator*(const Affine& lhs, const Affine& rhs) noexcept {
    return {lhs.a * rhs.a + lhs.b * rhs.c, lhs.a * rhs.b + lhs.b * rhs.d, lhs.a * rhs.tx + lhs.b * rhs.ty + lhs.tx,
            lhs.c * rhs.a + lhs.d * rhs.c, lhs.c * rhs.b + lhs.d * rhs.d, lhs.c * rhs.tx + lhs.d * rhs.ty + lhs.ty};
  }

  std::array<double, 6> coefficients() const noexcept { return {a, b, tx, c, d, ty}; }
  bool operator==(const Affine&) const = default;
};

}  // namespace crowdforge
