#include "crowdforge/affine.hpp"

#include <cmath>
#include <numbers>

#include "crowdforge/errors.hpp"

namespace crowdforge {

Affine Affine::rotation_degrees(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(r);
  const double sn = std::sin(r);
  return linear(cs, -sn, sn, cs);
}

Affine Affine::inverse() const {
  const double det = linear_determinant();
  if (det == 0.0 || !std::isfinite(det)) {
    throw ShapeError("affine transform is singular");
  }
  const double ia = d / det;
  const double ib = -b / det;
  const double ic = -c / det;
  const double id = a / det;
  return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
}

}  // namespace crowdforge
