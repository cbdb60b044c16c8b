#include "pcdan/geometry.hpp"

#include <cmath>
#include <numbers>

#include "pcdan/error.hpp"

namespace pcdan {

bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

void validate_box(const OrientedBox3& box) {
  if (!is_finite(box.center) || !std::isfinite(box.yaw)) {
    throw DataError("box has non-finite center or yaw");
  }
  if (!(box.length > 0.0) || !(box.width > 0.0) || !(box.height > 0.0)) {
    throw DataError("box extents must be positive");
  }
}

Point3 to_box_frame(const OrientedBox3& box, const Point3& p) {
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, p.z - box.center.z};
}

Point3 from_box_frame(const OrientedBox3& box, const Point3& local) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  return {box.center.x + c * local.x - s * local.y, box.center.y + s * local.x + c * local.y,
          box.center.z + local.z};
}

bool box_contains(const OrientedBox3& box, const Point3& p) {
  const Point3 q = to_box_frame(box, p);
  return std::abs(q.x) <= 0.5 * box.length && std::abs(q.y) <= 0.5 * box.width &&
         std::abs(q.z) <= 0.5 * box.height;
}

double yaw_normalize(double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidArgument("yaw_normalize: non-finite angle");
  }
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (theta >= -kPi && theta < kPi) {
    return theta;
  }
  double r = std::fmod(theta + kPi, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  r -= kPi;
  // Rounding in the shift can land exactly on +pi.
  if (r >= kPi) {
    r -= kTwoPi;
  }
  if (r < -kPi) {
    r = -kPi;
  }
  return r;
}

}  // namespace pcdan
