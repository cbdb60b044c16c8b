#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace pcdan {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct PointCloud {
  std::vector<Point3> points;
  std::size_t frame_index = 0;
};

/// Gravity-aligned box: center, extents along its local x/y/z axes, and a
/// rotation about the world z axis.
struct OrientedBox3 {
  Point3 center;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;

  friend bool operator==(const OrientedBox3&, const OrientedBox3&) = default;
};

struct Detection {
  OrientedBox3 box;
  double confidence = 1.0;
  std::optional<std::uint32_t> gt_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Frame {
  std::size_t index = 0;
  PointCloud cloud;
  std::vector<Detection> detections;
  /// Whether the detection file carries the optional gt_id column.
  bool labeled = false;
};

bool is_finite(const Point3& p);

/// Throws DataError if extents are not positive or any field is non-finite.
void validate_box(const OrientedBox3& box);

/// Maps a world point into the box frame: translate by -center, rotate by -yaw.
Point3 to_box_frame(const OrientedBox3& box, const Point3& p);

/// Inverse of to_box_frame.
Point3 from_box_frame(const OrientedBox3& box, const Point3& local);

/// Closed-box containment test (points on a face count as inside).
bool box_contains(const OrientedBox3& box, const Point3& p);

/// Reduces an angle to [-pi, pi). Values already in range are returned as-is.
double yaw_normalize(double theta);

}  // namespace pcdan
