#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcdan/geometry.hpp"

namespace pcdan {

/// Fixed-size point set in the box frame. Entries at or beyond valid_count
/// are zero padding.
struct ObjectPoints {
  std::vector<Point3> points;
  std::size_t valid_count = 0;

  friend bool operator==(const ObjectPoints&, const ObjectPoints&) = default;
};

inline constexpr std::size_t kDefaultPointsPerObject = 128;

/// Seed for one detection slot of one frame, so crops are reproducible per slot.
std::uint64_t object_seed(std::uint64_t seed, std::size_t frame_index, std::size_t slot);

/// Indices (ascending) of the cloud points that fall inside `box`, subsampled
/// without replacement to at most `max_count` entries.
std::vector<std::size_t> select_interior(const PointCloud& cloud, const OrientedBox3& box,
                                         std::size_t max_count, std::uint64_t seed);

ObjectPoints crop_object(const PointCloud& cloud, const OrientedBox3& box, std::size_t points,
                         std::uint64_t seed);

/// One crop per detection, in detection order.
std::vector<ObjectPoints> crop_frame(const Frame& frame, std::size_t points, std::uint64_t seed,
                                     std::size_t threads = 1);

}  // namespace pcdan
