#include "pcdan/cropper.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "pcdan/error.hpp"
#include "pcdan/parallel.hpp"

namespace pcdan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t object_seed(std::uint64_t seed, std::size_t frame_index, std::size_t slot) {
  const std::uint64_t h =
      splitmix64(splitmix64(static_cast<std::uint64_t>(frame_index)) ^ static_cast<std::uint64_t>(slot));
  return seed ^ h;
}

std::vector<std::size_t> select_interior(const PointCloud& cloud, const OrientedBox3& box,
                                         std::size_t max_count, std::uint64_t seed) {
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (box_contains(box, cloud.points[i])) {
      inside.push_back(i);
    }
  }
  if (inside.size() <= max_count) {
    return inside;
  }
  // Partial Fisher-Yates: the first max_count entries become a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < max_count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, inside.size() - 1);
    std::swap(inside[k], inside[pick(rng)]);
  }
  inside.resize(max_count);
  std::sort(inside.begin(), inside.end());
  return inside;
}

ObjectPoints crop_object(const PointCloud& cloud, const OrientedBox3& box, std::size_t points,
                         std::uint64_t seed) {
  if (points < 1) {
    throw InvalidArgument("crop_object: points per object must be at least 1");
  }
  ObjectPoints out;
  out.points.assign(points, Point3{});
  const auto selected = select_interior(cloud, box, points, seed);
  out.valid_count = selected.size();
  for (std::size_t k = 0; k < selected.size(); ++k) {
    out.points[k] = to_box_frame(box, cloud.points[selected[k]]);
  }
  return out;
}

std::vector<ObjectPoints> crop_frame(const Frame& frame, std::size_t points, std::uint64_t seed,
                                     std::size_t threads) {
  std::vector<ObjectPoints> out(frame.detections.size());
  parallel_for(out.size(), threads, [&](std::size_t slot) {
    out[slot] = crop_object(frame.cloud, frame.detections[slot].box, points,
                            object_seed(seed, frame.index, slot));
  });
  return out;
}

}  // namespace pcdan
