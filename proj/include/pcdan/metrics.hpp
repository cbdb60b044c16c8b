#pragma once

#include <cstddef>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>

#include "pcdan/track_table.hpp"

namespace pcdan {

/// CLEAR-MOT summary. MOTP is the mean matched center distance in meters.
struct MotReport {
  double mota = 0.0;
  double motp = 0.0;
  std::size_t id_switches = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
  std::size_t gt_count = 0;
  std::size_t matches = 0;
  double seconds_per_frame = 0.0;
};

inline constexpr double kDefaultMatchRadius = 1.0;

/// Inclusive frame interval both inputs must lie in.
struct FrameRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Per frame: keep last frame's correspondences that are still within the
/// gate, then match the rest by minimum total center distance (Hungarian,
/// pairs farther than match_radius are never matched). A ground-truth object
/// matched to a different prediction id than at its previous match counts as
/// an identity switch.
///
/// `range` defaults to the span of the ground-truth frames; rows outside it
/// raise InvalidArgument. An empty ground truth raises UndefinedMetricError.
MotReport evaluate(std::span<const TrackRow> gt, std::span<const TrackRow> pred,
                   double match_radius = kDefaultMatchRadius,
                   std::optional<FrameRange> range = std::nullopt);

std::string format_report_table(const MotReport& report);
nlohmann::json report_to_json(const MotReport& report);
MotReport report_from_json(const nlohmann::json& j);

}  // namespace pcdan
