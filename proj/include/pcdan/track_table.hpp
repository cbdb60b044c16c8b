#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "pcdan/geometry.hpp"
#include "pcdan/ingestion.hpp"

namespace pcdan {

/// One identity-labelled box in one frame; the row type of track CSV files.
struct TrackRow {
  std::size_t frame = 0;
  std::uint32_t track_id = 0;
  OrientedBox3 box;
  double confidence = 1.0;

  friend bool operator==(const TrackRow&, const TrackRow&) = default;
};

inline constexpr std::string_view kTrackCsvHeader = "frame,track_id,cx,cy,cz,l,w,h,yaw,conf";

/// Sorts by (frame, track_id) and renders the CSV including the header.
std::string format_track_csv(std::vector<TrackRow> rows);
std::vector<TrackRow> parse_track_csv(std::istream& in, const std::string& source_name);
std::vector<TrackRow> read_track_csv(const std::filesystem::path& path);

/// Ground-truth rows of a labelled sequence: every stored detection that
/// carries a gt_id, with the gt_id as track id. No confidence filtering.
std::vector<TrackRow> ground_truth_rows(const SequenceSource& src);

}  // namespace pcdan
