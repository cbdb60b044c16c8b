#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcdan/association.hpp"
#include "pcdan/ingestion.hpp"
#include "pcdan/model_io.hpp"
#include "pcdan/track_table.hpp"

namespace pcdan {

struct TrackerConfig {
  IngestConfig ingest;
  std::size_t points_per_object = kDefaultPointsPerObject;
  std::uint64_t seed = 0;
  double birth_threshold = kDefaultBirthThreshold;
  std::size_t threads = 1;
};

struct TrackingResult {
  TrackSet tracks;
  /// Admitted frames; TrackEntry::slot indexes their detections.
  std::vector<Frame> frames;
  double seconds_per_frame = 0.0;
};

/// Online tracking over consecutive frame pairs: admit, crop, featurize,
/// predict affinities, fuse scores, assign and update tracks.
TrackingResult track_sequence(const SequenceSource& src, const ModelWeights& model,
                              const TrackerConfig& cfg);

/// One row per (frame, tracked detection).
std::vector<TrackRow> tracking_rows(const TrackingResult& result);

}  // namespace pcdan
