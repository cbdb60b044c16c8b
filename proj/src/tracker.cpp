#include "pcdan/tracker.hpp"

#include <chrono>
#include <numeric>

#include "pcdan/affinity.hpp"
#include "pcdan/cropper.hpp"
#include "pcdan/error.hpp"
#include "pcdan/featurizer.hpp"

namespace pcdan {

TrackingResult track_sequence(const SequenceSource& src, const ModelWeights& model,
                              const TrackerConfig& cfg) {
  cfg.ingest.validate();
  if (!model.compression) {
    throw ConfigError("track: model has no compression network; train one first");
  }
  model.pointnet.validate();
  model.compression->validate();

  const auto start = std::chrono::steady_clock::now();
  TrackingResult result;
  FeatureSet prev_features;
  for (std::size_t f = 0; f < src.frame_count(); ++f) {
    Frame frame = admit_detections(src.load_frame(f), cfg.ingest);
    const auto crops = crop_frame(frame, cfg.points_per_object, cfg.seed, cfg.threads);
    FeatureSet features = featurize_frame(crops, model.pointnet, cfg.ingest.max_objects, f, cfg.threads);

    AssignmentResult assignment;
    if (f == 0 || prev_features.count == 0) {
      assignment.births.resize(features.count);
      std::iota(assignment.births.begin(), assignment.births.end(), std::size_t{0});
    } else {
      const AffinityMatrices aff = predict_affinity(prev_features, features, *model.compression);
      assignment = solve_assignment(score_matrix(aff), cfg.birth_threshold);
    }
    result.tracks = update_tracks(std::move(result.tracks), assignment, f);
    result.frames.push_back(std::move(frame));
    prev_features = std::move(features);
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (src.frame_count() > 0) {
    result.seconds_per_frame = elapsed.count() / static_cast<double>(src.frame_count());
  }
  return result;
}

std::vector<TrackRow> tracking_rows(const TrackingResult& result) {
  std::vector<TrackRow> rows;
  for (const auto& [id, entries] : result.tracks.tracks) {
    for (const TrackEntry& e : entries) {
      const Detection& d = result.frames.at(e.frame).detections.at(e.slot);
      rows.push_back({e.frame, id, d.box, d.confidence});
    }
  }
  return rows;
}

}  // namespace pcdan
