#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "pcdan/geometry.hpp"

namespace pcdan {

struct IngestConfig {
  double confidence_threshold = 0.4;
  /// Per-frame object capacity N_m.
  std::size_t max_objects = 100;

  void validate() const;
};

/// On-disk sequence:
///   <root>/sequence.meta           frame_count=<n> [name=<str>]
///   <root>/frames/<i>.xyz          little-endian f32 (x,y,z) triples
///   <root>/detections/<i>.csv      frame,conf,cx,cy,cz,l,w,h,yaw[,gt_id]
class SequenceSource {
 public:
  /// Reads sequence.meta and checks that every frame's files exist.
  static SequenceSource open(const std::filesystem::path& root, IngestConfig config = {});

  const std::filesystem::path& root() const { return root_; }
  std::size_t frame_count() const { return frame_count_; }
  const std::string& name() const { return name_; }
  const IngestConfig& config() const { return config_; }

  /// Frame exactly as stored, before admission filtering.
  Frame load_frame(std::size_t index) const;

 private:
  SequenceSource(std::filesystem::path root, std::size_t frame_count, std::string name,
                 IngestConfig config);

  std::filesystem::path root_;
  std::size_t frame_count_ = 0;
  std::string name_;
  IngestConfig config_;
};

/// Keeps detections with confidence strictly above the threshold, ordered by
/// descending confidence (stable w.r.t. file order), truncated to max_objects.
Frame admit_detections(Frame frame, const IngestConfig& cfg);

std::filesystem::path point_file_path(const std::filesystem::path& root, std::size_t index);
std::filesystem::path detection_file_path(const std::filesystem::path& root, std::size_t index);

PointCloud read_point_file(const std::filesystem::path& path, std::size_t frame_index);
void write_point_file(const std::filesystem::path& path, const PointCloud& cloud);

struct DetectionFile {
  std::vector<Detection> detections;
  bool labeled = false;
};

/// `source_name` only decorates error messages.
DetectionFile parse_detections(std::istream& in, std::size_t frame_index,
                               const std::string& source_name);
std::string format_detections(const std::vector<Detection>& detections, std::size_t frame_index,
                              bool labeled);

/// Writes the point and detection files for one frame, creating directories.
void write_frame(const std::filesystem::path& root, const Frame& frame);
void write_sequence_meta(const std::filesystem::path& root, std::size_t frame_count,
                         const std::string& name = {});

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

}  // namespace pcdan
