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

enum class ShapeKind { BoxShell, SphereShell, CylinderShell };

struct SynthEvent {
  enum class Kind { Leave, Enter };
  Kind kind = Kind::Enter;
  std::size_t frame = 0;
  /// gt_id of the object that leaves; unused for Enter.
  std::uint32_t object = 0;
};

struct SynthConfig {
  std::size_t n_objects = 3;
  std::size_t n_frames = 20;
  std::uint64_t seed = 0;
  std::size_t points_per_object = 200;
  std::vector<ShapeKind> shape_kinds = {ShapeKind::BoxShell, ShapeKind::SphereShell,
                                        ShapeKind::CylinderShell};
  /// meters per frame
  double speed_min = 0.05;
  double speed_max = 0.4;
  Point3 arena_min{-25.0, -25.0, 0.0};
  Point3 arena_max{25.0, 25.0, 4.0};
  std::vector<SynthEvent> events;
  std::string name;

  void validate() const;
};

/// key=value lines: objects, frames, seed, points, shapes (box,sphere,cylinder),
/// speed_min, speed_max, arena_min / arena_max (x,y,z), leave (frame:id, repeatable),
/// enter (frame, repeatable), name. '#' starts a comment line.
SynthConfig parse_synth_config(std::istream& in, const std::string& source_name);
void apply_synth_setting(SynthConfig& cfg, const std::string& key, const std::string& value);

/// Writes a labelled sequence: objects are shape shells of distinct sizes
/// moving at constant speed (reflecting at the arena walls), kept at least
/// twice the larger box diagonal apart. Surface points are resampled every
/// frame; detections are the true boxes with confidence 1, in shuffled order.
SequenceSource generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

struct PerturbConfig {
  /// Per-axis Gaussian jitter of true box centers, meters.
  double det_noise_sigma = 0.0;
  /// Per true detection: probability of injecting one false box.
  double fp_rate = 0.0;
  /// Per true detection: probability of dropping it.
  double fn_rate = 0.0;
  /// Injected boxes draw confidence uniformly from [fp_conf_min, fp_conf_max).
  double fp_conf_min = 0.0;
  double fp_conf_max = 0.4;
  std::uint64_t seed = 0;
  Point3 arena_min{-25.0, -25.0, 0.0};
  Point3 arena_max{25.0, 25.0, 4.0};

  void validate() const;
  bool is_identity() const { return det_noise_sigma == 0.0 && fp_rate == 0.0 && fn_rate == 0.0; }
};

/// Writes a noisy copy of `src` (point clouds unchanged). Injected boxes have
/// no gt_id. out_dir may equal src.root().
SequenceSource perturb(const SequenceSource& src, const PerturbConfig& cfg,
                       const std::filesystem::path& out_dir);

}  // namespace pcdan
