#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdan/cropper.hpp"
#include "pcdan/dense.hpp"

namespace pcdan {

using FeatureVec = Eigen::VectorXd;

/// Per-object features for one frame. Row i is slot i; rows at or beyond
/// `count` are zero.
struct FeatureSet {
  Eigen::MatrixXd features;
  std::size_t count = 0;
  std::size_t frame_index = 0;

  std::size_t capacity() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// PointNet-lite: a shared per-point MLP (ReLU between layers, none after the
/// last) followed by max pooling over the valid points. No T-nets.
struct PointNetWeights {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  /// Throws ConfigError on a broken chain or a first layer that does not take 3 inputs.
  void validate() const;

  /// 3 -> 64 -> 128 -> 512 by default.
  static PointNetWeights random(std::uint64_t seed,
                                std::span<const std::size_t> widths = default_widths());
  static std::span<const std::size_t> default_widths();

  friend bool operator==(const PointNetWeights&, const PointNetWeights&) = default;
};

/// Feature of one object; the zero vector when the crop has no valid points.
FeatureVec pointnet_forward(const ObjectPoints& obj, const PointNetWeights& w);

/// Slot i holds pointnet_forward(objs[i]); rows beyond objs.size() are zero.
FeatureSet featurize_frame(std::span<const ObjectPoints> objs, const PointNetWeights& w,
                           std::size_t capacity, std::size_t frame_index = 0,
                           std::size_t threads = 1);

}  // namespace pcdan
