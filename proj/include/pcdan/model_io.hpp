#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pcdan/affinity.hpp"
#include "pcdan/featurizer.hpp"

namespace pcdan {

/// Weights file layout, all little-endian:
///   "PNW1" u32 layer_count { u32 out, u32 in, f32 W[out*in] (row-major), f32 b[out] }*
///   optional: "CMP1" u32 layer_count {same layer encoding}* f32 dummy_score
/// Values are stored as f32; doubles are rounded on save.
struct ModelWeights {
  PointNetWeights pointnet;
  std::optional<CompressionNet> compression;
};

std::string encode_model(const ModelWeights& model);
/// Throws FormatError on bad magic, truncation, broken dimension chains or trailing bytes.
ModelWeights decode_model(const std::string& bytes, const std::string& source_name = "weights");

/// PointNet section only. A trailing compression section is accepted and ignored.
PointNetWeights load_weights(const std::filesystem::path& path);
void save_weights(const PointNetWeights& w, const std::filesystem::path& path);

ModelWeights load_model(const std::filesystem::path& path);
void save_model(const ModelWeights& model, const std::filesystem::path& path);

}  // namespace pcdan
