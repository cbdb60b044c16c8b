#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string_view>
#include <span>
#include <vector>

#include "pcdan/affinity.hpp"
#include "pcdan/featurizer.hpp"
#include "pcdan/ingestion.hpp"
#include "pcdan/losses.hpp"
#include "pcdan/model_io.hpp"

namespace pcdan {

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t steps = 500;
  std::size_t batch_pairs = 4;
  std::uint64_t seed = 0;
  /// Frame pairs (t - n, t) are drawn with n uniform in [gap_min, gap_max].
  std::size_t gap_min = 1;
  std::size_t gap_max = 3;
  std::size_t points_per_object = kDefaultPointsPerObject;
  std::size_t threads = 1;
  IngestConfig ingest;

  void validate() const;
};

/// A frame pair with its ground truth. The feature sets are owned elsewhere.
struct LabeledPair {
  const FeatureSet* prev = nullptr;
  const FeatureSet* cur = nullptr;
  GroundTruthAssignment gt;
};

struct TrainStepResult {
  CompressionNet net;
  /// Batch-mean loss before the update.
  LossBreakdown loss;
};

/// Loss and parameter gradient for one pair.
struct PairGradient {
  LossBreakdown loss;
  CompressionGradient grad;
};
PairGradient pair_gradient(const CompressionNet& net, const LabeledPair& pair);

/// One plain gradient-descent step on the batch-mean loss. Throws
/// DivergenceError when the loss or gradient is not finite.
TrainStepResult train_step(const CompressionNet& net, std::span<const LabeledPair> batch,
                           const TrainConfig& cfg);

/// Admitted frames and frozen PointNet features of every training sequence.
/// Feature sets use the smallest capacity that holds every frame; padding
/// capacity does not change losses or gradients.
struct TrainingData {
  std::vector<std::vector<Frame>> frames;
  std::vector<std::vector<FeatureSet>> features;
  std::size_t capacity = 1;
};

TrainingData prepare_training_data(std::span<const SequenceSource> sources,
                                   const PointNetWeights& pointnet, const TrainConfig& cfg);

/// Seeded sampler of labelled pairs from the training data.
class PairSampler {
 public:
  PairSampler(const TrainingData& data, const TrainConfig& cfg);
  std::vector<LabeledPair> next_batch();

 private:
  const TrainingData& data_;
  TrainConfig cfg_;
  std::vector<std::size_t> eligible_;
  std::mt19937_64 rng_;
};

inline constexpr std::string_view kLossLogHeader = "step,l_f,l_b,l_c,l_a,total";

/// Fits the compression net and dummy score; PointNet stays frozen. A missing
/// compression net in `init` is drawn He-uniform from cfg.seed. When `log`
/// is set, one CSV row per step is written after kLossLogHeader.
ModelWeights train(std::span<const SequenceSource> sources, const TrainConfig& cfg,
                   ModelWeights init, std::ostream* log = nullptr);

/// Initial model for a seed: PointNet and compression net drawn from
/// independent streams of the same seed.
ModelWeights initial_model(std::uint64_t seed);

}  // namespace pcdan
