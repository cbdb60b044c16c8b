#include "pcdan/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "pcdan/cropper.hpp"
#include "pcdan/error.hpp"
#include "pcdan/parallel.hpp"

namespace pcdan {

namespace {

constexpr std::uint64_t kPointNetStream = 0x504E5731ull;     // "PNW1"
constexpr std::uint64_t kCompressionStream = 0x434D5031ull;  // "CMP1"
constexpr std::uint64_t kSamplerStream = 0x53414D50ull;

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.l_f) && std::isfinite(l.l_b) && std::isfinite(l.l_c) &&
         std::isfinite(l.l_a) && std::isfinite(l.total);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("train: learning rate must be a non-negative finite number");
  }
  if (batch_pairs < 1) throw InvalidArgument("train: batch must hold at least one pair");
  if (gap_min < 1 || gap_max < gap_min) {
    throw InvalidArgument("train: frame gap range must satisfy 1 <= min <= max");
  }
  if (points_per_object < 1) throw InvalidArgument("train: points per object must be positive");
  ingest.validate();
}

ModelWeights initial_model(std::uint64_t seed) {
  ModelWeights m;
  m.pointnet = PointNetWeights::random(seed ^ kPointNetStream);
  m.compression = CompressionNet::random(seed ^ kCompressionStream);
  return m;
}

PairGradient pair_gradient(const CompressionNet& net, const LabeledPair& pair) {
  const PairTensor tensor = build_pair_tensor(*pair.prev, *pair.cur);
  const CompressionTrace trace = compression_forward_trace(tensor, net);
  const LossGradients lg = loss_gradients(trace.m, net.dummy_score, pair.gt);
  PairGradient out;
  out.loss = lg.loss;
  out.grad = compression_backward(tensor, net, trace, lg.d_m());
  out.grad.dummy_score = lg.d_dummy;
  return out;
}

TrainStepResult train_step(const CompressionNet& net, std::span<const LabeledPair> batch,
                           const TrainConfig& cfg) {
  if (batch.empty()) {
    throw InvalidArgument("train_step: empty batch");
  }
  std::vector<PairGradient> parts(batch.size());
  parallel_for(batch.size(), cfg.threads,
               [&](std::size_t k) { parts[k] = pair_gradient(net, batch[k]); });

  // Fixed-order reduction keeps the result independent of the thread count.
  CompressionGradient total = CompressionGradient::zeros_like(net);
  double l_f = 0.0, l_b = 0.0, l_c = 0.0, l_a = 0.0;
  for (const PairGradient& p : parts) {
    total += p.grad;
    l_f += p.loss.l_f;
    l_b += p.loss.l_b;
    l_c += p.loss.l_c;
    l_a += p.loss.l_a;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total *= inv;

  TrainStepResult out;
  out.loss = loss_total(l_f * inv, l_b * inv, l_c * inv, l_a * inv);
  if (!finite(out.loss)) {
    throw DivergenceError(fmt::format("non-finite loss (l_f={} l_b={} l_c={} l_a={})",
                                      out.loss.l_f, out.loss.l_b, out.loss.l_c, out.loss.l_a));
  }
  if (!total.all_finite()) {
    throw DivergenceError(fmt::format("non-finite gradient at loss {}", out.loss.total));
  }
  out.net = net;
  if (cfg.learning_rate == 0.0) {
    return out;
  }
  for (std::size_t l = 0; l < out.net.layers.size(); ++l) {
    out.net.layers[l].weight -= cfg.learning_rate * total.layers[l].weight;
    out.net.layers[l].bias -= cfg.learning_rate * total.layers[l].bias;
  }
  out.net.dummy_score -= cfg.learning_rate * total.dummy_score;
  return out;
}

TrainingData prepare_training_data(std::span<const SequenceSource> sources,
                                   const PointNetWeights& pointnet, const TrainConfig& cfg) {
  TrainingData data;
  for (const SequenceSource& src : sources) {
    std::vector<Frame> frames;
    for (std::size_t f = 0; f < src.frame_count(); ++f) {
      frames.push_back(admit_detections(src.load_frame(f), cfg.ingest));
      data.capacity = std::max(data.capacity, frames.back().detections.size());
    }
    data.frames.push_back(std::move(frames));
  }
  for (const auto& frames : data.frames) {
    std::vector<FeatureSet> feats;
    for (const Frame& frame : frames) {
      const auto crops = crop_frame(frame, cfg.points_per_object, cfg.seed, cfg.threads);
      feats.push_back(featurize_frame(crops, pointnet, data.capacity, frame.index, cfg.threads));
    }
    data.features.push_back(std::move(feats));
  }
  return data;
}

PairSampler::PairSampler(const TrainingData& data, const TrainConfig& cfg)
    : data_(data), cfg_(cfg), rng_(cfg.seed ^ kSamplerStream) {
  for (std::size_t s = 0; s < data.frames.size(); ++s) {
    if (data.frames[s].size() >= 2) {
      eligible_.push_back(s);
    }
  }
  if (eligible_.empty()) {
    throw InvalidArgument("train: no training sequence has two or more frames");
  }
}

std::vector<LabeledPair> PairSampler::next_batch() {
  std::vector<LabeledPair> batch;
  for (std::size_t b = 0; b < cfg_.batch_pairs; ++b) {
    const std::size_t s =
        eligible_[std::uniform_int_distribution<std::size_t>(0, eligible_.size() - 1)(rng_)];
    const std::size_t frames = data_.frames[s].size();
    const std::size_t hi = std::min(cfg_.gap_max, frames - 1);
    const std::size_t lo = std::min(cfg_.gap_min, hi);
    const std::size_t gap = std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(gap, frames - 1)(rng_);
    LabeledPair pair;
    pair.prev = &data_.features[s][t - gap];
    pair.cur = &data_.features[s][t];
    pair.gt = build_gt(data_.frames[s][t - gap], data_.frames[s][t], data_.capacity);
    batch.push_back(std::move(pair));
  }
  return batch;
}

ModelWeights train(std::span<const SequenceSource> sources, const TrainConfig& cfg,
                   ModelWeights init, std::ostream* log) {
  cfg.validate();
  init.pointnet.validate();
  if (!init.compression) {
    init.compression = CompressionNet::random(cfg.seed ^ kCompressionStream);
  }
  init.compression->validate();
  if (init.compression->input_dim() != 2 * init.pointnet.output_dim()) {
    throw ConfigError("train: compression net input width does not match paired feature width");
  }
  if (log) {
    *log << kLossLogHeader << '\n';
  }
  if (cfg.steps == 0) {
    return init;
  }

  const TrainingData data = prepare_training_data(sources, init.pointnet, cfg);
  PairSampler sampler(data, cfg);
  CompressionNet net = *init.compression;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::vector<LabeledPair> batch = sampler.next_batch();
    TrainStepResult r;
    try {
      r = train_step(net, batch, cfg);
    } catch (const DivergenceError& e) {
      throw DivergenceError(fmt::format("training diverged at step {}: {}", step, e.what()));
    }
    if (log) {
      *log << fmt::format("{},{},{},{},{},{}\n", step, r.loss.l_f, r.loss.l_b, r.loss.l_c,
                          r.loss.l_a, r.loss.total);
    }
    net = std::move(r.net);
  }
  init.compression = std::move(net);
  return init;
}

}  // namespace pcdan
