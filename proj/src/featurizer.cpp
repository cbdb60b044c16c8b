#include "pcdan/featurizer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <limits>

#include "pcdan/error.hpp"
#include "pcdan/parallel.hpp"

namespace pcdan {

namespace {

constexpr std::array<std::size_t, 4> kDefaultWidths = {3, 64, 128, 512};

// y = W x + b accumulated over inputs in ascending order, so each output
// depends only on its own point and never on how many points are processed.
void dense_apply(const DenseLayer& layer, const double* x, double* y) {
  const Eigen::Index out = layer.weight.rows();
  const Eigen::Index in = layer.weight.cols();
  const double* w = layer.weight.data();  // column-major: column k holds W(:, k)
  for (Eigen::Index o = 0; o < out; ++o) {
    y[o] = layer.bias[o];
  }
  for (Eigen::Index k = 0; k < in; ++k) {
    const double xk = x[k];
    const double* col = w + k * out;
    for (Eigen::Index o = 0; o < out; ++o) {
      y[o] += col[o] * xk;
    }
  }
}

}  // namespace

void PointNetWeights::validate() const {
  validate_chain(layers, "pointnet");
  if (input_dim() != 3) {
    throw ConfigError(fmt::format("pointnet: first layer takes {} inputs, expected 3", input_dim()));
  }
}

std::span<const std::size_t> PointNetWeights::default_widths() { return kDefaultWidths; }

PointNetWeights PointNetWeights::random(std::uint64_t seed, std::span<const std::size_t> widths) {
  PointNetWeights w;
  w.layers = he_uniform_layers(widths, seed);
  w.validate();
  return w;
}

FeatureVec pointnet_forward(const ObjectPoints& obj, const PointNetWeights& w) {
  w.validate();
  if (obj.valid_count > obj.points.size()) {
    throw ConfigError("pointnet_forward: valid_count exceeds point count");
  }
  const std::size_t out_dim = w.output_dim();
  FeatureVec pooled = FeatureVec::Zero(static_cast<Eigen::Index>(out_dim));
  if (obj.valid_count == 0) {
    return pooled;
  }
  pooled.setConstant(-std::numeric_limits<double>::infinity());

  std::size_t widest = 3;
  for (const DenseLayer& layer : w.layers) {
    widest = std::max(widest, layer.out_dim());
  }
  std::vector<double> a(widest);
  std::vector<double> b(widest);
  for (std::size_t p = 0; p < obj.valid_count; ++p) {
    a[0] = obj.points[p].x;
    a[1] = obj.points[p].y;
    a[2] = obj.points[p].z;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      const DenseLayer& layer = w.layers[l];
      dense_apply(layer, a.data(), b.data());
      if (l + 1 < w.layers.size()) {
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
          b[o] = std::max(b[o], 0.0);
        }
      }
      std::swap(a, b);
    }
    for (std::size_t o = 0; o < out_dim; ++o) {
      pooled[static_cast<Eigen::Index>(o)] = std::max(pooled[static_cast<Eigen::Index>(o)], a[o]);
    }
  }
  return pooled;
}

FeatureSet featurize_frame(std::span<const ObjectPoints> objs, const PointNetWeights& w,
                           std::size_t capacity, std::size_t frame_index, std::size_t threads) {
  w.validate();
  if (objs.size() > capacity) {
    throw ConfigError(fmt::format("featurize_frame: {} objects exceed capacity {}", objs.size(),
                                  capacity));
  }
  FeatureSet set;
  set.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(capacity),
                                       static_cast<Eigen::Index>(w.output_dim()));
  set.count = objs.size();
  set.frame_index = frame_index;
  parallel_for(objs.size(), threads, [&](std::size_t i) {
    set.features.row(static_cast<Eigen::Index>(i)) = pointnet_forward(objs[i], w).transpose();
  });
  return set;
}

}  // namespace pcdan
