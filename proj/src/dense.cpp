#include "pcdan/dense.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

#include "pcdan/error.hpp"

namespace pcdan {

std::vector<DenseLayer> he_uniform_layers(std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) {
    throw ConfigError("a network needs at least one layer");
  }
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        layer.weight(r, c) = static_cast<double>(static_cast<float>(dist(rng)));
      }
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layers.push_back(std::move(layer));
  }
  return layers;
}

void validate_chain(std::span<const DenseLayer> layers, const char* what) {
  if (layers.empty()) {
    throw ConfigError(fmt::format("{}: no layers", what));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
      throw ConfigError(fmt::format("{}: layer {} has an empty weight matrix", what, l));
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError(fmt::format("{}: layer {} bias width {} != output width {}", what, l,
                                    layer.bias.size(), layer.weight.rows()));
    }
    if (l > 0 && layers[l - 1].out_dim() != layer.in_dim()) {
      throw ConfigError(fmt::format("{}: layer {} expects {} inputs but previous layer emits {}",
                                    what, l, layer.in_dim(), layers[l - 1].out_dim()));
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ConfigError(fmt::format("{}: layer {} has non-finite entries", what, l));
    }
  }
}

}  // namespace pcdan
