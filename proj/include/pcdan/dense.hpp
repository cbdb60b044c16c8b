#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pcdan {

/// Fully connected layer y = W x + b with W stored out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
  }
};

/// Layers with the given widths (widths[0] is the input width), weights drawn
/// He-uniform from a seeded generator and rounded to f32, biases zero.
std::vector<DenseLayer> he_uniform_layers(std::span<const std::size_t> widths, std::uint64_t seed);

/// Throws ConfigError unless consecutive layers chain and every entry is finite.
void validate_chain(std::span<const DenseLayer> layers, const char* what);

}  // namespace pcdan
