#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdan/dense.hpp"
#include "pcdan/featurizer.hpp"

namespace pcdan {

/// Pointwise (1x1 convolution) network mapping a pair encoding to a scalar
/// affinity: ReLU between layers, nothing after the last. `dummy_score` is
/// the learned logit of the appended enter/leave row and column.
struct CompressionNet {
  std::vector<DenseLayer> layers;
  double dummy_score = 0.0;

  static constexpr std::size_t kStandardDepth = 5;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }

  /// Chain, scalar output and finite dummy_score.
  void validate() const;
  /// validate() plus exactly kStandardDepth layers; required for model files.
  void validate_standard() const;

  /// 1024 -> 512 -> 256 -> 128 -> 64 -> 1 by default; dummy_score starts at 0.
  static CompressionNet random(std::uint64_t seed,
                               std::span<const std::size_t> widths = default_widths());
  static std::span<const std::size_t> default_widths();

  friend bool operator==(const CompressionNet&, const CompressionNet&) = default;
};

/// The capacity x capacity x 2D grid of concatenated feature pairs. Only the
/// valid features are held; cell (i, j) is materialized on demand and is zero
/// outside the valid block.
class PairTensor {
 public:
  PairTensor(const FeatureSet& prev, const FeatureSet& cur);

  std::size_t capacity() const { return capacity_; }
  std::size_t channels() const { return 2 * static_cast<std::size_t>(prev_.cols()); }
  std::size_t count_prev() const { return static_cast<std::size_t>(prev_.rows()); }
  std::size_t count_cur() const { return static_cast<std::size_t>(cur_.rows()); }

  /// count_prev x D and count_cur x D.
  const Eigen::MatrixXd& prev_features() const { return prev_; }
  const Eigen::MatrixXd& cur_features() const { return cur_; }

  Eigen::VectorXd cell(std::size_t i, std::size_t j) const;

 private:
  std::size_t capacity_ = 0;
  Eigen::MatrixXd prev_;
  Eigen::MatrixXd cur_;
};

PairTensor build_pair_tensor(const FeatureSet& prev, const FeatureSet& cur);

/// Activations of every layer over the valid cells, row c = i * count_cur + j.
struct CompressionTrace {
  std::vector<Eigen::MatrixXd> pre_activation;
  std::vector<Eigen::MatrixXd> post_activation;
  /// capacity x capacity; cells outside the valid block hold net(0).
  Eigen::MatrixXd m;
};

/// M[i, j] = net(cell(i, j)).
Eigen::MatrixXd compression_forward(const PairTensor& t, const CompressionNet& net);
CompressionTrace compression_forward_trace(const PairTensor& t, const CompressionNet& net);

/// Parameter gradients shaped like the network.
struct CompressionGradient {
  std::vector<DenseLayer> layers;
  double dummy_score = 0.0;

  static CompressionGradient zeros_like(const CompressionNet& net);
  CompressionGradient& operator+=(const CompressionGradient& other);
  CompressionGradient& operator*=(double s);
  bool all_finite() const;
};

/// Backpropagates dL/dM (at least count_prev x count_cur; only that block is
/// read) through the network. dummy_score is left at zero.
CompressionGradient compression_backward(const PairTensor& t, const CompressionNet& net,
                                         const CompressionTrace& trace,
                                         const Eigen::MatrixXd& d_m);

/// Logit written over padding slots before the softmax.
inline constexpr double kMaskedLogit = -1e9;

struct AffinityMatrices {
  Eigen::MatrixXd m;        // N x N
  Eigen::MatrixXd m1;       // N x (N+1), dummy column appended
  Eigen::MatrixXd m2;       // (N+1) x N, dummy row appended
  Eigen::MatrixXd a1;       // row softmax of masked m1 over valid rows
  Eigen::MatrixXd a2;       // column softmax of masked m2 over valid columns
  Eigen::MatrixXd a1_trim;  // a1 without its last column
  Eigen::MatrixXd a2_trim;  // a2 without its last row
  std::size_t count_prev = 0;
  std::size_t count_cur = 0;

  std::size_t capacity() const { return static_cast<std::size_t>(m.rows()); }
};

Eigen::MatrixXd append_dummy_column(const Eigen::MatrixXd& m, double dummy_score);
Eigen::MatrixXd append_dummy_row(const Eigen::MatrixXd& m, double dummy_score);

/// Softmax over each valid row of m1 (rows < count_prev). Columns >= count_cur
/// other than the last are masked. Invalid rows are zero.
Eigen::MatrixXd masked_row_softmax(const Eigen::MatrixXd& m1, std::size_t count_prev,
                                   std::size_t count_cur);
/// Column-wise counterpart for m2.
Eigen::MatrixXd masked_column_softmax(const Eigen::MatrixXd& m2, std::size_t count_prev,
                                      std::size_t count_cur);

/// Softmax stage from already augmented logits.
AffinityMatrices softmax_augmented(Eigen::MatrixXd m1, Eigen::MatrixXd m2, std::size_t count_prev,
                                   std::size_t count_cur);

AffinityMatrices augment_and_softmax(const Eigen::MatrixXd& m, std::size_t count_prev,
                                     std::size_t count_cur, double dummy_score);

/// build_pair_tensor -> compression_forward -> augment_and_softmax.
AffinityMatrices predict_affinity(const FeatureSet& prev, const FeatureSet& cur,
                                  const CompressionNet& net);

}  // namespace pcdan
