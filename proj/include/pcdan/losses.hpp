#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <utility>
#include <vector>

#include "pcdan/affinity.hpp"
#include "pcdan/geometry.hpp"

namespace pcdan {

/// Ground-truth association for one frame pair at capacity N.
///   g1: N x (N+1), last column marks objects that leave
///   g2: (N+1) x N, last row marks objects that enter
///   g3: N x N, the matched pairs
struct GroundTruthAssignment {
  Eigen::MatrixXd g1;
  Eigen::MatrixXd g2;
  Eigen::MatrixXd g3;
  std::size_t count_prev = 0;
  std::size_t count_cur = 0;

  std::size_t capacity() const { return static_cast<std::size_t>(g3.rows()); }
};

/// Builds the assignment from (prev_slot, cur_slot) matches. Throws
/// DataError if a slot is matched twice or lies outside the counts.
GroundTruthAssignment gt_from_matches(std::size_t capacity, std::size_t count_prev,
                                      std::size_t count_cur,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& matches);

/// Matches detections by gt_id. Every detection must carry a gt_id
/// (LabelError) and ids must be unique within a frame (DataError).
GroundTruthAssignment build_gt(const Frame& prev, const Frame& cur, std::size_t capacity);

struct LossBreakdown {
  double l_f = 0.0;
  double l_b = 0.0;
  double l_c = 0.0;
  double l_a = 0.0;
  double total = 0.0;
};

/// sum(G1 * -log A1) / sum(G1); 0 when G1 is empty.
double loss_forward(const Eigen::MatrixXd& g1, const Eigen::MatrixXd& a1);
/// sum(G2 * -log A2) / sum(G2); 0 when G2 is empty.
double loss_backward(const Eigen::MatrixXd& g2, const Eigen::MatrixXd& a2);
/// Entry-wise L1 distance between the trimmed forward and backward matrices.
double loss_consistency(const Eigen::MatrixXd& a1_trim, const Eigen::MatrixXd& a2_trim);
/// sum(G3 * -log max(A2_trim, A1_trim)) / sum(G3); 0 when G3 is empty.
double loss_assemble(const Eigen::MatrixXd& g3, const Eigen::MatrixXd& a1_trim,
                     const Eigen::MatrixXd& a2_trim);
/// Mean of the four parts.
LossBreakdown loss_total(double l_f, double l_b, double l_c, double l_a);

LossBreakdown compute_losses(const AffinityMatrices& aff, const GroundTruthAssignment& gt);

/// Total loss straight from augmented logits, treating m1 and m2 as
/// independent inputs.
LossBreakdown loss_from_augmented(const Eigen::MatrixXd& m1, const Eigen::MatrixXd& m2,
                                  const GroundTruthAssignment& gt);

struct LossGradients {
  LossBreakdown loss;
  Eigen::MatrixXd d_m1;  // N x (N+1)
  Eigen::MatrixXd d_m2;  // (N+1) x N
  /// Gradient w.r.t. the shared dummy logit (sum over its valid appearances).
  double d_dummy = 0.0;

  /// Gradient w.r.t. M when M1 and M2 are both built from it.
  Eigen::MatrixXd d_m() const;
};

/// Analytic gradient of the total loss. |x| at 0 uses sign(0) = 0, and the
/// assemble max sends its gradient to A1_trim when the two are equal.
LossGradients loss_gradients(const Eigen::MatrixXd& m1, const Eigen::MatrixXd& m2,
                             const GroundTruthAssignment& gt);

LossGradients loss_gradients(const Eigen::MatrixXd& m, double dummy_score,
                             const GroundTruthAssignment& gt);

}  // namespace pcdan
