#include "pcdan/losses.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_map>

#include "pcdan/error.hpp"

namespace pcdan {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

void require_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(fmt::format("{}: shape mismatch ({}x{} vs {}x{})", what, a.rows(), a.cols(),
                                  b.rows(), b.cols()));
  }
}

// sum(G * -log A) / sum(G), skipping cells where G is zero.
double weighted_nll(const MatrixXd& g, const MatrixXd& a) {
  double num = 0.0;
  double den = 0.0;
  for (Index c = 0; c < g.cols(); ++c) {
    for (Index r = 0; r < g.rows(); ++r) {
      const double w = g(r, c);
      if (w != 0.0) {
        num += w * -std::log(a(r, c));
        den += w;
      }
    }
  }
  return den == 0.0 ? 0.0 : num / den;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

GroundTruthAssignment gt_from_matches(
    std::size_t capacity, std::size_t count_prev, std::size_t count_cur,
    const std::vector<std::pair<std::size_t, std::size_t>>& matches) {
  if (count_prev > capacity || count_cur > capacity) {
    throw ConfigError("ground truth: counts exceed capacity");
  }
  const Index n = idx(capacity);
  GroundTruthAssignment gt;
  gt.count_prev = count_prev;
  gt.count_cur = count_cur;
  gt.g3 = MatrixXd::Zero(n, n);
  std::vector<bool> prev_used(count_prev, false);
  std::vector<bool> cur_used(count_cur, false);
  for (const auto& [i, j] : matches) {
    if (i >= count_prev || j >= count_cur) {
      throw DataError(fmt::format("ground truth: match ({}, {}) outside counts", i, j));
    }
    if (prev_used[i] || cur_used[j]) {
      throw DataError(fmt::format("ground truth: slot reused in match ({}, {})", i, j));
    }
    prev_used[i] = true;
    cur_used[j] = true;
    gt.g3(idx(i), idx(j)) = 1.0;
  }
  gt.g1 = MatrixXd::Zero(n, n + 1);
  gt.g1.leftCols(n) = gt.g3;
  for (std::size_t i = 0; i < count_prev; ++i) {
    if (!prev_used[i]) {
      gt.g1(idx(i), n) = 1.0;
    }
  }
  gt.g2 = MatrixXd::Zero(n + 1, n);
  gt.g2.topRows(n) = gt.g3;
  for (std::size_t j = 0; j < count_cur; ++j) {
    if (!cur_used[j]) {
      gt.g2(n, idx(j)) = 1.0;
    }
  }
  return gt;
}

GroundTruthAssignment build_gt(const Frame& prev, const Frame& cur, std::size_t capacity) {
  const auto index_ids = [](const Frame& f) {
    std::unordered_map<std::uint32_t, std::size_t> slots;
    for (std::size_t s = 0; s < f.detections.size(); ++s) {
      const auto& id = f.detections[s].gt_id;
      if (!id) {
        throw LabelError(fmt::format("frame {}: detection slot {} has no gt_id", f.index, s));
      }
      if (!slots.emplace(*id, s).second) {
        throw DataError(fmt::format("frame {}: duplicate gt_id {}", f.index, *id));
      }
    }
    return slots;
  };
  const auto prev_ids = index_ids(prev);
  const auto cur_ids = index_ids(cur);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t i = 0; i < prev.detections.size(); ++i) {
    const auto it = cur_ids.find(*prev.detections[i].gt_id);
    if (it != cur_ids.end()) {
      matches.emplace_back(i, it->second);
    }
  }
  return gt_from_matches(capacity, prev.detections.size(), cur.detections.size(), matches);
}

double loss_forward(const MatrixXd& g1, const MatrixXd& a1) {
  require_same_shape(g1, a1, "loss_forward");
  return weighted_nll(g1, a1);
}

double loss_backward(const MatrixXd& g2, const MatrixXd& a2) {
  require_same_shape(g2, a2, "loss_backward");
  return weighted_nll(g2, a2);
}

double loss_consistency(const MatrixXd& a1_trim, const MatrixXd& a2_trim) {
  require_same_shape(a1_trim, a2_trim, "loss_consistency");
  return (a1_trim - a2_trim).cwiseAbs().sum();
}

double loss_assemble(const MatrixXd& g3, const MatrixXd& a1_trim, const MatrixXd& a2_trim) {
  require_same_shape(g3, a1_trim, "loss_assemble");
  require_same_shape(g3, a2_trim, "loss_assemble");
  return weighted_nll(g3, a2_trim.cwiseMax(a1_trim));
}

LossBreakdown loss_total(double l_f, double l_b, double l_c, double l_a) {
  return {l_f, l_b, l_c, l_a, (l_f + l_b + l_c + l_a) / 4.0};
}

LossBreakdown compute_losses(const AffinityMatrices& aff, const GroundTruthAssignment& gt) {
  if (aff.count_prev != gt.count_prev || aff.count_cur != gt.count_cur) {
    throw ConfigError("compute_losses: affinity and ground-truth counts differ");
  }
  return loss_total(loss_forward(gt.g1, aff.a1), loss_backward(gt.g2, aff.a2),
                    loss_consistency(aff.a1_trim, aff.a2_trim),
                    loss_assemble(gt.g3, aff.a1_trim, aff.a2_trim));
}

LossBreakdown loss_from_augmented(const MatrixXd& m1, const MatrixXd& m2,
                                  const GroundTruthAssignment& gt) {
  return compute_losses(softmax_augmented(m1, m2, gt.count_prev, gt.count_cur), gt);
}

MatrixXd LossGradients::d_m() const {
  const Index n = d_m1.rows();
  return d_m1.leftCols(n) + d_m2.topRows(n);
}

LossGradients loss_gradients(const MatrixXd& m1, const MatrixXd& m2,
                             const GroundTruthAssignment& gt) {
  const AffinityMatrices aff = softmax_augmented(m1, m2, gt.count_prev, gt.count_cur);
  const Index n = idx(aff.capacity());
  const Index np = idx(gt.count_prev);
  const Index nc = idx(gt.count_cur);

  LossGradients out;
  out.loss = compute_losses(aff, gt);

  // dL/dA1 and dL/dA2 for the mean of the four terms.
  MatrixXd d_a1 = MatrixXd::Zero(n, n + 1);
  MatrixXd d_a2 = MatrixXd::Zero(n + 1, n);
  const double sum_g1 = gt.g1.sum();
  const double sum_g2 = gt.g2.sum();
  const double sum_g3 = gt.g3.sum();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= n; ++j) {
      if (gt.g1(i, j) != 0.0) {
        d_a1(i, j) -= gt.g1(i, j) / (aff.a1(i, j) * sum_g1);
      }
    }
  }
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= n; ++i) {
      if (gt.g2(i, j) != 0.0) {
        d_a2(i, j) -= gt.g2(i, j) / (aff.a2(i, j) * sum_g2);
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double s = sign(aff.a1_trim(i, j) - aff.a2_trim(i, j));
      d_a1(i, j) += s;
      d_a2(i, j) -= s;
      if (gt.g3(i, j) != 0.0) {
        const double fwd = aff.a1_trim(i, j);
        const double bwd = aff.a2_trim(i, j);
        if (fwd >= bwd) {
          d_a1(i, j) -= gt.g3(i, j) / (fwd * sum_g3);
        } else {
          d_a2(i, j) -= gt.g3(i, j) / (bwd * sum_g3);
        }
      }
    }
  }
  d_a1 *= 0.25;
  d_a2 *= 0.25;

  // Softmax Jacobian-vector products; masked logits are constants.
  out.d_m1 = MatrixXd::Zero(n, n + 1);
  for (Index i = 0; i < np; ++i) {
    const double inner = aff.a1.row(i).dot(d_a1.row(i));
    for (Index j = 0; j <= n; ++j) {
      if (j < nc || j == n) {
        out.d_m1(i, j) = aff.a1(i, j) * (d_a1(i, j) - inner);
      }
    }
  }
  out.d_m2 = MatrixXd::Zero(n + 1, n);
  for (Index j = 0; j < nc; ++j) {
    const double inner = aff.a2.col(j).dot(d_a2.col(j));
    for (Index i = 0; i <= n; ++i) {
      if (i < np || i == n) {
        out.d_m2(i, j) = aff.a2(i, j) * (d_a2(i, j) - inner);
      }
    }
  }
  out.d_dummy = out.d_m1.col(n).sum() + out.d_m2.row(n).sum();
  return out;
}

LossGradients loss_gradients(const MatrixXd& m, double dummy_score,
                             const GroundTruthAssignment& gt) {
  return loss_gradients(append_dummy_column(m, dummy_score), append_dummy_row(m, dummy_score), gt);
}

}  // namespace pcdan
