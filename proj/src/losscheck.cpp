#include "pcdan/losscheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcdan/affinity.hpp"
#include "pcdan/error.hpp"

namespace pcdan {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct Check {
  const char* name;
  double error;
  double tolerance;
  bool passed() const { return error <= tolerance; }
};

}  // namespace

LossInstance random_loss_instance(std::mt19937_64& rng, std::size_t max_capacity) {
  const std::size_t n = uniform_size(rng, 2, std::max<std::size_t>(2, max_capacity));
  const std::size_t np = uniform_size(rng, 1, n);
  const std::size_t nc = uniform_size(rng, 1, n);
  std::vector<std::size_t> cur(nc);
  std::iota(cur.begin(), cur.end(), std::size_t{0});
  std::shuffle(cur.begin(), cur.end(), rng);
  const std::size_t k = uniform_size(rng, 0, std::min(np, nc));
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t i = 0; i < k; ++i) {
    matches.emplace_back(i, cur[i]);
  }
  std::normal_distribution<double> logit(0.0, 1.5);
  LossInstance inst;
  inst.m.resize(static_cast<Index>(n), static_cast<Index>(n));
  for (Index c = 0; c < inst.m.cols(); ++c) {
    for (Index r = 0; r < inst.m.rows(); ++r) {
      inst.m(r, c) = logit(rng);
    }
  }
  inst.dummy_score = logit(rng);
  inst.gt = gt_from_matches(n, np, nc, matches);
  return inst;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

double max_gradient_error(const LossInstance& inst, double step, double corruption) {
  const MatrixXd m1 = append_dummy_column(inst.m, inst.dummy_score);
  const MatrixXd m2 = append_dummy_row(inst.m, inst.dummy_score);
  LossGradients g = loss_gradients(m1, m2, inst.gt);
  g.d_m1(0, 0) += corruption;

  double worst = 0.0;
  const auto probe = [&](MatrixXd& target, Index r, Index c, double analytic, bool first) {
    const double saved = target(r, c);
    target(r, c) = saved + step;
    const double up = first ? loss_from_augmented(target, m2, inst.gt).total
                            : loss_from_augmented(m1, target, inst.gt).total;
    target(r, c) = saved - step;
    const double down = first ? loss_from_augmented(target, m2, inst.gt).total
                              : loss_from_augmented(m1, target, inst.gt).total;
    target(r, c) = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * step)));
  };
  MatrixXd p1 = m1;
  for (Index r = 0; r < p1.rows(); ++r) {
    for (Index c = 0; c < p1.cols(); ++c) {
      probe(p1, r, c, g.d_m1(r, c), true);
    }
  }
  MatrixXd p2 = m2;
  for (Index r = 0; r < p2.rows(); ++r) {
    for (Index c = 0; c < p2.cols(); ++c) {
      probe(p2, r, c, g.d_m2(r, c), false);
    }
  }
  const auto at_dummy = [&](double d) {
    return loss_from_augmented(append_dummy_column(inst.m, d), append_dummy_row(inst.m, d), inst.gt)
        .total;
  };
  const double numeric =
      (at_dummy(inst.dummy_score + step) - at_dummy(inst.dummy_score - step)) / (2.0 * step);
  worst = std::max(worst, relative_error(g.d_dummy, numeric));
  return worst;
}

bool run_losscheck(const LossCheckOptions& opts, std::ostream& report) {
  if (opts.trials == 0) {
    throw InvalidArgument("losscheck: trials must be positive");
  }
  std::mt19937_64 rng(opts.seed);
  std::vector<Check> checks;

  double grad_error = 0.0;
  double perfect_error = 0.0;
  double transpose_error = 0.0;
  double shift_error = 0.0;
  double mean_error = 0.0;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const LossInstance inst = random_loss_instance(rng, opts.max_capacity);
    grad_error = std::max(grad_error, max_gradient_error(inst, opts.step, opts.corruption));

    const GroundTruthAssignment& gt = inst.gt;
    const double lf = loss_forward(gt.g1, gt.g1.cwiseMax(1e-300));
    const double lb = loss_backward(gt.g2, gt.g2.cwiseMax(1e-300));
    const double lc = loss_consistency(gt.g3, gt.g3);
    const double la = loss_assemble(gt.g3, gt.g3.cwiseMax(1e-300), gt.g3.cwiseMax(1e-300));
    perfect_error = std::max({perfect_error, std::abs(lf), std::abs(lb), std::abs(lc), std::abs(la)});

    const AffinityMatrices aff =
        augment_and_softmax(inst.m, gt.count_prev, gt.count_cur, inst.dummy_score);
    const MatrixXd g2t = gt.g2.transpose();
    const MatrixXd a2t = aff.a2.transpose();
    transpose_error = std::max(
        transpose_error, std::abs(loss_backward(gt.g2, aff.a2) - loss_forward(g2t, a2t)));

    const double c = std::normal_distribution<double>(0.0, 5.0)(rng);
    const AffinityMatrices shifted = augment_and_softmax(
        (inst.m.array() + c).matrix(), gt.count_prev, gt.count_cur, inst.dummy_score + c);
    shift_error = std::max(shift_error, std::abs(loss_forward(gt.g1, shifted.a1) -
                                                 loss_forward(gt.g1, aff.a1)));

    const LossBreakdown parts = compute_losses(aff, gt);
    mean_error = std::max(
        mean_error, std::abs(parts.total - (parts.l_f + parts.l_b + parts.l_c + parts.l_a) / 4.0));
  }

  // Uniform prediction over 100 objects plus the dummy column: ln(101).
  constexpr std::size_t kCapacity = 100;
  const GroundTruthAssignment one = gt_from_matches(kCapacity, 1, kCapacity, {{0, 0}});
  const AffinityMatrices uniform =
      augment_and_softmax(MatrixXd::Zero(kCapacity, kCapacity), 1, kCapacity, 0.0);
  const double uniform_error =
      std::abs(loss_forward(one.g1, uniform.a1) - std::log(static_cast<double>(kCapacity + 1)));

  checks.push_back({"gradient_finite_difference", grad_error, opts.tolerance});
  checks.push_back({"perfect_prediction_zero", perfect_error, 1e-12});
  checks.push_back({"uniform_forward_ln101", uniform_error, 1e-9});
  checks.push_back({"backward_transpose_symmetry", transpose_error, 1e-12});
  checks.push_back({"forward_shift_invariance", shift_error, 1e-12});
  checks.push_back({"total_is_mean_of_parts", mean_error, 1e-15});

  bool ok = true;
  for (const Check& c : checks) {
    ok = ok && c.passed();
    report << fmt::format("{:<30} {} max_error={:.3e} tolerance={:.0e} trials={}\n", c.name,
                          c.passed() ? "PASS" : "FAIL", c.error, c.tolerance, opts.trials);
  }
  return ok;
}

}  // namespace pcdan
