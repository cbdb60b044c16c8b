#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>

#include "pcdan/losses.hpp"

namespace pcdan {

/// Random logits, dummy score and partial ground-truth matching at a random
/// capacity in [2, max_capacity] with counts in [1, capacity].
struct LossInstance {
  Eigen::MatrixXd m;
  double dummy_score = 0.0;
  GroundTruthAssignment gt;
};

LossInstance random_loss_instance(std::mt19937_64& rng, std::size_t max_capacity);

/// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor for
/// entries whose gradient is (near) zero.
inline constexpr double kRelativeErrorFloor = 1e-3;
double relative_error(double analytic, double numeric);

/// Largest relative error between the analytic gradient and central finite
/// differences over every M1 entry, every M2 entry and the dummy score.
/// `corruption` is added to the analytic dM1(0, 0) (sensitivity test hook).
double max_gradient_error(const LossInstance& inst, double step, double corruption = 0.0);

struct LossCheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t max_capacity = 8;
  double step = 1e-5;
  double tolerance = 1e-4;
  double corruption = 0.0;
};

/// Gradient and loss-identity suite; one report line per check. Returns true
/// iff every check passes.
bool run_losscheck(const LossCheckOptions& opts, std::ostream& report);

}  // namespace pcdan
