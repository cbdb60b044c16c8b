#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "pcdan/affinity.hpp"

namespace pcdan {

/// count_prev x (count_cur + 1): the mean of the trimmed forward and backward
/// affinities, with the forward leave probability in the last column.
Eigen::MatrixXd score_matrix(const AffinityMatrices& aff);

struct AssignmentResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (prev_slot, cur_slot), by prev_slot
  std::vector<std::size_t> births;                          // unmatched cur slots, ascending
  std::vector<std::size_t> deaths;                          // unmatched prev slots, ascending
  double total_score = 0.0;
};

inline constexpr double kDefaultBirthThreshold = 0.3;

/// Whether (i, j) may be linked: it must beat both the leave score of i and
/// the birth threshold.
bool match_allowed(const Eigen::MatrixXd& s, std::size_t i, std::size_t j, double birth_threshold);

/// Maximum-score partial matching over the allowed pairs of the real block
/// of `s`, solved as a linear assignment.
AssignmentResult solve_assignment(const Eigen::MatrixXd& s, double birth_threshold);

struct TrackEntry {
  std::size_t frame = 0;
  std::size_t slot = 0;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct TrackSet {
  std::map<std::uint32_t, std::vector<TrackEntry>> tracks;
  std::uint32_t next_id = 0;
  /// Slots of the most recent frame and the track each belongs to.
  std::map<std::size_t, std::uint32_t> active;
  std::optional<std::size_t> last_frame;
};

/// Applies one frame's assignment: matches extend tracks, births open new
/// ids, deaths close tracks. Throws ConsistencyError if a slot is claimed
/// twice or a match refers to a slot that has no live track.
TrackSet update_tracks(TrackSet ts, const AssignmentResult& result, std::size_t frame_index);

}  // namespace pcdan
