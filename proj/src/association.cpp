#include "pcdan/association.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "pcdan/error.hpp"
#include "pcdan/hungarian.hpp"

namespace pcdan {

using Eigen::Index;
using Eigen::MatrixXd;

Eigen::MatrixXd score_matrix(const AffinityMatrices& aff) {
  const auto np = static_cast<Index>(aff.count_prev);
  const auto nc = static_cast<Index>(aff.count_cur);
  const Index leave = static_cast<Index>(aff.capacity());
  MatrixXd s(np, nc + 1);
  for (Index i = 0; i < np; ++i) {
    for (Index j = 0; j < nc; ++j) {
      s(i, j) = 0.5 * (aff.a1_trim(i, j) + aff.a2_trim(i, j));
    }
    s(i, nc) = aff.a1(i, leave);
  }
  return s;
}

bool match_allowed(const MatrixXd& s, std::size_t i, std::size_t j, double birth_threshold) {
  const auto r = static_cast<Index>(i);
  const auto c = static_cast<Index>(j);
  return s(r, c) > s(r, s.cols() - 1) && s(r, c) > birth_threshold;
}

AssignmentResult solve_assignment(const MatrixXd& s, double birth_threshold) {
  if (s.cols() < 1) {
    throw InvalidArgument("solve_assignment: score matrix needs a leave column");
  }
  if (!s.allFinite()) {
    throw InvalidArgument("solve_assignment: non-finite score");
  }
  if (!(birth_threshold >= 0.0 && birth_threshold <= 1.0)) {
    throw InvalidArgument("solve_assignment: birth threshold must lie in [0, 1]");
  }
  const auto np = static_cast<std::size_t>(s.rows());
  const auto nc = static_cast<std::size_t>(s.cols() - 1);

  // Disallowed pairs cost 0, the same as leaving both slots unmatched; allowed
  // pairs have strictly positive scores, so the optimum over full assignments
  // restricted to allowed pairs is the optimum over partial matchings.
  MatrixXd cost = MatrixXd::Zero(s.rows(), s.cols() - 1);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      if (match_allowed(s, i, j, birth_threshold)) {
        cost(static_cast<Index>(i), static_cast<Index>(j)) = -s(static_cast<Index>(i), static_cast<Index>(j));
      }
    }
  }
  const std::vector<int> row_to_col = solve_min_cost_assignment(cost);

  AssignmentResult out;
  std::vector<bool> cur_matched(nc, false);
  for (std::size_t i = 0; i < np; ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && match_allowed(s, i, static_cast<std::size_t>(j), birth_threshold)) {
      out.matches.emplace_back(i, static_cast<std::size_t>(j));
      out.total_score += s(static_cast<Index>(i), j);
      cur_matched[static_cast<std::size_t>(j)] = true;
    } else {
      out.deaths.push_back(i);
    }
  }
  for (std::size_t j = 0; j < nc; ++j) {
    if (!cur_matched[j]) {
      out.births.push_back(j);
    }
  }
  return out;
}

TrackSet update_tracks(TrackSet ts, const AssignmentResult& result, std::size_t frame_index) {
  if (ts.last_frame && frame_index <= *ts.last_frame) {
    throw ConsistencyError(fmt::format("update_tracks: frame {} does not follow frame {}",
                                       frame_index, *ts.last_frame));
  }
  std::set<std::size_t> claimed_cur;
  std::set<std::size_t> claimed_prev;
  const auto claim = [](std::set<std::size_t>& set, std::size_t slot, const char* side) {
    if (!set.insert(slot).second) {
      throw ConsistencyError(fmt::format("update_tracks: {} slot {} claimed twice", side, slot));
    }
  };

  std::map<std::size_t, std::uint32_t> next_active;
  for (const auto& [prev_slot, cur_slot] : result.matches) {
    claim(claimed_prev, prev_slot, "previous");
    claim(claimed_cur, cur_slot, "current");
    const auto it = ts.active.find(prev_slot);
    if (it == ts.active.end()) {
      throw ConsistencyError(
          fmt::format("update_tracks: previous slot {} has no live track", prev_slot));
    }
    ts.tracks[it->second].push_back({frame_index, cur_slot});
    next_active[cur_slot] = it->second;
  }
  for (const std::size_t prev_slot : result.deaths) {
    claim(claimed_prev, prev_slot, "previous");
  }
  for (const std::size_t cur_slot : result.births) {
    claim(claimed_cur, cur_slot, "current");
    const std::uint32_t id = ts.next_id++;
    ts.tracks[id].push_back({frame_index, cur_slot});
    next_active[cur_slot] = id;
  }
  ts.active = std::move(next_active);
  ts.last_frame = frame_index;
  return ts;
}

}  // namespace pcdan
