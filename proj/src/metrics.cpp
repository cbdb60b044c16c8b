#include "pcdan/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pcdan/error.hpp"
#include "pcdan/hungarian.hpp"

namespace pcdan {

namespace {

double center_distance(const TrackRow& a, const TrackRow& b) {
  const double dx = a.box.center.x - b.box.center.x;
  const double dy = a.box.center.y - b.box.center.y;
  const double dz = a.box.center.z - b.box.center.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// frame -> id -> row; rejects duplicate ids within a frame.
std::map<std::size_t, std::map<std::uint32_t, const TrackRow*>> index_rows(
    std::span<const TrackRow> rows, const char* side) {
  std::map<std::size_t, std::map<std::uint32_t, const TrackRow*>> out;
  for (const TrackRow& r : rows) {
    if (!out[r.frame].emplace(r.track_id, &r).second) {
      throw DataError(fmt::format("{}: id {} appears twice in frame {}", side, r.track_id, r.frame));
    }
  }
  return out;
}

}  // namespace

MotReport evaluate(std::span<const TrackRow> gt, std::span<const TrackRow> pred,
                   double match_radius, std::optional<FrameRange> range) {
  if (!(match_radius > 0.0)) {
    throw InvalidArgument("evaluate: match radius must be positive");
  }
  if (gt.empty()) {
    throw UndefinedMetricError("evaluate: ground truth has no objects, MOTA is undefined");
  }
  if (!range) {
    const auto [lo, hi] = std::minmax_element(
        gt.begin(), gt.end(), [](const TrackRow& a, const TrackRow& b) { return a.frame < b.frame; });
    range = FrameRange{lo->frame, hi->frame};
  }
  for (const auto rows : {gt, pred}) {
    for (const TrackRow& r : rows) {
      if (r.frame < range->first || r.frame > range->last) {
        throw InvalidArgument(fmt::format("evaluate: frame {} lies outside the evaluated range [{}, {}]",
                                          r.frame, range->first, range->last));
      }
    }
  }

  const auto gt_frames = index_rows(gt, "ground truth");
  const auto pred_frames = index_rows(pred, "prediction");
  std::set<std::size_t> frames;
  for (const auto& [f, _] : gt_frames) frames.insert(f);
  for (const auto& [f, _] : pred_frames) frames.insert(f);

  MotReport report;
  double distance_sum = 0.0;
  std::map<std::uint32_t, std::uint32_t> last_match;  // gt id -> pred id

  static const std::map<std::uint32_t, const TrackRow*> kNone;
  for (const std::size_t f : frames) {
    const auto git = gt_frames.find(f);
    const auto pit = pred_frames.find(f);
    const auto& gts = git == gt_frames.end() ? kNone : git->second;
    const auto& preds = pit == pred_frames.end() ? kNone : pit->second;
    report.gt_count += gts.size();

    std::map<std::uint32_t, std::uint32_t> matched;  // gt id -> pred id
    std::set<std::uint32_t> pred_used;

    for (const auto& [gid, grow] : gts) {
      const auto prev = last_match.find(gid);
      if (prev == last_match.end()) {
        continue;
      }
      const auto p = preds.find(prev->second);
      if (p != preds.end() && !pred_used.contains(p->first) &&
          center_distance(*grow, *p->second) <= match_radius) {
        matched[gid] = p->first;
        pred_used.insert(p->first);
      }
    }

    std::vector<std::uint32_t> free_gt;
    std::vector<std::uint32_t> free_pred;
    for (const auto& [gid, _] : gts) {
      if (!matched.contains(gid)) free_gt.push_back(gid);
    }
    for (const auto& [pid, _] : preds) {
      if (!pred_used.contains(pid)) free_pred.push_back(pid);
    }
    if (!free_gt.empty() && !free_pred.empty()) {
      // Gated pairs cost their distance; a prohibitive cost for the rest keeps
      // the match count maximal before distance is minimized.
      const double blocked = 1e6 * (match_radius + 1.0);
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(free_gt.size()),
                           static_cast<Eigen::Index>(free_pred.size()));
      for (std::size_t a = 0; a < free_gt.size(); ++a) {
        for (std::size_t b = 0; b < free_pred.size(); ++b) {
          const double d = center_distance(*gts.at(free_gt[a]), *preds.at(free_pred[b]));
          cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              d <= match_radius ? d : blocked;
        }
      }
      const std::vector<int> assign = solve_min_cost_assignment(cost);
      for (std::size_t a = 0; a < free_gt.size(); ++a) {
        const int b = assign[a];
        if (b >= 0 && cost(static_cast<Eigen::Index>(a), b) <= match_radius) {
          const std::uint32_t gid = free_gt[a];
          const std::uint32_t pid = free_pred[static_cast<std::size_t>(b)];
          const auto prev = last_match.find(gid);
          if (prev != last_match.end() && prev->second != pid) {
            ++report.id_switches;
          }
          matched[gid] = pid;
          pred_used.insert(pid);
        }
      }
    }

    for (const auto& [gid, pid] : matched) {
      distance_sum += center_distance(*gts.at(gid), *preds.at(pid));
      last_match[gid] = pid;
    }
    report.matches += matched.size();
    report.false_neg += gts.size() - matched.size();
    report.false_pos += preds.size() - matched.size();
  }

  report.motp = report.matches == 0 ? 0.0 : distance_sum / static_cast<double>(report.matches);
  report.mota = 1.0 - static_cast<double>(report.false_neg + report.false_pos + report.id_switches) /
                          static_cast<double>(report.gt_count);
  return report;
}

std::string format_report_table(const MotReport& r) {
  std::string out = fmt::format("{:<10} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "MOTA",
                                "MOTP(m)", "IDs", "FP", "FN", "GT", "Matches", "Time(s)");
  out += fmt::format("{:<10} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>10}\n", r.mota, r.motp,
                     r.id_switches, r.false_pos, r.false_neg, r.gt_count, r.matches,
                     r.seconds_per_frame);
  return out;
}

nlohmann::json report_to_json(const MotReport& r) {
  return {{"mota", r.mota},
          {"motp", r.motp},
          {"id_switches", r.id_switches},
          {"false_pos", r.false_pos},
          {"false_neg", r.false_neg},
          {"gt_count", r.gt_count},
          {"matches", r.matches},
          {"seconds_per_frame", r.seconds_per_frame}};
}

MotReport report_from_json(const nlohmann::json& j) {
  MotReport r;
  r.mota = j.at("mota").get<double>();
  r.motp = j.at("motp").get<double>();
  r.id_switches = j.at("id_switches").get<std::size_t>();
  r.false_pos = j.at("false_pos").get<std::size_t>();
  r.false_neg = j.at("false_neg").get<std::size_t>();
  r.gt_count = j.at("gt_count").get<std::size_t>();
  r.matches = j.at("matches").get<std::size_t>();
  r.seconds_per_frame = j.at("seconds_per_frame").get<double>();
  return r;
}

}  // namespace pcdan
