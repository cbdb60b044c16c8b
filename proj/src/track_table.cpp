#include "pcdan/track_table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <sstream>

#include "pcdan/binary_io.hpp"
#include "pcdan/error.hpp"

namespace pcdan {

namespace {

template <typename T>
bool parse_field(std::string_view text, T& out) {
  if (text.empty()) {
    return false;
  }
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::string format_track_csv(std::vector<TrackRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const TrackRow& a, const TrackRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  std::string out(kTrackCsvHeader);
  out += '\n';
  for (const TrackRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.frame, r.track_id,
                       format_real(r.box.center.x), format_real(r.box.center.y),
                       format_real(r.box.center.z), format_real(r.box.length),
                       format_real(r.box.width), format_real(r.box.height),
                       format_real(r.box.yaw), format_real(r.confidence));
  }
  return out;
}

std::vector<TrackRow> parse_track_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(source_name + ":1: missing header");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != kTrackCsvHeader) {
    throw ParseError(source_name + ":1: unexpected header '" + line + "'");
  }
  std::vector<TrackRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 10) {
      throw ParseError(fmt::format("{}:{}: expected 10 fields, got {}", source_name, line_no,
                                   fields.size()));
    }
    TrackRow row;
    double v[8];
    bool ok = parse_field(fields[0], row.frame) && parse_field(fields[1], row.track_id);
    for (std::size_t k = 0; ok && k < 8; ++k) {
      ok = parse_field(fields[k + 2], v[k]);
    }
    if (!ok) {
      throw ParseError(fmt::format("{}:{}: malformed field", source_name, line_no));
    }
    row.box = {{v[0], v[1], v[2]}, v[3], v[4], v[5], v[6]};
    row.confidence = v[7];
    rows.push_back(row);
  }
  return rows;
}

std::vector<TrackRow> read_track_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("track file not found: " + path.string());
  }
  std::istringstream in(binary::read_file(path));
  return parse_track_csv(in, path.string());
}

std::vector<TrackRow> ground_truth_rows(const SequenceSource& src) {
  std::vector<TrackRow> rows;
  for (std::size_t f = 0; f < src.frame_count(); ++f) {
    const Frame frame = src.load_frame(f);
    for (const Detection& d : frame.detections) {
      if (d.gt_id) {
        rows.push_back({f, *d.gt_id, d.box, d.confidence});
      }
    }
  }
  return rows;
}

}  // namespace pcdan
