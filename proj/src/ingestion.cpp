#include "pcdan/ingestion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "pcdan/binary_io.hpp"
#include "pcdan/error.hpp"

namespace pcdan {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kHeader = "frame,conf,cx,cy,cz,l,w,h,yaw";
constexpr std::string_view kLabeledHeader = "frame,conf,cx,cy,cz,l,w,h,yaw,gt_id";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) {
    return false;
  }
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  return line;
}

}  // namespace

void IngestConfig::validate() const {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw InvalidArgument("confidence_threshold must lie in [0, 1]");
  }
  if (max_objects < 1) {
    throw InvalidArgument("max_objects must be at least 1");
  }
}

std::string format_real(double v) { return fmt::format("{}", v); }

fs::path point_file_path(const fs::path& root, std::size_t index) {
  return root / "frames" / (std::to_string(index) + ".xyz");
}

fs::path detection_file_path(const fs::path& root, std::size_t index) {
  return root / "detections" / (std::to_string(index) + ".csv");
}

PointCloud read_point_file(const fs::path& path, std::size_t frame_index) {
  if (!fs::exists(path)) {
    throw NotFoundError("point file not found: " + path.string());
  }
  const std::string bytes = binary::read_file(path);
  if (bytes.size() % 12 != 0) {
    throw ParseError(fmt::format("{}: truncated point record at byte offset {}", path.string(),
                                 bytes.size() - bytes.size() % 12));
  }
  PointCloud cloud;
  cloud.frame_index = frame_index;
  cloud.points.reserve(bytes.size() / 12);
  for (std::size_t off = 0; off < bytes.size(); off += 12) {
    const Point3 p{binary::get_f32(bytes.data() + off), binary::get_f32(bytes.data() + off + 4),
                   binary::get_f32(bytes.data() + off + 8)};
    if (!is_finite(p)) {
      throw DataError(fmt::format("{}: non-finite coordinate at byte offset {}", path.string(), off));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_point_file(const fs::path& path, const PointCloud& cloud) {
  std::string bytes;
  bytes.reserve(cloud.points.size() * 12);
  for (const Point3& p : cloud.points) {
    binary::put_f32(bytes, static_cast<float>(p.x));
    binary::put_f32(bytes, static_cast<float>(p.y));
    binary::put_f32(bytes, static_cast<float>(p.z));
  }
  binary::write_file(path, bytes);
}

DetectionFile parse_detections(std::istream& in, std::size_t frame_index,
                               const std::string& source_name) {
  DetectionFile out;
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(source_name + ":1: missing header");
  }
  const std::string_view header = strip_cr(line);
  if (header == kLabeledHeader) {
    out.labeled = true;
  } else if (header != kHeader) {
    throw ParseError(source_name + ":1: unexpected header '" + std::string(header) + "'");
  }
  const std::size_t expected_fields = out.labeled ? 10 : 9;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty()) {
      continue;
    }
    const auto fail = [&](const std::string& what) {
      return ParseError(fmt::format("{}:{}: {}", source_name, line_no, what));
    };
    const auto fields = split_commas(row);
    if (fields.size() != expected_fields) {
      throw fail(fmt::format("expected {} fields, got {}", expected_fields, fields.size()));
    }
    std::size_t frame = 0;
    if (!parse_number(fields[0], frame)) {
      throw fail("bad frame index '" + std::string(fields[0]) + "'");
    }
    if (frame != frame_index) {
      throw fail(fmt::format("frame column {} does not match file index {}", frame, frame_index));
    }
    double values[8];
    for (std::size_t k = 0; k < 8; ++k) {
      if (!parse_number(fields[k + 1], values[k])) {
        throw fail("bad number '" + std::string(fields[k + 1]) + "'");
      }
      if (!std::isfinite(values[k])) {
        throw DataError(fmt::format("{}:{}: non-finite value", source_name, line_no));
      }
    }
    Detection det;
    det.confidence = values[0];
    det.box.center = {values[1], values[2], values[3]};
    det.box.length = values[4];
    det.box.width = values[5];
    det.box.height = values[6];
    det.box.yaw = yaw_normalize(values[7]);
    if (det.confidence < 0.0 || det.confidence > 1.0) {
      throw DataError(fmt::format("{}:{}: confidence outside [0,1]", source_name, line_no));
    }
    try {
      validate_box(det.box);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    }
    if (out.labeled && !fields[9].empty()) {
      std::uint32_t id = 0;
      if (!parse_number(fields[9], id)) {
        throw fail("bad gt_id '" + std::string(fields[9]) + "'");
      }
      det.gt_id = id;
    }
    out.detections.push_back(det);
  }
  return out;
}

std::string format_detections(const std::vector<Detection>& detections, std::size_t frame_index,
                              bool labeled) {
  std::string out(labeled ? kLabeledHeader : kHeader);
  out += '\n';
  for (const Detection& d : detections) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}", frame_index, format_real(d.confidence),
                       format_real(d.box.center.x), format_real(d.box.center.y),
                       format_real(d.box.center.z), format_real(d.box.length),
                       format_real(d.box.width), format_real(d.box.height), format_real(d.box.yaw));
    if (labeled) {
      out += ',';
      if (d.gt_id) {
        out += std::to_string(*d.gt_id);
      }
    }
    out += '\n';
  }
  return out;
}

void write_frame(const fs::path& root, const Frame& frame) {
  write_point_file(point_file_path(root, frame.index), frame.cloud);
  binary::write_file(detection_file_path(root, frame.index),
                     format_detections(frame.detections, frame.index, frame.labeled));
}

void write_sequence_meta(const fs::path& root, std::size_t frame_count, const std::string& name) {
  std::string text = fmt::format("frame_count={}\n", frame_count);
  if (!name.empty()) {
    text += "name=" + name + "\n";
  }
  binary::write_file(root / "sequence.meta", text);
}

SequenceSource::SequenceSource(fs::path root, std::size_t frame_count, std::string name,
                               IngestConfig config)
    : root_(std::move(root)),
      frame_count_(frame_count),
      name_(std::move(name)),
      config_(config) {}

SequenceSource SequenceSource::open(const fs::path& root, IngestConfig config) {
  config.validate();
  const fs::path meta = root / "sequence.meta";
  if (!fs::exists(meta)) {
    throw NotFoundError("sequence metadata not found: " + meta.string());
  }
  std::istringstream in(binary::read_file(meta));
  std::optional<std::size_t> frame_count;
  std::string name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty() || row.front() == '#') {
      continue;
    }
    const std::size_t eq = row.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(fmt::format("{}:{}: expected key=value", meta.string(), line_no));
    }
    const std::string_view key = row.substr(0, eq);
    const std::string_view value = row.substr(eq + 1);
    if (key == "frame_count") {
      std::size_t n = 0;
      if (!parse_number(value, n)) {
        throw ParseError(fmt::format("{}:{}: bad frame_count", meta.string(), line_no));
      }
      frame_count = n;
    } else if (key == "name") {
      name = std::string(value);
    }
  }
  if (!frame_count) {
    throw ParseError(meta.string() + ": missing frame_count");
  }
  for (std::size_t i = 0; i < *frame_count; ++i) {
    for (const fs::path& p : {point_file_path(root, i), detection_file_path(root, i)}) {
      if (!fs::exists(p)) {
        throw NotFoundError("sequence file missing: " + p.string());
      }
    }
  }
  return SequenceSource(root, *frame_count, std::move(name), config);
}

Frame SequenceSource::load_frame(std::size_t index) const {
  if (index >= frame_count_) {
    throw InvalidArgument(fmt::format("frame index {} out of range [0, {})", index, frame_count_));
  }
  Frame frame;
  frame.index = index;
  frame.cloud = read_point_file(point_file_path(root_, index), index);
  const fs::path det_path = detection_file_path(root_, index);
  if (!fs::exists(det_path)) {
    throw NotFoundError("detection file not found: " + det_path.string());
  }
  std::istringstream in(binary::read_file(det_path));
  DetectionFile parsed = parse_detections(in, index, det_path.string());
  frame.detections = std::move(parsed.detections);
  frame.labeled = parsed.labeled;
  return frame;
}

Frame admit_detections(Frame frame, const IngestConfig& cfg) {
  auto& dets = frame.detections;
  std::erase_if(dets, [&](const Detection& d) { return !(d.confidence > cfg.confidence_threshold); });
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  if (dets.size() > cfg.max_objects) {
    dets.resize(cfg.max_objects);
  }
  return frame;
}

}  // namespace pcdan
