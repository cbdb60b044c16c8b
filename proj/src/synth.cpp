#include "pcdan/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "pcdan/error.hpp"

namespace pcdan {

namespace fs = std::filesystem;

namespace {

constexpr double kShellScale = 0.95;
constexpr int kPlacementAttempts = 5000;

struct SynthObject {
  std::uint32_t id = 0;
  ShapeKind kind = ShapeKind::BoxShell;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  std::size_t first_frame = 0;
  std::size_t end_frame = 0;  // exclusive
  std::vector<Point3> centers;  // one per frame in [first_frame, end_frame)

  double diagonal() const { return std::sqrt(length * length + width * width + height * height); }
  bool alive(std::size_t f) const { return f >= first_frame && f < end_frame; }
  const Point3& center_at(std::size_t f) const { return centers[f - first_frame]; }
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point3 sample_shell(ShapeKind kind, double hl, double hw, double hh, std::mt19937_64& rng) {
  switch (kind) {
    case ShapeKind::BoxShell: {
      const double areas[3] = {hw * hh, hl * hh, hl * hw};  // faces normal to x, y, z
      const double total = areas[0] + areas[1] + areas[2];
      const double pick = uniform(rng, 0.0, total);
      const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double u = uniform(rng, -1.0, 1.0);
      const double v = uniform(rng, -1.0, 1.0);
      if (pick < areas[0]) return {side * hl, u * hw, v * hh};
      if (pick < areas[0] + areas[1]) return {u * hl, side * hw, v * hh};
      return {u * hl, v * hw, side * hh};
    }
    case ShapeKind::SphereShell: {
      std::normal_distribution<double> n(0.0, 1.0);
      double x = 0.0, y = 0.0, z = 0.0, r = 0.0;
      do {
        x = n(rng);
        y = n(rng);
        z = n(rng);
        r = std::sqrt(x * x + y * y + z * z);
      } while (r < 1e-12);
      return {hl * x / r, hw * y / r, hh * z / r};
    }
    case ShapeKind::CylinderShell: {
      const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      if (uniform(rng, 0.0, 1.0) < 0.7) {
        return {hl * std::cos(theta), hw * std::sin(theta), uniform(rng, -hh, hh)};
      }
      const double rad = std::sqrt(uniform(rng, 0.0, 1.0));
      const double cap = uniform(rng, 0.0, 1.0) < 0.5 ? -hh : hh;
      return {hl * rad * std::cos(theta), hw * rad * std::sin(theta), cap};
    }
  }
  return {};
}

// Constant-velocity walk reflecting off the walls of the shrunk arena.
std::vector<Point3> simulate(Point3 start, double vx, double vy, std::size_t steps, double lo_x,
                             double hi_x, double lo_y, double hi_y) {
  std::vector<Point3> out;
  out.reserve(steps);
  Point3 p = start;
  for (std::size_t s = 0; s < steps; ++s) {
    out.push_back(p);
    p.x += vx;
    p.y += vy;
    if (p.x < lo_x || p.x > hi_x) {
      vx = -vx;
      p.x = std::clamp(p.x, lo_x, hi_x);
    }
    if (p.y < lo_y || p.y > hi_y) {
      vy = -vy;
      p.y = std::clamp(p.y, lo_y, hi_y);
    }
  }
  return out;
}

bool separated(const SynthObject& a, const SynthObject& b) {
  const double min_gap = 2.0 * std::max(a.diagonal(), b.diagonal());
  const std::size_t lo = std::max(a.first_frame, b.first_frame);
  const std::size_t hi = std::min(a.end_frame, b.end_frame);
  for (std::size_t f = lo; f < hi; ++f) {
    const Point3& p = a.center_at(f);
    const Point3& q = b.center_at(f);
    if (std::hypot(p.x - q.x, p.y - q.y) < min_gap) {
      return false;
    }
  }
  return true;
}

SynthObject place_object(const SynthConfig& cfg, std::uint32_t id, std::size_t creation_index,
                         std::size_t first_frame, std::size_t end_frame,
                         const std::vector<SynthObject>& placed, std::mt19937_64& rng) {
  SynthObject obj;
  obj.id = id;
  obj.kind = cfg.shape_kinds[creation_index % cfg.shape_kinds.size()];
  obj.length = uniform(rng, 0.6, 4.0);
  obj.width = uniform(rng, 0.5, 2.5);
  obj.height = uniform(rng, 0.5, 2.0);
  obj.yaw = yaw_normalize(uniform(rng, -std::numbers::pi, std::numbers::pi));
  obj.first_frame = first_frame;
  obj.end_frame = end_frame;

  const double margin = 0.5 * obj.diagonal();
  const double lo_x = cfg.arena_min.x + margin;
  const double hi_x = cfg.arena_max.x - margin;
  const double lo_y = cfg.arena_min.y + margin;
  const double hi_y = cfg.arena_max.y - margin;
  if (lo_x >= hi_x || lo_y >= hi_y) {
    throw DataError("synth: arena too small for object extents");
  }
  const double z = std::clamp(cfg.arena_min.z + 0.5 * obj.height, cfg.arena_min.z, cfg.arena_max.z);
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const Point3 start{uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y), z};
    const double speed = cfg.speed_min == cfg.speed_max ? cfg.speed_min
                                                        : uniform(rng, cfg.speed_min, cfg.speed_max);
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    obj.centers = simulate(start, speed * std::cos(heading), speed * std::sin(heading),
                           end_frame - first_frame, lo_x, hi_x, lo_y, hi_y);
    const bool ok = std::all_of(placed.begin(), placed.end(),
                                [&](const SynthObject& other) { return separated(obj, other); });
    if (ok) {
      return obj;
    }
  }
  throw DataError(fmt::format("synth: could not place object {} without overlap; enlarge the arena",
                              id));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw InvalidArgument(fmt::format("synth config: bad value '{}' for {}", text, key));
  }
  return v;
}

Point3 parse_point(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) {
    throw InvalidArgument(fmt::format("synth config: {} needs x,y,z", key));
  }
  return {parse_value<double>(key, parts[0]), parse_value<double>(key, parts[1]),
          parse_value<double>(key, parts[2])};
}

}  // namespace

void SynthConfig::validate() const {
  if (n_frames < 1) throw InvalidArgument("synth: frames must be positive");
  if (points_per_object < 1) throw InvalidArgument("synth: points per object must be positive");
  if (shape_kinds.empty()) throw InvalidArgument("synth: no shape kinds");
  if (!(speed_min >= 0.0 && speed_max >= speed_min)) {
    throw InvalidArgument("synth: speed range must satisfy 0 <= min <= max");
  }
  if (!(arena_min.x < arena_max.x && arena_min.y < arena_max.y && arena_min.z <= arena_max.z)) {
    throw InvalidArgument("synth: arena bounds are empty");
  }
  for (const SynthEvent& e : events) {
    if (e.frame >= n_frames) {
      throw InvalidArgument(fmt::format("synth: event at frame {} beyond sequence end", e.frame));
    }
  }
}

void apply_synth_setting(SynthConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "objects") {
    cfg.n_objects = parse_value<std::size_t>(key, value);
  } else if (key == "frames") {
    cfg.n_frames = parse_value<std::size_t>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_value<std::uint64_t>(key, value);
  } else if (key == "points") {
    cfg.points_per_object = parse_value<std::size_t>(key, value);
  } else if (key == "speed_min") {
    cfg.speed_min = parse_value<double>(key, value);
  } else if (key == "speed_max") {
    cfg.speed_max = parse_value<double>(key, value);
  } else if (key == "arena_min") {
    cfg.arena_min = parse_point(key, value);
  } else if (key == "arena_max") {
    cfg.arena_max = parse_point(key, value);
  } else if (key == "name") {
    cfg.name = value;
  } else if (key == "shapes") {
    cfg.shape_kinds.clear();
    for (const std::string& s : split(value, ',')) {
      if (s == "box") cfg.shape_kinds.push_back(ShapeKind::BoxShell);
      else if (s == "sphere") cfg.shape_kinds.push_back(ShapeKind::SphereShell);
      else if (s == "cylinder") cfg.shape_kinds.push_back(ShapeKind::CylinderShell);
      else throw InvalidArgument("synth config: unknown shape '" + s + "'");
    }
  } else if (key == "leave") {
    const auto parts = split(value, ':');
    if (parts.size() != 2) {
      throw InvalidArgument("synth config: leave expects frame:id");
    }
    cfg.events.push_back({SynthEvent::Kind::Leave, parse_value<std::size_t>(key, parts[0]),
                          parse_value<std::uint32_t>(key, parts[1])});
  } else if (key == "enter") {
    cfg.events.push_back({SynthEvent::Kind::Enter, parse_value<std::size_t>(key, value), 0});
  } else {
    throw InvalidArgument("synth config: unknown key '" + key + "'");
  }
}

SynthConfig parse_synth_config(std::istream& in, const std::string& source_name) {
  SynthConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(fmt::format("{}:{}: expected key=value", source_name, line_no));
    }
    try {
      apply_synth_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw ParseError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    }
  }
  return cfg;
}

SequenceSource generate(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::mt19937_64 rng(mix(cfg.seed, 0x5EEDull));

  // Lifetimes: initial objects live from frame 0, entering ones from their event.
  std::map<std::uint32_t, std::size_t> end_frame;
  std::vector<std::pair<std::uint32_t, std::size_t>> births;  // (id, first frame)
  for (std::uint32_t id = 0; id < cfg.n_objects; ++id) {
    births.emplace_back(id, 0);
    end_frame[id] = cfg.n_frames;
  }
  std::vector<SynthEvent> events = cfg.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const SynthEvent& a, const SynthEvent& b) { return a.frame < b.frame; });
  auto next_id = static_cast<std::uint32_t>(cfg.n_objects);
  for (const SynthEvent& e : events) {
    if (e.kind == SynthEvent::Kind::Enter) {
      births.emplace_back(next_id, e.frame);
      end_frame[next_id] = cfg.n_frames;
      ++next_id;
    } else {
      const auto it = end_frame.find(e.object);
      const auto born = std::find_if(births.begin(), births.end(),
                                     [&](const auto& b) { return b.first == e.object; });
      if (it == end_frame.end() || born->second >= e.frame || it->second < e.frame) {
        throw InvalidArgument(
            fmt::format("synth: leave event for object {} at frame {} refers to no live object",
                        e.object, e.frame));
      }
      it->second = e.frame;
    }
  }

  std::vector<SynthObject> objects;
  for (std::size_t k = 0; k < births.size(); ++k) {
    const auto [id, first] = births[k];
    if (end_frame[id] <= first) continue;
    objects.push_back(place_object(cfg, id, k, first, end_frame[id], objects, rng));
  }

  fs::create_directories(out_dir);
  for (std::size_t f = 0; f < cfg.n_frames; ++f) {
    Frame frame;
    frame.index = f;
    frame.labeled = true;
    frame.cloud.frame_index = f;
    for (const SynthObject& obj : objects) {
      if (!obj.alive(f)) continue;
      OrientedBox3 box{obj.center_at(f), obj.length, obj.width, obj.height, obj.yaw};
      std::mt19937_64 point_rng(mix(mix(cfg.seed, f + 1), obj.id + 0x100000001ull));
      const double hl = 0.5 * obj.length * kShellScale;
      const double hw = 0.5 * obj.width * kShellScale;
      const double hh = 0.5 * obj.height * kShellScale;
      for (std::size_t p = 0; p < cfg.points_per_object; ++p) {
        frame.cloud.points.push_back(from_box_frame(box, sample_shell(obj.kind, hl, hw, hh, point_rng)));
      }
      frame.detections.push_back({box, 1.0, obj.id});
    }
    std::mt19937_64 order_rng(mix(cfg.seed ^ 0xD0D0ull, f));
    std::shuffle(frame.detections.begin(), frame.detections.end(), order_rng);
    write_frame(out_dir, frame);
  }
  write_sequence_meta(out_dir, cfg.n_frames, cfg.name);
  return SequenceSource::open(out_dir);
}

void PerturbConfig::validate() const {
  const auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!(det_noise_sigma >= 0.0)) throw InvalidArgument("perturb: sigma must be non-negative");
  if (!rate(fp_rate) || !rate(fn_rate)) throw InvalidArgument("perturb: rates must lie in [0, 1]");
  if (!(fp_conf_min >= 0.0 && fp_conf_min <= fp_conf_max && fp_conf_max <= 1.0)) {
    throw InvalidArgument("perturb: need 0 <= fp_conf_min <= fp_conf_max <= 1");
  }
}

SequenceSource perturb(const SequenceSource& src, const PerturbConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  for (std::size_t f = 0; f < src.frame_count(); ++f) {
    Frame frame = src.load_frame(f);
    if (!cfg.is_identity()) {
      std::mt19937_64 rng(mix(mix(cfg.seed, 0xF00Dull), f));
      std::normal_distribution<double> jitter(0.0, cfg.det_noise_sigma);
      std::vector<Detection> out;
      for (const Detection& d : frame.detections) {
        if (!d.gt_id) {
          out.push_back(d);
          continue;
        }
        const bool inject = cfg.fp_rate > 0.0 && uniform(rng, 0.0, 1.0) < cfg.fp_rate;
        const bool drop = cfg.fn_rate > 0.0 && uniform(rng, 0.0, 1.0) < cfg.fn_rate;
        if (!drop) {
          Detection kept = d;
          if (cfg.det_noise_sigma > 0.0) {
            kept.box.center.x += jitter(rng);
            kept.box.center.y += jitter(rng);
            kept.box.center.z += jitter(rng);
          }
          out.push_back(kept);
        }
        if (inject) {
          Detection fake;
          fake.box.length = uniform(rng, 0.5, 3.0);
          fake.box.width = uniform(rng, 0.5, 2.0);
          fake.box.height = uniform(rng, 0.5, 2.0);
          fake.box.center = {uniform(rng, cfg.arena_min.x, cfg.arena_max.x),
                             uniform(rng, cfg.arena_min.y, cfg.arena_max.y),
                             cfg.arena_min.z + 0.5 * fake.box.height};
          fake.box.yaw = yaw_normalize(uniform(rng, -std::numbers::pi, std::numbers::pi));
          fake.confidence = cfg.fp_conf_min == cfg.fp_conf_max
                                ? cfg.fp_conf_min
                                : uniform(rng, cfg.fp_conf_min, cfg.fp_conf_max);
          const auto pos = std::uniform_int_distribution<std::size_t>(0, out.size())(rng);
          out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), fake);
        }
      }
      frame.detections = std::move(out);
    }
    write_frame(out_dir, frame);
  }
  write_sequence_meta(out_dir, src.frame_count(), src.name());
  return SequenceSource::open(out_dir, src.config());
}

}  // namespace pcdan
