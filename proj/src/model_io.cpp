#include "pcdan/model_io.hpp"

#include <fmt/format.h>

#include "pcdan/binary_io.hpp"
#include "pcdan/error.hpp"

namespace pcdan {

namespace {

constexpr std::string_view kPointNetMagic = "PNW1";
constexpr std::string_view kCompressionMagic = "CMP1";

void encode_layers(std::string& out, const std::vector<DenseLayer>& layers) {
  binary::put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const DenseLayer& layer : layers) {
    binary::put_u32(out, static_cast<std::uint32_t>(layer.out_dim()));
    binary::put_u32(out, static_cast<std::uint32_t>(layer.in_dim()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        binary::put_f32(out, static_cast<float>(layer.weight(r, c)));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      binary::put_f32(out, static_cast<float>(layer.bias[r]));
    }
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (std::string_view(bytes_).substr(pos_, magic.size()) != magic) {
      throw FormatError(fmt::format("{}: bad magic at byte {}, expected \"{}\"", source_, pos_, magic));
    }
    pos_ += magic.size();
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    const std::uint32_t v = binary::get_u32(bytes_.data() + pos_);
    pos_ += 4;
    return v;
  }

  double f32(const char* what) {
    need(4, what);
    const float v = binary::get_f32(bytes_.data() + pos_);
    pos_ += 4;
    return static_cast<double>(v);
  }

  std::vector<DenseLayer> layers(const char* section) {
    const std::uint32_t count = u32("layer count");
    if (count == 0) {
      throw FormatError(fmt::format("{}: {} section has no layers", source_, section));
    }
    std::vector<DenseLayer> out;
    for (std::uint32_t l = 0; l < count; ++l) {
      const std::uint32_t rows = u32("layer rows");
      const std::uint32_t cols = u32("layer cols");
      if (rows == 0 || cols == 0) {
        throw FormatError(fmt::format("{}: {} layer {} has a zero dimension", source_, section, l));
      }
      if (!out.empty() && out.back().out_dim() != cols) {
        throw FormatError(fmt::format("{}: {} layer {} takes {} inputs but previous layer emits {}",
                                      source_, section, l, cols, out.back().out_dim()));
      }
      const std::size_t payload = (static_cast<std::size_t>(rows) * cols + rows) * 4;
      need(payload, "layer payload");
      DenseLayer layer;
      layer.weight.resize(rows, cols);
      layer.bias.resize(rows);
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
          layer.weight(r, c) = f32("weight");
        }
      }
      for (std::uint32_t r = 0; r < rows; ++r) {
        layer.bias[r] = f32("bias");
      }
      out.push_back(std::move(layer));
    }
    return out;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(fmt::format("{}: truncated while reading {} at byte {}", source_, what, pos_));
    }
  }

  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

PointNetWeights read_pointnet(Reader& in, const std::string& source) {
  in.expect_magic(kPointNetMagic);
  PointNetWeights w;
  w.layers = in.layers("pointnet");
  try {
    w.validate();
  } catch (const ConfigError& e) {
    throw FormatError(source + ": " + e.what());
  }
  return w;
}

}  // namespace

std::string encode_model(const ModelWeights& model) {
  model.pointnet.validate();
  std::string out(kPointNetMagic);
  encode_layers(out, model.pointnet.layers);
  if (model.compression) {
    model.compression->validate();
    out += kCompressionMagic;
    encode_layers(out, model.compression->layers);
    binary::put_f32(out, static_cast<float>(model.compression->dummy_score));
  }
  return out;
}

ModelWeights decode_model(const std::string& bytes, const std::string& source_name) {
  Reader in(bytes, source_name);
  ModelWeights model;
  model.pointnet = read_pointnet(in, source_name);
  if (!in.at_end()) {
    in.expect_magic(kCompressionMagic);
    CompressionNet net;
    net.layers = in.layers("compression");
    net.dummy_score = in.f32("dummy score");
    try {
      net.validate_standard();
    } catch (const ConfigError& e) {
      throw FormatError(source_name + ": " + e.what());
    }
    if (net.input_dim() != 2 * model.pointnet.output_dim()) {
      throw FormatError(fmt::format("{}: compression net takes {} channels but features pair to {}",
                                    source_name, net.input_dim(), 2 * model.pointnet.output_dim()));
    }
    model.compression = std::move(net);
  }
  if (!in.at_end()) {
    throw FormatError(fmt::format("{}: trailing bytes at offset {}", source_name, in.offset()));
  }
  return model;
}

PointNetWeights load_weights(const std::filesystem::path& path) {
  const std::string bytes = binary::read_file(path);
  Reader in(bytes, path.string());
  return read_pointnet(in, path.string());
}

void save_weights(const PointNetWeights& w, const std::filesystem::path& path) {
  binary::write_file(path, encode_model({w, std::nullopt}));
}

ModelWeights load_model(const std::filesystem::path& path) {
  return decode_model(binary::read_file(path), path.string());
}

void save_model(const ModelWeights& model, const std::filesystem::path& path) {
  binary::write_file(path, encode_model(model));
}

}  // namespace pcdan
