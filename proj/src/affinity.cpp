#include "pcdan/affinity.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>

#include "pcdan/error.hpp"

namespace pcdan {

namespace {

constexpr std::array<std::size_t, 6> kDefaultWidths = {1024, 512, 256, 128, 64, 1};

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

MatrixXd relu(const MatrixXd& z) { return z.cwiseMax(0.0); }

// Output of the network for an all-zero input: only biases propagate.
double zero_input_response(const CompressionNet& net) {
  VectorXd h = net.layers.front().bias;
  for (std::size_t l = 1; l < net.layers.size(); ++l) {
    h = net.layers[l].weight * h.cwiseMax(0.0) + net.layers[l].bias;
  }
  return h[0];
}

}  // namespace

void CompressionNet::validate() const {
  validate_chain(layers, "compression net");
  if (layers.back().out_dim() != 1) {
    throw ConfigError(fmt::format("compression net: last layer emits {} values, expected 1",
                                  layers.back().out_dim()));
  }
  if (!std::isfinite(dummy_score)) {
    throw ConfigError("compression net: non-finite dummy score");
  }
}

void CompressionNet::validate_standard() const {
  validate();
  if (layers.size() != kStandardDepth) {
    throw ConfigError(fmt::format("compression net: {} layers, expected {}", layers.size(),
                                  kStandardDepth));
  }
}

std::span<const std::size_t> CompressionNet::default_widths() { return kDefaultWidths; }

CompressionNet CompressionNet::random(std::uint64_t seed, std::span<const std::size_t> widths) {
  CompressionNet net;
  net.layers = he_uniform_layers(widths, seed);
  net.validate();
  return net;
}

PairTensor::PairTensor(const FeatureSet& prev, const FeatureSet& cur) {
  if (prev.dim() != cur.dim()) {
    throw ConfigError(fmt::format("pair tensor: feature widths differ ({} vs {})", prev.dim(),
                                  cur.dim()));
  }
  if (prev.capacity() != cur.capacity()) {
    throw ConfigError(fmt::format("pair tensor: capacities differ ({} vs {})", prev.capacity(),
                                  cur.capacity()));
  }
  if (prev.count > prev.capacity() || cur.count > cur.capacity()) {
    throw ConfigError("pair tensor: feature count exceeds capacity");
  }
  capacity_ = prev.capacity();
  prev_ = prev.features.topRows(idx(prev.count));
  cur_ = cur.features.topRows(idx(cur.count));
}

VectorXd PairTensor::cell(std::size_t i, std::size_t j) const {
  const Index d = prev_.cols();
  VectorXd out = VectorXd::Zero(2 * d);
  if (i < count_prev() && j < count_cur()) {
    out.head(d) = prev_.row(idx(i)).transpose();
    out.tail(d) = cur_.row(idx(j)).transpose();
  }
  return out;
}

PairTensor build_pair_tensor(const FeatureSet& prev, const FeatureSet& cur) {
  return PairTensor(prev, cur);
}

CompressionTrace compression_forward_trace(const PairTensor& t, const CompressionNet& net) {
  net.validate();
  if (net.input_dim() != t.channels()) {
    throw ConfigError(fmt::format("compression net takes {} channels, pair tensor has {}",
                                  net.input_dim(), t.channels()));
  }
  const std::size_t cap = t.capacity();
  const std::size_t np = t.count_prev();
  const std::size_t nc = t.count_cur();
  const Index d = idx(t.channels() / 2);

  CompressionTrace trace;
  trace.m = MatrixXd::Constant(idx(cap), idx(cap), zero_input_response(net));
  if (np == 0 || nc == 0) {
    return trace;
  }

  // The first layer acting on [f; g] splits into W_prev f + W_cur g, so the
  // per-object projections are computed once and broadcast over the grid.
  const DenseLayer& first = net.layers.front();
  const MatrixXd proj_prev = t.prev_features() * first.weight.leftCols(d).transpose();
  const MatrixXd proj_cur = t.cur_features() * first.weight.rightCols(d).transpose();
  MatrixXd z(idx(np * nc), first.weight.rows());
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      z.row(idx(i * nc + j)) =
          proj_prev.row(idx(i)) + proj_cur.row(idx(j)) + first.bias.transpose();
    }
  }
  trace.pre_activation.push_back(z);
  for (std::size_t l = 1; l < net.layers.size(); ++l) {
    trace.post_activation.push_back(relu(trace.pre_activation.back()));
    const DenseLayer& layer = net.layers[l];
    MatrixXd next = trace.post_activation.back() * layer.weight.transpose();
    next.rowwise() += layer.bias.transpose();
    trace.pre_activation.push_back(std::move(next));
  }
  const MatrixXd& out = trace.pre_activation.back();
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      trace.m(idx(i), idx(j)) = out(idx(i * nc + j), 0);
    }
  }
  return trace;
}

MatrixXd compression_forward(const PairTensor& t, const CompressionNet& net) {
  return compression_forward_trace(t, net).m;
}

CompressionGradient CompressionGradient::zeros_like(const CompressionNet& net) {
  CompressionGradient g;
  for (const DenseLayer& layer : net.layers) {
    g.layers.push_back({MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        VectorXd::Zero(layer.bias.size())});
  }
  return g;
}

CompressionGradient& CompressionGradient::operator+=(const CompressionGradient& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  dummy_score += other.dummy_score;
  return *this;
}

CompressionGradient& CompressionGradient::operator*=(double s) {
  for (DenseLayer& layer : layers) {
    layer.weight *= s;
    layer.bias *= s;
  }
  dummy_score *= s;
  return *this;
}

bool CompressionGradient::all_finite() const {
  for (const DenseLayer& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      return false;
    }
  }
  return std::isfinite(dummy_score);
}

CompressionGradient compression_backward(const PairTensor& t, const CompressionNet& net,
                                         const CompressionTrace& trace, const MatrixXd& d_m) {
  CompressionGradient grad = CompressionGradient::zeros_like(net);
  const std::size_t np = t.count_prev();
  const std::size_t nc = t.count_cur();
  if (np == 0 || nc == 0) {
    return grad;
  }
  if (d_m.rows() < idx(np) || d_m.cols() < idx(nc)) {
    throw ConfigError("compression_backward: gradient matrix smaller than the valid block");
  }
  MatrixXd delta(idx(np * nc), 1);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      delta(idx(i * nc + j), 0) = d_m(idx(i), idx(j));
    }
  }
  for (std::size_t l = net.layers.size(); l-- > 1;) {
    const MatrixXd& input = trace.post_activation[l - 1];
    grad.layers[l].weight = delta.transpose() * input;
    grad.layers[l].bias = delta.colwise().sum().transpose();
    MatrixXd back = delta * net.layers[l].weight;
    const MatrixXd& z = trace.pre_activation[l - 1];
    delta = back.array() * (z.array() > 0.0).cast<double>();
  }
  const Index d = idx(t.channels() / 2);
  const Index hidden = delta.cols();
  MatrixXd sum_prev = MatrixXd::Zero(idx(np), hidden);
  MatrixXd sum_cur = MatrixXd::Zero(idx(nc), hidden);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      sum_prev.row(idx(i)) += delta.row(idx(i * nc + j));
      sum_cur.row(idx(j)) += delta.row(idx(i * nc + j));
    }
  }
  grad.layers[0].weight.leftCols(d) = sum_prev.transpose() * t.prev_features();
  grad.layers[0].weight.rightCols(d) = sum_cur.transpose() * t.cur_features();
  grad.layers[0].bias = delta.colwise().sum().transpose();
  return grad;
}

MatrixXd append_dummy_column(const MatrixXd& m, double dummy_score) {
  MatrixXd out(m.rows(), m.cols() + 1);
  out.leftCols(m.cols()) = m;
  out.col(m.cols()).setConstant(dummy_score);
  return out;
}

MatrixXd append_dummy_row(const MatrixXd& m, double dummy_score) {
  MatrixXd out(m.rows() + 1, m.cols());
  out.topRows(m.rows()) = m;
  out.row(m.rows()).setConstant(dummy_score);
  return out;
}

MatrixXd masked_row_softmax(const MatrixXd& m1, std::size_t count_prev, std::size_t count_cur) {
  const Index n = m1.rows();
  const Index dummy = m1.cols() - 1;
  MatrixXd a = MatrixXd::Zero(n, m1.cols());
  VectorXd logits(m1.cols());
  for (Index i = 0; i < idx(count_prev); ++i) {
    for (Index j = 0; j < m1.cols(); ++j) {
      logits[j] = (j < idx(count_cur) || j == dummy) ? m1(i, j) : kMaskedLogit;
    }
    const double peak = logits.maxCoeff();
    const VectorXd e = (logits.array() - peak).exp().matrix();
    a.row(i) = (e / e.sum()).transpose();
  }
  return a;
}

MatrixXd masked_column_softmax(const MatrixXd& m2, std::size_t count_prev, std::size_t count_cur) {
  const Index dummy = m2.rows() - 1;
  MatrixXd a = MatrixXd::Zero(m2.rows(), m2.cols());
  VectorXd logits(m2.rows());
  for (Index j = 0; j < idx(count_cur); ++j) {
    for (Index i = 0; i < m2.rows(); ++i) {
      logits[i] = (i < idx(count_prev) || i == dummy) ? m2(i, j) : kMaskedLogit;
    }
    const double peak = logits.maxCoeff();
    const VectorXd e = (logits.array() - peak).exp().matrix();
    a.col(j) = e / e.sum();
  }
  return a;
}

AffinityMatrices softmax_augmented(MatrixXd m1, MatrixXd m2, std::size_t count_prev,
                                   std::size_t count_cur) {
  const Index n = m1.rows();
  if (m1.cols() != n + 1 || m2.rows() != n + 1 || m2.cols() != n) {
    throw ConfigError("softmax_augmented: augmented shapes are inconsistent");
  }
  if (count_prev > static_cast<std::size_t>(n) || count_cur > static_cast<std::size_t>(n)) {
    throw ConfigError("softmax_augmented: counts exceed capacity");
  }
  AffinityMatrices out;
  out.m = m1.leftCols(n);
  out.a1 = masked_row_softmax(m1, count_prev, count_cur);
  out.a2 = masked_column_softmax(m2, count_prev, count_cur);
  out.a1_trim = out.a1.leftCols(n);
  out.a2_trim = out.a2.topRows(n);
  out.m1 = std::move(m1);
  out.m2 = std::move(m2);
  out.count_prev = count_prev;
  out.count_cur = count_cur;
  return out;
}

AffinityMatrices augment_and_softmax(const MatrixXd& m, std::size_t count_prev,
                                     std::size_t count_cur, double dummy_score) {
  if (m.rows() != m.cols()) {
    throw ConfigError("augment_and_softmax: M must be square");
  }
  return softmax_augmented(append_dummy_column(m, dummy_score), append_dummy_row(m, dummy_score),
                           count_prev, count_cur);
}

AffinityMatrices predict_affinity(const FeatureSet& prev, const FeatureSet& cur,
                                  const CompressionNet& net) {
  const PairTensor t = build_pair_tensor(prev, cur);
  return augment_and_softmax(compression_forward(t, net), t.count_prev(), t.count_cur(),
                             net.dummy_score);
}

}  // namespace pcdan
