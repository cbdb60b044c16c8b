#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pcdan/binary_io.hpp"
#include "pcdan/error.hpp"
#include "pcdan/featurizer.hpp"
#include "pcdan/model_io.hpp"
#include "test_support.hpp"

namespace pcdan {
namespace {

using testing::TempDir;

ObjectPoints random_object(std::mt19937_64& rng, std::size_t valid, std::size_t capacity) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ObjectPoints o;
  o.valid_count = valid;
  o.points.assign(capacity, Point3{});
  for (std::size_t i = 0; i < valid; ++i) o.points[i] = {u(rng), u(rng), u(rng)};
  return o;
}

// Per-point embedding with Eigen products, then an explicit max over points.
Eigen::VectorXd naive_feature(const ObjectPoints& o, const PointNetWeights& w) {
  Eigen::VectorXd pooled = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(w.output_dim()), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < o.valid_count; ++i) {
    Eigen::VectorXd h(3);
    h << o.points[i].x, o.points[i].y, o.points[i].z;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      h = w.layers[l].weight * h + w.layers[l].bias;
      if (l + 1 < w.layers.size()) h = h.cwiseMax(0.0);
    }
    pooled = pooled.cwiseMax(h);
  }
  return pooled;
}

TEST(PointNetForward, EmptyObjectIsZero) {
  const PointNetWeights w = PointNetWeights::random(1);
  ObjectPoints o;
  o.points.assign(8, Point3{});
  const FeatureVec f = pointnet_forward(o, w);
  EXPECT_EQ(f.size(), 512);
  EXPECT_TRUE((f.array() == 0.0).all());
}

TEST(PointNetForward, IdentityLayerPoolsCoordinates) {
  PointNetWeights w;
  w.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)});
  ObjectPoints o;
  o.points = {{1, 0, 0}, {0, 2, 0}};
  o.valid_count = 2;
  const FeatureVec f = pointnet_forward(o, w);
  EXPECT_EQ(f, (Eigen::Vector3d(1, 2, 0)));
}

TEST(PointNetForward, RejectsWrongInputWidth) {
  PointNetWeights w;
  w.layers.push_back({Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)});
  ObjectPoints o;
  o.points = {{1, 0, 0}};
  o.valid_count = 1;
  EXPECT_THROW(pointnet_forward(o, w), ConfigError);
}

TEST(PointNetForward, MatchesPerPointOracle) {
  std::mt19937_64 rng(21);
  const PointNetWeights w = PointNetWeights::random(2);
  for (int trial = 0; trial < 20; ++trial) {
    const ObjectPoints o = random_object(rng, 1 + trial * 3, 64);
    const FeatureVec f = pointnet_forward(o, w);
    const Eigen::VectorXd oracle = naive_feature(o, w);
    EXPECT_LE((f - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PointNetForward, AddingAPointNeverLowersAFeature) {
  std::mt19937_64 rng(22);
  const PointNetWeights w = PointNetWeights::random(3);
  ObjectPoints o = random_object(rng, 10, 32);
  FeatureVec before = pointnet_forward(o, w);
  for (std::size_t k = 10; k < 32; ++k) {
    o.points[k] = random_object(rng, 1, 1).points[0];
    o.valid_count = k + 1;
    const FeatureVec after = pointnet_forward(o, w);
    EXPECT_TRUE((after.array() >= before.array()).all());
    before = after;
  }
}

TEST(PointNetForward, PermutationInvariantBitwise) {
  std::mt19937_64 rng(23);
  const PointNetWeights w = PointNetWeights::random(4);
  for (int trial = 0; trial < 20; ++trial) {
    ObjectPoints o = random_object(rng, 40, 64);
    const FeatureVec ref = pointnet_forward(o, w);
    for (int p = 0; p < 5; ++p) {
      std::shuffle(o.points.begin(), o.points.begin() + 40, rng);
      EXPECT_EQ(pointnet_forward(o, w), ref);
    }
  }
}

TEST(PointNetForward, PaddingInvariant) {
  std::mt19937_64 rng(24);
  const PointNetWeights w = PointNetWeights::random(5);
  const ObjectPoints o = random_object(rng, 17, 17);
  ObjectPoints padded = o;
  padded.points.resize(200, Point3{});
  EXPECT_EQ(pointnet_forward(o, w), pointnet_forward(padded, w));
  // Whatever sits beyond valid_count is ignored.
  padded.points[150] = {9, 9, 9};
  EXPECT_EQ(pointnet_forward(o, w), pointnet_forward(padded, w));
}

TEST(FeaturizeFrame, SlotsAndPadding) {
  std::mt19937_64 rng(25);
  const PointNetWeights w = PointNetWeights::random(6);
  const FeatureSet empty = featurize_frame({}, w, 10);
  EXPECT_EQ(empty.count, 0u);
  EXPECT_EQ(empty.capacity(), 10u);
  EXPECT_TRUE((empty.features.array() == 0.0).all());

  std::vector<ObjectPoints> objs = {random_object(rng, 5, 8), random_object(rng, 8, 8)};
  const FeatureSet fs = featurize_frame(objs, w, 10, 7);
  EXPECT_EQ(fs.count, 2u);
  EXPECT_EQ(fs.frame_index, 7u);
  EXPECT_EQ(fs.dim(), 512u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(Eigen::VectorXd(fs.features.row(static_cast<Eigen::Index>(i)).transpose()),
              pointnet_forward(objs[i], w));
  }
  EXPECT_TRUE((fs.features.bottomRows(8).array() == 0.0).all());
  const FeatureSet threaded = featurize_frame(objs, w, 10, 7, 3);
  EXPECT_EQ(threaded.features, fs.features);
  EXPECT_THROW(featurize_frame(objs, w, 1), ConfigError);
}

TEST(Weights, SaveLoadRoundTripIsBitwise) {
  TempDir dir("weights_rt");
  const PointNetWeights w = PointNetWeights::random(7);
  save_weights(w, dir / "w.bin");
  EXPECT_EQ(load_weights(dir / "w.bin"), w);
  // The generator already rounds to f32, so a second save reproduces the file.
  save_weights(load_weights(dir / "w.bin"), dir / "w2.bin");
  EXPECT_EQ(testing::slurp(dir / "w.bin"), testing::slurp(dir / "w2.bin"));
}

TEST(Weights, WrongMagicIsRejected) {
  TempDir dir("weights_magic");
  std::string bytes = "PNW2";
  binary::put_u32(bytes, 0);
  binary::write_file(dir / "w.bin", bytes);
  EXPECT_THROW(load_weights(dir / "w.bin"), FormatError);
}

std::string hand_built_3_4_512() {
  std::string b = "PNW1";
  b += std::string("\x02\x00\x00\x00", 4);  // two layers
  b += std::string("\x04\x00\x00\x00", 4);  // out 4
  b += std::string("\x03\x00\x00\x00", 4);  // in 3
  for (int i = 0; i < 12; ++i) binary::put_f32(b, static_cast<float>(i) * 0.5f);
  for (int i = 0; i < 4; ++i) binary::put_f32(b, -1.0f);
  b += std::string("\x00\x02\x00\x00", 4);  // out 512
  b += std::string("\x04\x00\x00\x00", 4);  // in 4
  for (int i = 0; i < 512 * 4; ++i) binary::put_f32(b, 0.25f);
  for (int i = 0; i < 512; ++i) binary::put_f32(b, static_cast<float>(i));
  return b;
}

TEST(Weights, HandBuiltFileParses) {
  TempDir dir("weights_hand");
  const std::string bytes = hand_built_3_4_512();
  EXPECT_EQ(bytes.size(), 4u + 4 + (8 + 4 * 16) + (8 + 4 * (2048 + 512)));
  binary::write_file(dir / "w.bin", bytes);
  const PointNetWeights w = load_weights(dir / "w.bin");
  ASSERT_EQ(w.layers.size(), 2u);
  EXPECT_EQ(w.layers[0].out_dim(), 4u);
  EXPECT_EQ(w.layers[0].in_dim(), 3u);
  EXPECT_EQ(w.layers[1].out_dim(), 512u);
  EXPECT_EQ(w.layers[1].in_dim(), 4u);
  // Row-major storage: W(1, 2) is element 1 * 3 + 2 = 5.
  EXPECT_EQ(w.layers[0].weight(1, 2), 2.5);
  EXPECT_EQ(w.layers[0].bias[3], -1.0);
  EXPECT_EQ(w.layers[1].bias[511], 511.0);
}

TEST(Weights, TruncationAndBrokenChainsAreRejected) {
  TempDir dir("weights_bad");
  const std::string good = hand_built_3_4_512();
  binary::write_file(dir / "trunc.bin", good.substr(0, good.size() - 3));
  EXPECT_THROW(load_weights(dir / "trunc.bin"), FormatError);

  std::string broken = good;
  broken[4 + 4 + 8 + 64 + 4] = '\x05';  // second layer claims 5 inputs
  binary::write_file(dir / "chain.bin", broken);
  EXPECT_THROW(load_weights(dir / "chain.bin"), FormatError);
  EXPECT_THROW(load_weights(dir / "absent.bin"), NotFoundError);
}

}  // namespace
}  // namespace pcdan
