#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "dacdet/ad/ops.hpp"
#include "dacdet/detnet/checkpoint.hpp"
#include "dacdet/detnet/model.hpp"
#include "dacdet/synth/dataset.hpp"
#include "test_support.hpp"

using namespace dacdet;
using namespace dacdet::detnet;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

Image random_image(int size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0, 1);
  Image img(3, size, size);
  for (float& v : img.pixels) v = d(rng);
  return img;
}

// Grid with every logit set to `fill`; callers overwrite individual cells.
GridPrediction<double> constant_grid(int s, double fill) {
  GridPrediction<double> g;
  g.grid = s;
  g.num_classes = kNumClasses;
  g.raw = ad::Tensor<double>::full(ad::Shape({5 + kNumClasses, s, s}), fill);
  return g;
}

void set(GridPrediction<double>& g, int ch, int row, int col, double v) {
  g.raw.mutable_data()[static_cast<std::size_t>(g.index(ch, row, col))] = v;
}

double logit(double p) { return std::log(p / (1 - p)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(DetNet, ShapesOnDefaultModel) {
  DetectorModel<float> m(ModelConfig{}, 1);
  auto x = DetectorModel<float>::to_input(random_image(64, 1));
  EXPECT_EQ(x.shape(), ad::Shape({3, 64, 64}));
  auto p5 = m.backbone_forward(x);
  EXPECT_EQ(p5.shape(), ad::Shape({64, 8, 8}));
  auto head = m.detection_head(p5);
  EXPECT_EQ(head.raw.shape(), ad::Shape({9, 8, 8}));
  EXPECT_EQ(head.grid, 8);
  auto z = m.projection_head(p5);
  EXPECT_EQ(z.shape(), ad::Shape({64}));
}

TEST(DetNet, InputNormalization) {
  Image img(3, 8, 8, 0.0f);
  img.at(1, 2, 3) = 1.0f;
  img.at(2, 0, 0) = 0.5f;
  auto x = DetectorModel<double>::to_input(img);
  EXPECT_DOUBLE_EQ(x.at(0), -1.0);
  EXPECT_DOUBLE_EQ(x.at((1 * 8 + 2) * 8 + 3), 1.0);
  EXPECT_DOUBLE_EQ(x.at(2 * 64), 0.0);
  EXPECT_FALSE(x.requires_grad());
}

TEST(DetNet, ZeroHeadGivesHalfProbabilities) {
  DetectorModel<double> m(ModelConfig::tiny(), 3);
  for (auto& p : m.parameters()) {
    if (p.name().rfind("head.", 0) == 0) std::fill(p.mutable_data().begin(), p.mutable_data().end(), 0.0);
  }
  auto g = m.detection_head(m.backbone_forward(DetectorModel<double>::to_input(random_image(32, 2))));
  for (double v : g.raw.data()) EXPECT_EQ(v, 0.0);
  // Every cell: objectness 0.5, class 0.5, so confidence 0.25.
  auto dets = decode_predictions(g, 0.0, 1.0);
  EXPECT_EQ(dets.size(), 16u);
  for (const auto& d : dets) EXPECT_DOUBLE_EQ(d.confidence, 0.25);
}

TEST(DetNet, IdenticalInputsGiveIdenticalEmbeddings) {
  DetectorModel<double> m(ModelConfig::tiny(), 4);
  auto img = random_image(16, 5);
  auto za = m.projection_head(m.backbone_forward(DetectorModel<double>::to_input(img)));
  auto zb = m.projection_head(m.backbone_forward(DetectorModel<double>::to_input(img)));
  EXPECT_NEAR(ad::cosine_sim(za, zb).item(), 1.0, 1e-12);
}

TEST(DetNet, HeadsShareBackboneParameters) {
  // Both heads must reach the very same backbone leaf nodes.
  DetectorModel<double> m(ModelConfig::tiny(), 6);
  auto p5 = m.backbone_forward(DetectorModel<double>::to_input(random_image(16, 7)));
  auto det = ad::sum(m.detection_head(p5).raw);
  auto proj = ad::sum(m.projection_head(p5));
  auto det_leaves = ad::reachable_leaves(det);
  auto proj_leaves = ad::reachable_leaves(proj);
  std::set<ad::Node<double>*> det_set(det_leaves.begin(), det_leaves.end());
  std::set<ad::Node<double>*> proj_set(proj_leaves.begin(), proj_leaves.end());
  int shared = 0;
  for (const auto& p : m.parameters()) {
    const bool backbone = p.name().rfind("backbone.", 0) == 0;
    if (backbone) {
      EXPECT_TRUE(det_set.count(p.node())) << p.name();
      EXPECT_TRUE(proj_set.count(p.node())) << p.name();
      ++shared;
    } else if (p.name().rfind("head.", 0) == 0) {
      EXPECT_TRUE(det_set.count(p.node()));
      EXPECT_FALSE(proj_set.count(p.node()));
    } else {
      EXPECT_FALSE(det_set.count(p.node()));
      EXPECT_TRUE(proj_set.count(p.node()));
    }
  }
  EXPECT_GT(shared, 0);
  EXPECT_EQ(det_set.size() + proj_set.size() - static_cast<std::size_t>(shared), m.parameters().size());
}

TEST(DetNet, InitIsDeterministicAndSeedDependent) {
  DetectorModel<float> a(ModelConfig{}, 11), b(ModelConfig{}, 11), c(ModelConfig{}, 12);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto pa = a.parameters()[i].data();
    const auto pb = b.parameters()[i].data();
    const auto pc = c.parameters()[i].data();
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
    any_diff |= !std::equal(pa.begin(), pa.end(), pc.begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(DetNet, CloneSharesNoStorage) {
  DetectorModel<float> a(ModelConfig::tiny(), 1);
  auto b = a.clone();
  b.parameters()[0].mutable_data()[0] += 1.0f;
  EXPECT_NE(a.parameters()[0].at(0), b.parameters()[0].at(0));
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
}

TEST(DetNet, CastToDoubleMatchesFloatForward) {
  DetectorModel<float> f(ModelConfig::tiny(), 2);
  auto d = f.cast<double>();
  auto img = random_image(16, 3);
  auto zf = f.projection_head(f.backbone_forward(DetectorModel<float>::to_input(img)));
  auto zd = d.projection_head(d.backbone_forward(DetectorModel<double>::to_input(img)));
  for (int64_t i = 0; i < zf.numel(); ++i) EXPECT_NEAR(zf.at(i), zd.at(i), 1e-5);
}

TEST(DetNet, ConfigValidationAndJson) {
  ModelConfig c;
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  c.backbone.stage_channels = {16, 31, 64};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.proj_dim = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(DetNet, UnknownParameterNameThrows) {
  DetectorModel<float> m(ModelConfig::tiny(), 1);
  EXPECT_NO_THROW(m.parameter("head.weight"));
  EXPECT_ANY_THROW(m.parameter("no.such.param"));
}

// ---------------------------------------------------------------- decode

TEST(Decode, SingleConfidentCellDecodesExactly) {
  auto g = constant_grid(8, -20.0);
  set(g, 0, 2, 5, logit(0.9));  // objectness
  set(g, 1, 2, 5, 0.0);         // t_x -> 0.5
  set(g, 2, 2, 5, 0.0);         // t_y -> 0.5
  set(g, 3, 2, 5, std::log(0.25));
  set(g, 4, 2, 5, std::log(0.125));
  set(g, 5 + 2, 2, 5, logit(0.8));
  auto dets = decode_predictions(g, 0.25, 0.45);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].class_id, 2);
  EXPECT_NEAR(dets[0].confidence, 0.72, 1e-12);
  EXPECT_NEAR(dets[0].box.cx, 5.5 / 8, 1e-12);
  EXPECT_NEAR(dets[0].box.cy, 2.5 / 8, 1e-12);
  EXPECT_NEAR(dets[0].box.w, 0.25, 1e-12);
  EXPECT_NEAR(dets[0].box.h, 0.125, 1e-12);
}

TEST(Decode, BoxesAreClippedToUnitSquare) {
  auto g = constant_grid(4, -20.0);
  set(g, 0, 0, 0, 5.0);
  set(g, 5, 0, 0, 5.0);
  set(g, 3, 0, 0, std::log(1.0));  // w = 1 centered near 0.125 -> clipped
  set(g, 4, 0, 0, std::log(0.2));
  auto dets = decode_predictions(g, 0.5, 0.45);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_GE(dets[0].box.x1(), -1e-12);
  EXPECT_LE(dets[0].box.x2(), 1 + 1e-12);
  EXPECT_TRUE(box_is_valid(dets[0].box));
}

TEST(Decode, ThresholdMonotonicity) {
  // Raising conf_thresh only ever removes detections.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = constant_grid(8, 0.0);
    for (double& v : g.raw.mutable_data()) v = n(rng);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        set(g, 3, r, c, std::log(0.1));
        set(g, 4, r, c, std::log(0.1));
      }
    auto lo = decode_predictions(g, 0.1, 0.45);
    auto hi = decode_predictions(g, 0.4, 0.45);
    EXPECT_LE(hi.size(), lo.size());
    for (const auto& d : hi) {
      EXPECT_GE(d.confidence, 0.4);
      bool found = std::any_of(lo.begin(), lo.end(), [&](const DetectionResult& e) {
        return e.class_id == d.class_id && e.box == d.box && e.confidence == d.confidence;
      });
      EXPECT_TRUE(found);
    }
    for (std::size_t i = 1; i < lo.size(); ++i) EXPECT_GE(lo[i - 1].confidence, lo[i].confidence);
  }
}

TEST(Nms, SuppressesSameClassOverlapOnly) {
  std::vector<DetectionResult> dets{
      {0, Box{0, 0.5, 0.5, 0.2, 0.2}, 0.9},
      {0, Box{0, 0.51, 0.5, 0.2, 0.2}, 0.8},   // IoU ~0.9 with the first -> suppressed
      {1, Box{1, 0.51, 0.5, 0.2, 0.2}, 0.7},   // other class -> kept
      {0, Box{0, 0.2, 0.2, 0.1, 0.1}, 0.6},    // disjoint -> kept
  };
  auto kept = non_max_suppression(dets, 0.45);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_DOUBLE_EQ(kept[0].confidence, 0.9);
  EXPECT_DOUBLE_EQ(kept[1].confidence, 0.7);
  EXPECT_DOUBLE_EQ(kept[2].confidence, 0.6);
  // Threshold 1 suppresses nothing.
  EXPECT_EQ(non_max_suppression(dets, 1.0).size(), 4u);
}

TEST(Nms, NoTwoSameClassSurvivorsOverlapAboveThreshold) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.2, 0.8), s(0.05, 0.3), c(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DetectionResult> dets;
    for (int i = 0; i < 20; ++i) {
      int cls = static_cast<int>(c(rng) * 2);
      dets.push_back({cls, Box{cls, u(rng), u(rng), s(rng), s(rng)}, c(rng)});
    }
    auto kept = non_max_suppression(dets, 0.45);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].class_id == kept[j].class_id) EXPECT_LE(box_iou(kept[i].box, kept[j].box), 0.45);
  }
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTripIsBitwiseAndFilesAreStable) {
  TempDir d("ckpt");
  DetectorModel<float> m(ModelConfig{}, 21);
  nlohmann::json meta{{"step", 12}, {"note", "x"}};
  std::vector<NamedArray> extra{{"adam.t", {1}, {3.0f}}, {"adam.m.head.bias", {9}, std::vector<float>(9, 0.5f)}};
  save_checkpoint(d / "a", m, meta, extra);
  auto ck = load_checkpoint(d / "a");
  EXPECT_EQ(ck.model.config(), m.config());
  EXPECT_EQ(ck.meta, meta);
  ASSERT_EQ(ck.extra.size(), 2u);
  EXPECT_EQ(ck.extra[1].name, "adam.m.head.bias");
  EXPECT_EQ(ck.extra[1].values, extra[1].values);
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    const auto a = m.parameters()[i].data();
    const auto b = ck.model.parameters()[i].data();
    EXPECT_EQ(m.parameters()[i].name(), ck.model.parameters()[i].name());
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << m.parameters()[i].name();
  }
  // Saving the loaded checkpoint reproduces byte-identical files.
  save_checkpoint(d / "b", ck.model, ck.meta, ck.extra);
  EXPECT_EQ(slurp(d / "a/checkpoint.bin"), slurp(d / "b/checkpoint.bin"));
  EXPECT_EQ(slurp(d / "a/checkpoint.json"), slurp(d / "b/checkpoint.json"));
  EXPECT_NO_THROW(load_checkpoint(d / "a/checkpoint.json"));
}

namespace {

CheckpointError::Kind load_error(const fs::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load_checkpoint did not throw";
  return CheckpointError::Kind::Io;
}

void edit_manifest(const fs::path& dir, const std::function<void(nlohmann::json&)>& f) {
  auto j = nlohmann::json::parse(slurp(dir / "checkpoint.json"));
  f(j);
  std::ofstream(dir / "checkpoint.json", std::ios::trunc) << j.dump(2);
}

}  // namespace

TEST(Checkpoint, DistinctErrorsPerCorruption) {
  TempDir d("ckpt_err");
  DetectorModel<float> m(ModelConfig::tiny(), 1);
  auto fresh = [&](const std::string& name) {
    save_checkpoint(d / name, m);
    return d / name;
  };
  EXPECT_EQ(load_error(d / "nothing"), CheckpointError::Kind::MissingFile);
  {
    auto p = fresh("noblob");
    fs::remove(p / "checkpoint.bin");
    EXPECT_EQ(load_error(p), CheckpointError::Kind::MissingFile);
  }
  {
    auto p = fresh("trunc");
    auto bytes = slurp(p / "checkpoint.bin");
    std::ofstream(p / "checkpoint.bin", std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<long>(bytes.size() - 8));
    EXPECT_EQ(load_error(p), CheckpointError::Kind::Corrupt);
  }
  {
    auto p = fresh("badjson");
    std::ofstream(p / "checkpoint.json", std::ios::trunc) << "{ not json";
    EXPECT_EQ(load_error(p), CheckpointError::Kind::Corrupt);
  }
  {
    auto p = fresh("version");
    edit_manifest(p, [](nlohmann::json& j) { j["format_version"] = 42; });
    EXPECT_EQ(load_error(p), CheckpointError::Kind::VersionMismatch);
  }
  {
    auto p = fresh("shape");
    edit_manifest(p, [](nlohmann::json& j) { j["tensors"][0]["shape"] = {2, 2}; });
    EXPECT_EQ(load_error(p), CheckpointError::Kind::ShapeMismatch);
  }
  {
    auto p = fresh("config");
    edit_manifest(p, [](nlohmann::json& j) { j["model_config"]["proj_dim"] = 7; });
    EXPECT_EQ(load_error(p), CheckpointError::Kind::ShapeMismatch);
  }
  {
    auto p = fresh("offset");
    edit_manifest(p, [](nlohmann::json& j) { j["tensors"][1]["offset"] = 1u << 30; });
    EXPECT_EQ(load_error(p), CheckpointError::Kind::Corrupt);
  }
}
