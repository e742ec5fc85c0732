#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dacdet/ad/errors.hpp"
#include "dacdet/ad/ops.hpp"
#include "dacdet/losses/losses.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dacdet;
using namespace dacdet::losses;
using ad::Tensor;

namespace {

using GridD = GridPrediction<double>;

GridD make_grid(int s, std::vector<double> values, bool requires_grad = false) {
  GridD g;
  g.grid = s;
  g.raw = Tensor<double>::from(ad::Shape({5 + kNumClasses, s, s}), std::move(values), requires_grad);
  return g;
}

GridD filled_grid(int s, double v) {
  return make_grid(s, std::vector<double>(static_cast<std::size_t>((5 + kNumClasses) * s * s), v));
}

void set(GridD& g, int ch, int row, int col, double v) {
  g.raw.mutable_data()[static_cast<std::size_t>(g.index(ch, row, col))] = v;
}

// Grid that predicts `boxes` perfectly: saturated objectness/class logits and
// offsets that decode exactly to each assigned GT.
GridD perfect_grid(const std::vector<Box>& boxes, int s) {
  GridD g = filled_grid(s, -100.0);
  auto assign = assign_targets(boxes, s);
  for (const auto& a : assign.per_gt) {
    if (!a.assigned) continue;
    const Box& b = boxes[static_cast<std::size_t>(a.gt_index)];
    const double fx = b.cx * s - a.col;
    const double fy = b.cy * s - a.row;
    set(g, GridD::kObj, a.row, a.col, 100.0);
    set(g, GridD::kTx, a.row, a.col, std::log(fx / (1 - fx)));
    set(g, GridD::kTy, a.row, a.col, std::log(fy / (1 - fy)));
    set(g, GridD::kTw, a.row, a.col, std::log(b.w));
    set(g, GridD::kTh, a.row, a.col, std::log(b.h));
    set(g, GridD::kCls + b.class_id, a.row, a.col, 100.0);
  }
  return g;
}

std::vector<oracle::Vec> random_vecs(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0, 1);
  std::vector<oracle::Vec> out(n, oracle::Vec(d));
  for (auto& v : out)
    for (double& x : v) x = nd(rng);
  return out;
}

std::vector<Tensor<double>> to_tensors(const std::vector<oracle::Vec>& vs, bool requires_grad = false) {
  std::vector<Tensor<double>> out;
  for (const auto& v : vs) out.push_back(Tensor<double>::from(ad::Shape({static_cast<int64_t>(v.size())}), v, requires_grad));
  return out;
}

double dac(const std::vector<oracle::Vec>& zh, const std::vector<oracle::Vec>& zl, double tau) {
  return l_dac(to_tensors(zh), to_tensors(zl), tau).item();
}

}  // namespace

// ---------------------------------------------------------------- assignment

TEST(Assign, CenterCell) {
  auto m = assign_targets({Box{1, 0.5, 0.5, 0.2, 0.2}}, 8);
  ASSERT_EQ(m.per_gt.size(), 1u);
  EXPECT_TRUE(m.per_gt[0].assigned);
  EXPECT_EQ(m.per_gt[0].row, 4);
  EXPECT_EQ(m.per_gt[0].col, 4);
  EXPECT_EQ(m.owner(4, 4), 0);
  EXPECT_EQ(m.n_assigned(), 1);
  auto m2 = assign_targets({Box{0, 0.3, 0.7, 0.1, 0.1}}, 8);
  EXPECT_EQ(m2.per_gt[0].row, 5);
  EXPECT_EQ(m2.per_gt[0].col, 2);
}

TEST(Assign, EmptyListAllNegative) {
  auto m = assign_targets({}, 8);
  EXPECT_TRUE(m.per_gt.empty());
  EXPECT_EQ(m.cell_owner.size(), 64u);
  for (int o : m.cell_owner) EXPECT_EQ(o, -1);
}

TEST(Assign, CollisionLargerAreaWinsWithReason) {
  std::vector<Box> boxes{Box{0, 0.5, 0.5, 0.1, 0.1}, Box{1, 0.5, 0.5, 0.3, 0.2}};
  auto m = assign_targets(boxes, 8);
  EXPECT_EQ(m.n_assigned(), 1);
  EXPECT_FALSE(m.per_gt[0].assigned);
  EXPECT_FALSE(m.per_gt[0].reason.empty());
  EXPECT_TRUE(m.per_gt[1].assigned);
  EXPECT_EQ(m.owner(4, 4), 1);
  // Same boxes in reverse order: the same GT (now index 0) wins.
  auto r = assign_targets({boxes[1], boxes[0]}, 8);
  EXPECT_TRUE(r.per_gt[0].assigned);
  EXPECT_FALSE(r.per_gt[1].assigned);
}

TEST(Assign, NoTwoGtsShareACell) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> boxes;
    for (int k = 0; k < 12; ++k) boxes.push_back(Box{k % 4, u(rng), u(rng), 0.1, 0.1 + 0.01 * k});
    auto m = assign_targets(boxes, 4);
    std::vector<int> seen(16, 0);
    for (const auto& a : m.per_gt) {
      EXPECT_EQ(a.row, static_cast<int>(std::floor(boxes[static_cast<std::size_t>(a.gt_index)].cy * 4)));
      EXPECT_EQ(a.col, static_cast<int>(std::floor(boxes[static_cast<std::size_t>(a.gt_index)].cx * 4)));
      if (a.assigned) {
        EXPECT_EQ(++seen[static_cast<std::size_t>(a.row * 4 + a.col)], 1);
        EXPECT_EQ(m.owner(a.row, a.col), a.gt_index);
      }
    }
  }
}

// ---------------------------------------------------------------- detection terms

TEST(DetectionLosses, ZeroLogitsNoObjects) {
  auto g = filled_grid(8, 0.0);
  auto m = assign_targets({}, 8);
  EXPECT_NEAR(l_obj(g, m).item(), std::log(2.0), 1e-12);
  EXPECT_EQ(l_cls(g, m).item(), 0.0);
  EXPECT_EQ(l_loc(g, m, {}).item(), 0.0);
}

TEST(DetectionLosses, ClassBceArithmeticOverFourClasses) {
  auto g = filled_grid(8, 0.0);
  std::vector<Box> boxes{Box{2, 0.5, 0.5, 0.2, 0.2}};
  auto m = assign_targets(boxes, 8);
  EXPECT_NEAR(l_cls(g, m).item(), -(std::log(0.5) * 1 + std::log(0.5) * 3) / 4, 1e-12);
}

TEST(DetectionLosses, SaturatedCorrectIsZero) {
  std::vector<Box> boxes{Box{0, 0.31, 0.44, 0.12, 0.2}, Box{3, 0.77, 0.81, 0.18, 0.1}};
  auto g = perfect_grid(boxes, 8);
  auto m = assign_targets(boxes, 8);
  EXPECT_NEAR(l_obj(g, m).item(), 0.0, 1e-12);
  EXPECT_NEAR(l_cls(g, m).item(), 0.0, 1e-12);
  EXPECT_NEAR(l_loc(g, m, boxes).item(), 0.0, 1e-12);
}

TEST(DetectionLosses, DisjointPredictionCostsOne) {
  std::vector<Box> boxes{Box{0, 0.6, 0.6, 0.02, 0.02}};
  auto g = perfect_grid(boxes, 8);
  // Shift the predicted center to the cell's far corner and shrink the box.
  set(g, GridD::kTx, 4, 4, -30.0);
  set(g, GridD::kTy, 4, 4, -30.0);
  set(g, GridD::kTw, 4, 4, std::log(0.01));
  set(g, GridD::kTh, 4, 4, std::log(0.01));
  EXPECT_NEAR(l_loc(g, assign_targets(boxes, 8), boxes).item(), 1.0, 1e-12);
}

TEST(DetectionLosses, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int t = 0; t < 100; ++t) {
    auto g = filled_grid(4, 0);
    for (double& v : g.raw.mutable_data()) v = n(rng);
    std::vector<Box> boxes;
    for (int k = 0; k < 3; ++k) boxes.push_back(Box{k, u(rng), u(rng), 0.1, 0.1});
    auto m = assign_targets(boxes, 4);
    EXPECT_GE(l_obj(g, m).item(), 0.0);
    EXPECT_GE(l_cls(g, m).item(), 0.0);
    EXPECT_GE(l_loc(g, m, boxes).item(), 0.0);
  }
}

TEST(DetectionLosses, SaturatedLogitsStayFinite) {
  auto g = filled_grid(4, 1000.0);
  auto m = assign_targets({}, 4);
  const double v = l_obj(g, m).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 1000.0, 1e-9);
}

TEST(DetectionLosses, GridMismatchIsShapeError) {
  auto g = filled_grid(4, 0.0);
  auto m = assign_targets({}, 8);
  EXPECT_THROW(l_obj(g, m), ad::ShapeError);
  EXPECT_THROW(l_cls(g, m), ad::ShapeError);
  EXPECT_THROW(l_loc(g, m, {}), ad::ShapeError);
}

TEST(DetectionLosses, LocGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  for (int t = 0; t < 10; ++t) {
    std::vector<Box> boxes{Box{0, u(rng), u(rng), 0.2, 0.25}, Box{1, u(rng), u(rng), 0.3, 0.15}};
    auto m = assign_targets(boxes, 4);
    auto raw = testsupport::random_tensor<double>(ad::Shape({9, 4, 4}), rng, -1, 1);
    // Start near the targets so the IoU is non-zero and the gradient informative.
    for (const auto& a : m.per_gt) {
      if (!a.assigned) continue;
      auto d = raw.mutable_data();
      d[static_cast<std::size_t>((3 * 4 + a.row) * 4 + a.col)] += std::log(0.22);
      d[static_cast<std::size_t>((4 * 4 + a.row) * 4 + a.col)] += std::log(0.2);
    }
    std::function<Tensor<double>(const std::vector<Tensor<double>>&)> f = [&](const std::vector<Tensor<double>>& in) {
      GridD g;
      g.grid = 4;
      g.raw = in[0];
      return l_loc(g, m, boxes);
    };
    EXPECT_LT(testsupport::max_grad_error<double>(f, {raw}, 1e-6, rng), 1e-3);
  }
}

TEST(DetectionLosses, ObjAndClsGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::vector<Box> boxes{Box{2, 0.3, 0.6, 0.2, 0.2}, Box{3, 0.8, 0.1, 0.1, 0.1}};
  auto m = assign_targets(boxes, 4);
  auto raw = testsupport::random_tensor<double>(ad::Shape({9, 4, 4}), rng, -2, 2);
  std::function<Tensor<double>(const std::vector<Tensor<double>>&)> f = [&](const std::vector<Tensor<double>>& in) {
    GridD g;
    g.grid = 4;
    g.raw = in[0];
    return ad::add(l_obj(g, m), l_cls(g, m));
  };
  EXPECT_LT(testsupport::max_grad_error<double>(f, {raw}, 1e-6, rng), 1e-6);
}

// ---------------------------------------------------------------- l_dac

TEST(Dac, TwoOrthogonalPairsAtUnitTemperature) {
  EXPECT_NEAR(dac({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}, 1.0), -1.0, 1e-12);
}

TEST(Dac, AllIdenticalEmbeddingsGiveLogNMinusOne) {
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<oracle::Vec> z(n, oracle::Vec{0.3, -1.2, 2.0});
    for (double tau : {0.05, 0.1, 0.5, 1.0}) EXPECT_NEAR(dac(z, z, tau), std::log(static_cast<double>(n - 1)), 1e-6);
  }
}

TEST(Dac, MatchesScalarOracle) {
  std::mt19937_64 rng(2024);
  const std::array<double, 4> taus{0.05, 0.1, 0.5, 1.0};
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 8)(rng));
    const auto d = static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 16)(rng));
    const double tau = taus[static_cast<std::size_t>(t % 4)];
    auto zh = random_vecs(n, d, rng);
    auto zl = random_vecs(n, d, rng);
    EXPECT_NEAR(dac(zh, zl, tau), oracle::dac_loss(zh, zl, tau), 1e-6) << "N=" << n << " d=" << d << " tau=" << tau;
  }
}

TEST(Dac, CanBeNegative) {
  // Aligned positives with orthogonal negatives: the printed form goes below 0.
  EXPECT_LT(dac({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 0.1), 0.0);
}

TEST(Dac, PermutationInvariance) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    auto zh = random_vecs(n, 6, rng);
    auto zl = random_vecs(n, 6, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<oracle::Vec> ph, pl;
    for (auto i : perm) {
      ph.push_back(zh[i]);
      pl.push_back(zl[i]);
    }
    EXPECT_NEAR(dac(zh, zl, 0.1), dac(ph, pl, 0.1), 1e-6);
  }
}

TEST(Dac, ScaleInvariance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> c(0.01, 100);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    auto zh = random_vecs(n, 5, rng);
    auto zl = random_vecs(n, 5, rng);
    auto sh = zh;
    auto sl = zl;
    for (auto& v : sh) {
      const double k = c(rng);
      for (double& x : v) x *= k;
    }
    const double k = c(rng);
    for (double& x : sl[static_cast<std::size_t>(t) % n]) x *= k;
    EXPECT_NEAR(dac(zh, zl, 0.5), dac(sh, sl, 0.5), 1e-6);
  }
}

TEST(Dac, MonotoneInPositiveSimilarity) {
  // z_h^i = e0 and z_l^i = cos(theta) e0 + sin(theta) e1; every other vector
  // lives in the remaining coordinates, so only cos(z_h^i, z_l^i) moves with theta.
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd(0, 1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    const std::size_t d = 6;
    const std::size_t i = static_cast<std::size_t>(t) % n;
    std::vector<oracle::Vec> zh(n, oracle::Vec(d, 0.0)), zl(n, oracle::Vec(d, 0.0));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t c = 2; c < d; ++c) {
        zh[k][c] = nd(rng);
        zl[k][c] = nd(rng);
      }
    zh[i] = oracle::Vec(d, 0.0);
    zh[i][0] = 1;
    double prev = std::numeric_limits<double>::infinity();
    for (double theta = 3.0; theta >= 0.0; theta -= 0.25) {
      zl[i] = oracle::Vec(d, 0.0);
      zl[i][0] = std::cos(theta);
      zl[i][1] = std::sin(theta);
      const double v = dac(zh, zl, 0.1);
      EXPECT_LT(v, prev) << "theta=" << theta;
      prev = v;
    }
  }
}

TEST(Dac, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  std::vector<Tensor<double>> inputs;
  for (int k = 0; k < 8; ++k) inputs.push_back(testsupport::random_tensor<double>(ad::Shape({8}), rng));
  std::function<Tensor<double>(const std::vector<Tensor<double>>&)> f = [](const std::vector<Tensor<double>>& in) {
    std::vector<Tensor<double>> zh(in.begin(), in.begin() + 4), zl(in.begin() + 4, in.end());
    return l_dac(zh, zl, 0.1);
  };
  EXPECT_LT(testsupport::max_grad_error<double>(f, inputs, 1e-6, rng), 1e-4);
  std::function<Tensor<double>(const std::vector<Tensor<double>>&)> g = [](const std::vector<Tensor<double>>& in) {
    std::vector<Tensor<double>> zh(in.begin(), in.begin() + 4), zl(in.begin() + 4, in.end());
    return l_dac(zh, zl, 0.1, DacVariant::Symmetric);
  };
  EXPECT_LT(testsupport::max_grad_error<double>(g, inputs, 1e-6, rng), 1e-4);
}

TEST(Dac, Errors) {
  EXPECT_THROW(dac({{1, 0}}, {{1, 0}}, 0.1), BatchSizeError);
  EXPECT_THROW(l_dac(to_tensors({{1, 0}, {0, 1}}), to_tensors({{1, 0}}), 0.1), BatchSizeError);
  EXPECT_THROW(dac({{0, 0}, {0, 1}}, {{1, 0}, {0, 1}}, 0.1), ad::ZeroNormError);
  EXPECT_THROW(dac({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}, 0.0), std::invalid_argument);
}

TEST(Dac, SymmetricVariantMatchesNtXentOracle) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 5);
    auto zh = random_vecs(n, 4, rng);
    auto zl = random_vecs(n, 4, rng);
    std::vector<oracle::Vec> views = zh;
    views.insert(views.end(), zl.begin(), zl.end());
    double total = 0;
    for (std::size_t a = 0; a < 2 * n; ++a) {
      const std::size_t p = a < n ? a + n : a - n;
      double den = 0;
      for (std::size_t k = 0; k < 2 * n; ++k)
        if (k != a) den += std::exp(oracle::cosine(views[a], views[k]) / 0.2);
      total += -std::log(std::exp(oracle::cosine(views[a], views[p]) / 0.2) / den);
    }
    EXPECT_NEAR(l_dac(to_tensors(zh), to_tensors(zl), 0.2, DacVariant::Symmetric).item(), total / (2.0 * n), 1e-9);
  }
}

TEST(DacConfig, ValidationAndJson) {
  DacConfig c;
  EXPECT_DOUBLE_EQ(c.tau, 0.1);
  EXPECT_DOUBLE_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.variant, DacVariant::Verbatim);
  c.variant = DacVariant::Symmetric;
  c.tau = 0.3;
  auto back = DacConfig::from_json(c.to_json());
  EXPECT_EQ(back.variant, DacVariant::Symmetric);
  EXPECT_DOUBLE_EQ(back.tau, 0.3);
  c.tau = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.tau = 0.1;
  c.lambda = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(dac_variant_from_string("bogus"), std::invalid_argument);
}

// ---------------------------------------------------------------- total loss

namespace {

struct Batch {
  std::vector<GridD> grids;
  std::vector<AssignmentMap> assigns;
  std::vector<std::vector<Box>> boxes;
  std::vector<Tensor<double>> zh, zl;
};

Batch random_batch(std::mt19937_64& rng, std::size_t n) {
  Batch b;
  std::uniform_real_distribution<double> u(0.15, 0.85);
  for (std::size_t i = 0; i < n; ++i) {
    b.boxes.push_back({Box{static_cast<int>(i % 4), u(rng), u(rng), 0.2, 0.2}, Box{3, u(rng), u(rng), 0.1, 0.3}});
    b.assigns.push_back(assign_targets(b.boxes.back(), 4));
    GridD g;
    g.grid = 4;
    g.raw = testsupport::random_tensor<double>(ad::Shape({9, 4, 4}), rng);
    b.grids.push_back(g);
    b.zh.push_back(testsupport::random_tensor<double>(ad::Shape({5}), rng));
    b.zl.push_back(testsupport::random_tensor<double>(ad::Shape({5}), rng));
  }
  return b;
}

std::vector<std::vector<double>> grads_of(const Batch& b) {
  std::vector<std::vector<double>> out;
  for (const auto& g : b.grids) out.emplace_back(g.raw.grad().begin(), g.raw.grad().end());
  for (const auto& z : b.zh) out.emplace_back(z.grad().begin(), z.grad().end());
  for (const auto& z : b.zl) out.emplace_back(z.grad().begin(), z.grad().end());
  return out;
}

void zero(Batch& b) {
  for (auto& g : b.grids) g.raw.zero_grad();
  for (auto& z : b.zh) z.zero_grad();
  for (auto& z : b.zl) z.zero_grad();
}

}  // namespace

TEST(TotalLoss, LambdaZeroIsDetectionLossBitwise) {
  std::mt19937_64 rng(21);
  auto b = random_batch(rng, 3);
  DacConfig cfg;
  cfg.lambda = 0;
  auto t = total_loss(b.grids, b.assigns, b.boxes, b.zh, b.zl, cfg);
  EXPECT_EQ(t.total.item(), t.l_od.item());
  EXPECT_EQ(t.values().l_dac, 0.0);
  // And the embeddings receive no gradient at all.
  ad::backward(t.total);
  for (const auto& z : b.zh)
    for (double g : z.grad()) EXPECT_EQ(g, 0.0);
}

TEST(TotalLoss, CompositionIdentities) {
  std::mt19937_64 rng(22);
  auto b = random_batch(rng, 4);
  DacConfig cfg;
  cfg.lambda = 0.7;
  auto v = total_loss(b.grids, b.assigns, b.boxes, b.zh, b.zl, cfg).values();
  EXPECT_NEAR(v.l_od, v.l_cls + v.l_loc + v.l_obj, 1e-12);
  EXPECT_NEAR(v.total, v.l_od + 0.7 * v.l_dac, 1e-12);
  EXPECT_EQ(v.n_assigned, 8);
  EXPECT_GE(v.l_cls, 0);
  EXPECT_GE(v.l_loc, 0);
  EXPECT_GE(v.l_obj, 0);
}

TEST(TotalLoss, SaturatedDetectionLeavesOnlyDacTerm) {
  std::mt19937_64 rng(23);
  std::vector<std::vector<Box>> boxes{{Box{0, 0.3, 0.3, 0.2, 0.2}}, {Box{1, 0.6, 0.7, 0.1, 0.2}}};
  std::vector<GridD> grids{perfect_grid(boxes[0], 8), perfect_grid(boxes[1], 8)};
  std::vector<AssignmentMap> assigns{assign_targets(boxes[0], 8), assign_targets(boxes[1], 8)};
  auto zh = to_tensors(random_vecs(2, 4, rng));
  auto zl = to_tensors(random_vecs(2, 4, rng));
  DacConfig cfg;
  cfg.lambda = 2.5;
  auto v = total_loss(grids, assigns, boxes, zh, zl, cfg).values();
  EXPECT_NEAR(v.total, 2.5 * v.l_dac, 1e-9);
}

TEST(TotalLoss, GradientIsSumOfComponentGradients) {
  std::mt19937_64 rng(24);
  auto b = random_batch(rng, 3);
  DacConfig cfg;
  cfg.lambda = 1.3;
  auto run = [&](auto pick) {
    zero(b);
    auto t = total_loss(b.grids, b.assigns, b.boxes, b.zh, b.zl, cfg);
    ad::backward(pick(t));
    return grads_of(b);
  };
  auto total = run([](const LossTerms<double>& t) { return t.total; });
  auto cls = run([](const LossTerms<double>& t) { return t.l_cls; });
  auto loc = run([](const LossTerms<double>& t) { return t.l_loc; });
  auto obj = run([](const LossTerms<double>& t) { return t.l_obj; });
  auto dacg = run([](const LossTerms<double>& t) { return t.l_dac; });
  for (std::size_t i = 0; i < total.size(); ++i)
    for (std::size_t k = 0; k < total[i].size(); ++k)
      EXPECT_NEAR(total[i][k], cls[i][k] + loc[i][k] + obj[i][k] + 1.3 * dacg[i][k], 1e-12);
}

TEST(TotalLoss, MismatchedBatchRejected) {
  std::mt19937_64 rng(25);
  auto b = random_batch(rng, 2);
  b.assigns.pop_back();
  EXPECT_THROW(total_loss(b.grids, b.assigns, b.boxes, b.zh, b.zl, DacConfig{}), BatchSizeError);
}
