#include "dacdet/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "dacdet/ad/errors.hpp"
#include "dacdet/ad/ops.hpp"

namespace dacdet::losses {

using nlohmann::json;

int AssignmentMap::n_assigned() const {
  return static_cast<int>(std::count_if(per_gt.begin(), per_gt.end(), [](const Assignment& a) { return a.assigned; }));
}

AssignmentMap assign_targets(const std::vector<Box>& boxes, int grid) {
  AssignmentMap map;
  map.grid = grid;
  map.cell_owner.assign(static_cast<std::size_t>(grid * grid), -1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    Assignment a;
    a.gt_index = static_cast<int>(i);
    a.class_id = b.class_id;
    a.row = std::clamp(static_cast<int>(std::floor(b.cy * grid)), 0, grid - 1);
    a.col = std::clamp(static_cast<int>(std::floor(b.cx * grid)), 0, grid - 1);
    map.per_gt.push_back(a);
  }
  for (std::size_t i = 0; i < map.per_gt.size(); ++i) {
    Assignment& a = map.per_gt[i];
    int& owner = map.cell_owner[static_cast<std::size_t>(a.row * grid + a.col)];
    if (owner < 0) {
      owner = a.gt_index;
      a.assigned = true;
      continue;
    }
    Assignment& incumbent = map.per_gt[static_cast<std::size_t>(owner)];
    if (boxes[i].area() > boxes[static_cast<std::size_t>(owner)].area()) {
      incumbent.assigned = false;
      incumbent.reason = "cell taken by larger GT " + std::to_string(a.gt_index);
      owner = a.gt_index;
      a.assigned = true;
    } else {
      a.reason = "cell taken by GT " + std::to_string(owner) + " of larger or equal area";
    }
  }
  return map;
}

namespace {

template <typename T>
std::vector<const Assignment*> assigned(const AssignmentMap& map) {
  std::vector<const Assignment*> out;
  for (const auto& a : map.per_gt) {
    if (a.assigned) out.push_back(&a);
  }
  // Cell order keeps reductions independent of GT list order.
  std::sort(out.begin(), out.end(), [](const Assignment* x, const Assignment* y) {
    return std::tie(x->row, x->col) < std::tie(y->row, y->col);
  });
  return out;
}

template <typename T>
Tensor<T> constant(std::vector<T> values) {
  const auto n = static_cast<int64_t>(values.size());
  return Tensor<T>::from(ad::Shape{n}, std::move(values));
}

}  // namespace

template <typename T>
Tensor<T> l_obj(const GridPrediction<T>& grid, const AssignmentMap& assign) {
  const int s = grid.grid;
  if (assign.grid != s) throw ad::ShapeError("l_obj: assignment grid does not match prediction grid");
  std::vector<int64_t> idx;
  std::vector<T> targets;
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      idx.push_back(grid.index(GridPrediction<T>::kObj, r, c));
      targets.push_back(assign.owner(r, c) >= 0 ? T(1) : T(0));
    }
  }
  return ad::mean(ad::bce_with_logits(ad::gather(grid.raw, idx), targets));
}

template <typename T>
Tensor<T> l_cls(const GridPrediction<T>& grid, const AssignmentMap& assign) {
  if (assign.grid != grid.grid) throw ad::ShapeError("l_cls: assignment grid does not match prediction grid");
  auto cells = assigned<T>(assign);
  if (cells.empty()) return Tensor<T>::scalar(T(0));
  std::vector<int64_t> idx;
  std::vector<T> targets;
  for (const Assignment* a : cells) {
    for (int k = 0; k < grid.num_classes; ++k) {
      idx.push_back(grid.index(GridPrediction<T>::kCls + k, a->row, a->col));
      targets.push_back(k == a->class_id ? T(1) : T(0));
    }
  }
  return ad::mean(ad::bce_with_logits(ad::gather(grid.raw, idx), targets));
}

template <typename T>
Tensor<T> l_loc(const GridPrediction<T>& grid, const AssignmentMap& assign, const std::vector<Box>& boxes) {
  if (assign.grid != grid.grid) throw ad::ShapeError("l_loc: assignment grid does not match prediction grid");
  auto cells = assigned<T>(assign);
  if (cells.empty()) return Tensor<T>::scalar(T(0));
  const T inv_s = T(1) / static_cast<T>(grid.grid);
  auto channel = [&](int ch) {
    std::vector<int64_t> idx;
    for (const Assignment* a : cells) idx.push_back(grid.index(ch, a->row, a->col));
    return ad::gather(grid.raw, idx);
  };
  std::vector<T> col, row, gx1, gy1, gx2, gy2, garea;
  for (const Assignment* a : cells) {
    const Box& b = boxes.at(static_cast<std::size_t>(a->gt_index));
    col.push_back(static_cast<T>(a->col));
    row.push_back(static_cast<T>(a->row));
    gx1.push_back(static_cast<T>(b.x1()));
    gy1.push_back(static_cast<T>(b.y1()));
    gx2.push_back(static_cast<T>(b.x2()));
    gy2.push_back(static_cast<T>(b.y2()));
    garea.push_back(static_cast<T>(b.w * b.h));
  }
  using namespace ad;
  auto px = scale(add(sigmoid(channel(GridPrediction<T>::kTx)), constant<T>(col)), inv_s);
  auto py = scale(add(sigmoid(channel(GridPrediction<T>::kTy)), constant<T>(row)), inv_s);
  auto pw = exp(channel(GridPrediction<T>::kTw));
  auto ph = exp(channel(GridPrediction<T>::kTh));
  auto half_w = scale(pw, T(0.5));
  auto half_h = scale(ph, T(0.5));
  auto iw = relu(sub(minimum(add(px, half_w), constant<T>(gx2)), maximum(sub(px, half_w), constant<T>(gx1))));
  auto ih = relu(sub(minimum(add(py, half_h), constant<T>(gy2)), maximum(sub(py, half_h), constant<T>(gy1))));
  auto inter = mul(iw, ih);
  auto uni = sub(add(mul(pw, ph), constant<T>(garea)), inter);
  auto iou = div(inter, uni);
  return add_scalar(scale(mean(iou), T(-1)), T(1));
}

std::string to_string(DacVariant v) { return v == DacVariant::Verbatim ? "verbatim" : "symmetric"; }

DacVariant dac_variant_from_string(const std::string& s) {
  if (s == "verbatim") return DacVariant::Verbatim;
  if (s == "symmetric") return DacVariant::Symmetric;
  throw std::invalid_argument("unknown dac_variant '" + s + "' (expected verbatim or symmetric)");
}

void DacConfig::validate() const {
  if (!(tau > 0)) throw std::invalid_argument("dac: tau must be > 0");
  if (!(lambda >= 0)) throw std::invalid_argument("dac: lambda must be >= 0");
}

json DacConfig::to_json() const { return json{{"tau", tau}, {"lambda", lambda}, {"variant", to_string(variant)}}; }

DacConfig DacConfig::from_json(const json& j) {
  DacConfig c;
  c.tau = j.value("tau", c.tau);
  c.lambda = j.value("lambda", c.lambda);
  c.variant = dac_variant_from_string(j.value("variant", to_string(c.variant)));
  c.validate();
  return c;
}

template <typename T>
Tensor<T> l_dac(const std::vector<Tensor<T>>& z_h, const std::vector<Tensor<T>>& z_l, double tau, DacVariant variant) {
  const std::size_t n = z_h.size();
  if (n < 2) {
    throw BatchSizeError("l_dac: batch size N = " + std::to_string(n) + " but at least 2 pairs are needed for negatives");
  }
  if (z_l.size() != n) {
    throw BatchSizeError("l_dac: " + std::to_string(n) + " HCM embeddings but " + std::to_string(z_l.size()) + " LCM");
  }
  if (!(tau > 0)) throw std::invalid_argument("l_dac: tau must be > 0");
  const T inv_tau = static_cast<T>(1.0 / tau);
  using namespace ad;

  std::vector<Tensor<T>> terms;
  if (variant == DacVariant::Verbatim) {
    for (std::size_t i = 0; i < n; ++i) {
      auto pos = scale(cosine_sim(z_h[i], z_l[i]), inv_tau);
      std::vector<Tensor<T>> negs;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) negs.push_back(scale(cosine_sim(z_h[i], z_l[j]), inv_tau));
      }
      terms.push_back(sub(logsumexp(concat(negs)), pos));
    }
  } else {
    std::vector<const Tensor<T>*> views;
    for (const auto& z : z_h) views.push_back(&z);
    for (const auto& z : z_l) views.push_back(&z);
    const std::size_t m = views.size();
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t p = a < n ? a + n : a - n;
      std::vector<Tensor<T>> logits;
      Tensor<T> pos;
      for (std::size_t k = 0; k < m; ++k) {
        if (k == a) continue;
        auto s = scale(cosine_sim(*views[a], *views[k]), inv_tau);
        if (k == p) pos = s;
        logits.push_back(s);
      }
      terms.push_back(sub(logsumexp(concat(logits)), pos));
    }
  }
  return mean(concat(terms));
}

json LossBreakdown::to_json() const {
  return json{{"l_cls", l_cls}, {"l_loc", l_loc}, {"l_obj", l_obj},           {"l_od", l_od},
              {"l_dac", l_dac}, {"total", total}, {"n_assigned", n_assigned}};
}

template <typename T>
LossBreakdown LossTerms<T>::values() const {
  return LossBreakdown{static_cast<double>(l_cls.item()), static_cast<double>(l_loc.item()),
                       static_cast<double>(l_obj.item()), static_cast<double>(l_od.item()),
                       static_cast<double>(l_dac.item()), static_cast<double>(total.item()),
                       n_assigned};
}

template <typename T>
LossTerms<T> total_loss(const std::vector<GridPrediction<T>>& grids, const std::vector<AssignmentMap>& assigns,
                        const std::vector<std::vector<Box>>& boxes, const std::vector<Tensor<T>>& z_h,
                        const std::vector<Tensor<T>>& z_l, const DacConfig& cfg) {
  if (grids.empty() || grids.size() != assigns.size() || grids.size() != boxes.size()) {
    throw BatchSizeError("total_loss: grids, assignments and boxes must be non-empty and equally long");
  }
  using namespace ad;
  std::vector<Tensor<T>> cls, loc, obj;
  LossTerms<T> out;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    cls.push_back(l_cls(grids[i], assigns[i]));
    loc.push_back(l_loc(grids[i], assigns[i], boxes[i]));
    obj.push_back(l_obj(grids[i], assigns[i]));
    out.n_assigned += assigns[i].n_assigned();
  }
  out.l_cls = mean(concat(cls));
  out.l_loc = mean(concat(loc));
  out.l_obj = mean(concat(obj));
  out.l_od = add(add(out.l_cls, out.l_loc), out.l_obj);
  if (cfg.lambda == 0 || z_h.empty()) {
    out.l_dac = Tensor<T>::scalar(T(0));
    out.total = out.l_od;
  } else {
    out.l_dac = l_dac(z_h, z_l, cfg.tau, cfg.variant);
    out.total = add(out.l_od, scale(out.l_dac, static_cast<T>(cfg.lambda)));
  }
  return out;
}

#define DACDET_INSTANTIATE_LOSSES(T)                                                                          \
  template Tensor<T> l_obj(const GridPrediction<T>&, const AssignmentMap&);                                   \
  template Tensor<T> l_cls(const GridPrediction<T>&, const AssignmentMap&);                                   \
  template Tensor<T> l_loc(const GridPrediction<T>&, const AssignmentMap&, const std::vector<Box>&);          \
  template Tensor<T> l_dac(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, double, DacVariant); \
  template struct LossTerms<T>;                                                                               \
  template LossTerms<T> total_loss(const std::vector<GridPrediction<T>>&, const std::vector<AssignmentMap>&,   \
                                   const std::vector<std::vector<Box>>&, const std::vector<Tensor<T>>&,       \
                                   const std::vector<Tensor<T>>&, const DacConfig&);

DACDET_INSTANTIATE_LOSSES(float)
DACDET_INSTANTIATE_LOSSES(double)

#undef DACDET_INSTANTIATE_LOSSES

}  // namespace dacdet::losses
