#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacdet/ad/tensor.hpp"
#include "dacdet/common/box.hpp"
#include "dacdet/detnet/model.hpp"

namespace dacdet::losses {

using ad::Tensor;
using detnet::GridPrediction;

struct Assignment {
  int gt_index = 0;
  int class_id = 0;
  int row = 0;
  int col = 0;
  bool assigned = false;
  std::string reason;  // why an unassigned GT lost its cell
};

/// Grid-cell responsibility: each GT goes to the cell holding its center; on a
/// collision the larger-area GT keeps the cell (lower index on equal area).
struct AssignmentMap {
  int grid = 0;
  std::vector<Assignment> per_gt;
  std::vector<int> cell_owner;  // grid * grid entries, GT index or -1

  int n_assigned() const;
  int owner(int row, int col) const { return cell_owner[static_cast<std::size_t>(row * grid + col)]; }
};

AssignmentMap assign_targets(const std::vector<Box>& boxes, int grid);

/// Mean BCE over all S^2 objectness logits; target 1 on assigned cells.
template <typename T>
Tensor<T> l_obj(const GridPrediction<T>& grid, const AssignmentMap& assign);

/// Mean per-class BCE against one-hot targets over assigned cells; 0 if none.
template <typename T>
Tensor<T> l_cls(const GridPrediction<T>& grid, const AssignmentMap& assign);

/// Mean of 1 - IoU(decoded prediction, GT) over assigned cells; 0 if none.
template <typename T>
Tensor<T> l_loc(const GridPrediction<T>& grid, const AssignmentMap& assign, const std::vector<Box>& boxes);

enum class DacVariant {
  // HCM-anchored; denominator sums over LCM negatives j != i only.
  Verbatim,
  // NT-Xent over all 2N views, positive included in the denominator, both directions.
  Symmetric,
};

std::string to_string(DacVariant v);
DacVariant dac_variant_from_string(const std::string& s);

struct DacConfig {
  double tau = 0.1;
  double lambda = 1.0;
  DacVariant variant = DacVariant::Verbatim;

  void validate() const;
  nlohmann::json to_json() const;
  static DacConfig from_json(const nlohmann::json& j);
};

class BatchSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Domain adaptive contrastive loss over N paired embeddings:
///   -1/N sum_i log( exp(cos(zh_i, zl_i)/tau) / sum_{j != i} exp(cos(zh_i, zl_j)/tau) )
/// Requires N >= 2; zero-norm embeddings raise ad::ZeroNormError.
template <typename T>
Tensor<T> l_dac(const std::vector<Tensor<T>>& z_h, const std::vector<Tensor<T>>& z_l, double tau,
                DacVariant variant = DacVariant::Verbatim);

struct LossBreakdown {
  double l_cls = 0;
  double l_loc = 0;
  double l_obj = 0;
  double l_od = 0;
  double l_dac = 0;
  double total = 0;
  int n_assigned = 0;

  nlohmann::json to_json() const;
};

template <typename T>
struct LossTerms {
  Tensor<T> l_cls, l_loc, l_obj, l_od, l_dac, total;
  int n_assigned = 0;

  LossBreakdown values() const;
};

/// Detection terms are batch means of the per-image terms; l_od is their sum
/// and total = l_od + lambda * l_dac. With lambda = 0 (or empty embeddings)
/// total is l_od itself and l_dac is reported as 0.
template <typename T>
LossTerms<T> total_loss(const std::vector<GridPrediction<T>>& grids, const std::vector<AssignmentMap>& assigns,
                        const std::vector<std::vector<Box>>& boxes, const std::vector<Tensor<T>>& z_h,
                        const std::vector<Tensor<T>>& z_l, const DacConfig& cfg);

}  // namespace dacdet::losses
