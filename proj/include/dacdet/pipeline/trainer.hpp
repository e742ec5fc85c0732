#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacdet/augment/augment.hpp"
#include "dacdet/detnet/checkpoint.hpp"
#include "dacdet/detnet/model.hpp"
#include "dacdet/evalmap/evalmap.hpp"
#include "dacdet/losses/losses.hpp"
#include "dacdet/pipeline/config.hpp"
#include "dacdet/pipeline/optimizer.hpp"
#include "dacdet/synth/dataset.hpp"

namespace dacdet::pipeline {

/// A non-finite loss stops the run; the offending step is part of the message.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(long long step, const std::string& what) : std::runtime_error(what), step_(step) {}
  long long step() const { return step_; }

 private:
  long long step_;
};

/// One optimizer step's inputs. `det` holds the augmented HCM samples for the
/// detection branch; `dac_h` / `dac_l` are untouched copies of the original
/// HCM / LCM images for the contrastive branch.
struct TrainBatch {
  std::vector<int> indices;
  std::vector<augment::DetSample> det;
  std::vector<Image> dac_h;
  std::vector<Image> dac_l;
};

/// Builds a batch from train-split samples; `pool` supplies mosaic/mixup partners.
TrainBatch make_batch(const std::vector<synth::PairedSample>& train, std::span<const augment::DetSample> pool,
                      std::span<const int> indices, const augment::AugConfig& aug, Rng& rng);

/// Forward passes and loss assembly without any parameter update. Detection
/// branch: det images through f and h. Contrastive branch (skipped when
/// lambda == 0): dac_h and dac_l through f and g.
template <typename T>
losses::LossTerms<T> compute_loss_terms(const detnet::DetectorModel<T>& model,
                                        const std::vector<augment::DetSample>& det,
                                        const std::vector<Image>& dac_h, const std::vector<Image>& dac_l,
                                        const losses::DacConfig& dac);

/// One backward pass over the total loss and one optimizer update. Throws
/// TrainingAborted (parameters untouched) when any loss term is non-finite.
losses::LossBreakdown train_step(detnet::DetectorModel<float>& model, Optimizer& optimizer, const TrainBatch& batch,
                                 const TrainConfig& cfg, long long step = 0);

/// Append-only line-delimited JSON writer; step records must strictly increase.
class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& path, bool append);
  void write(const nlohmann::json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  long long last_step_ = -1;
};

/// Reads every record of a metrics file.
std::vector<nlohmann::json> read_metrics(const std::filesystem::path& path);

/// Image plus ground truth, keyed by sample index.
struct EvalItem {
  int id = 0;
  Image image;
  std::vector<Box> gts;
};

/// "test" (LCM images, LCM boxes), "debug" (HCM renderings of the test fields
/// of view) or "train-hcm" (train HCM images with their boxes).
std::vector<EvalItem> load_eval_items(const std::filesystem::path& data_dir, const std::string& split);
std::vector<EvalItem> eval_items_from(const std::vector<synth::PairedSample>& samples, synth::Split split);

struct EvalOutput {
  evalmap::APReport report;
  evalmap::DetectionsById dets;
  evalmap::BoxesById gts;
};

/// Decodes at decode.map_conf_thresh for the mAP sweep; precision and recall
/// use decode.conf_thresh. `threads` > 1 splits images across workers; the
/// result is independent of the thread count.
EvalOutput evaluate_model(const detnet::DetectorModel<float>& model, const std::vector<EvalItem>& items,
                          const DecodeConfig& decode, int threads = 1);

EvalOutput evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                               const std::string& split, const DecodeConfig& decode, int threads = 1);

/// The model `train` starts from: architecture cfg.model, weights drawn from
/// the stream derived from cfg.seed.
detnet::DetectorModel<float> initial_model(const TrainConfig& cfg);

struct TrainOptions {
  bool resume = false;
  // Progress lines (one per epoch); null for silent runs.
  std::function<void(const std::string&)> progress;
};

struct TrainResult {
  evalmap::APReport final_report;
  long long steps = 0;
  int epochs_completed = 0;
  std::optional<losses::LossBreakdown> first_loss;
  std::optional<losses::LossBreakdown> last_loss;
  double seconds = 0;
};

/// Trains on `data_dir`'s train split and writes into `out_dir`:
/// metrics.jsonl (config echo, per-step losses, per-eval reports),
/// timing.jsonl (wall-clock, kept apart so metrics stay reproducible),
/// summary.json and checkpoint/ (model plus optimizer state).
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

struct AblationRun {
  uint64_t seed = 0;
  double map50_with = 0;
  double map50_without = 0;
  double relative = 0;  // (with - without) / without; +inf when without is 0
  double seconds_with = 0;
  double seconds_without = 0;
};

struct AblationResult {
  double lambda = 0;
  std::vector<AblationRun> runs;
  double median_with = 0;
  double median_without = 0;
  double median_relative = 0;  // relative improvement of the arm medians

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Runs both arms per seed on the same data: the configured lambda and 0.
/// Throws ConfigError when lambda is 0. Arm configs are asserted identical
/// apart from lambda.
AblationResult ablate(const TrainConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, const std::vector<uint64_t>& seeds,
                      const TrainOptions& options = {});

/// Median of a non-empty list (mean of the middle pair for even sizes).
double median(std::vector<double> values);

/// Relative difference formatted to one decimal, e.g. "+7.8%".
std::string format_relative(double rel);

}  // namespace dacdet::pipeline
