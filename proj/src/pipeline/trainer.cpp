#include "dacdet/pipeline/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <numeric>
#include <thread>

#include "dacdet/ad/ops.hpp"
#include "dacdet/common/rng.hpp"

namespace dacdet::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stream tags for derive_seed; each consumer of randomness has its own stream.
constexpr uint64_t kInitTag = 0x696e6974;     // "init"
constexpr uint64_t kShuffleTag = 0x73687566;  // "shuf"
constexpr uint64_t kAugTag = 0x61756720;      // "aug "

bool finite(const losses::LossBreakdown& b) {
  return std::isfinite(b.l_cls) && std::isfinite(b.l_loc) && std::isfinite(b.l_obj) && std::isfinite(b.l_dac) &&
         std::isfinite(b.total);
}

}  // namespace

TrainBatch make_batch(const std::vector<synth::PairedSample>& train, std::span<const augment::DetSample> pool,
                      std::span<const int> indices, const augment::AugConfig& aug, Rng& rng) {
  TrainBatch b;
  for (int idx : indices) {
    const auto& s = train.at(static_cast<std::size_t>(idx));
    b.indices.push_back(idx);
    b.det.push_back(augment::augment_pipeline(augment::DetSample{s.x_h, s.y_h}, pool, aug, rng));
    b.dac_h.push_back(s.x_h);
    b.dac_l.push_back(s.x_l);
  }
  return b;
}

template <typename T>
losses::LossTerms<T> compute_loss_terms(const detnet::DetectorModel<T>& model,
                                        const std::vector<augment::DetSample>& det,
                                        const std::vector<Image>& dac_h, const std::vector<Image>& dac_l,
                                        const losses::DacConfig& dac) {
  using Model = detnet::DetectorModel<T>;
  const bool use_dac = dac.lambda != 0;
  if (use_dac && (dac_h.size() != det.size() || dac_l.size() != det.size())) {
    throw losses::BatchSizeError("compute_loss_terms: contrastive inputs must match the batch size");
  }
  std::vector<detnet::GridPrediction<T>> grids;
  std::vector<losses::AssignmentMap> assigns;
  std::vector<std::vector<Box>> boxes;
  std::vector<ad::Tensor<T>> z_h, z_l;
  for (std::size_t i = 0; i < det.size(); ++i) {
    auto p5 = model.backbone_forward(Model::to_input(det[i].image));
    grids.push_back(model.detection_head(p5));
    assigns.push_back(losses::assign_targets(det[i].boxes, grids.back().grid));
    boxes.push_back(det[i].boxes);
    if (!use_dac) continue;
    // An unaugmented detection input is the same image: its backbone output
    // is reused instead of recomputed (same graph value, same gradient).
    auto p5_h = det[i].image == dac_h[i] ? p5 : model.backbone_forward(Model::to_input(dac_h[i]));
    z_h.push_back(model.projection_head(p5_h));
    z_l.push_back(model.projection_head(model.backbone_forward(Model::to_input(dac_l[i]))));
  }
  return losses::total_loss(grids, assigns, boxes, z_h, z_l, dac);
}

template losses::LossTerms<float> compute_loss_terms(const detnet::DetectorModel<float>&,
                                                     const std::vector<augment::DetSample>&,
                                                     const std::vector<Image>&, const std::vector<Image>&,
                                                     const losses::DacConfig&);
template losses::LossTerms<double> compute_loss_terms(const detnet::DetectorModel<double>&,
                                                      const std::vector<augment::DetSample>&,
                                                      const std::vector<Image>&, const std::vector<Image>&,
                                                      const losses::DacConfig&);

losses::LossBreakdown train_step(detnet::DetectorModel<float>& model, Optimizer& optimizer, const TrainBatch& batch,
                                 const TrainConfig& cfg, long long step) {
  if (cfg.dac.lambda > 0 && batch.det.size() < 2) {
    throw losses::BatchSizeError("train_step: batch of " + std::to_string(batch.det.size()) +
                                 " but the contrastive loss needs at least 2");
  }
  model.zero_grads();
  auto terms = compute_loss_terms(model, batch.det, batch.dac_h, batch.dac_l, cfg.dac);
  const auto values = terms.values();
  if (!finite(values)) {
    throw TrainingAborted(step, "non-finite loss at step " + std::to_string(step) + ": " + values.to_json().dump());
  }
  ad::backward(terms.total);
  optimizer.step(model.parameters());
  return values;
}

// ---------------------------------------------------------------------------
// Metrics

MetricsLog::MetricsLog(const fs::path& path, bool append) : path_(path) {
  if (append && fs::exists(path)) {
    for (const auto& r : read_metrics(path)) {
      if (r.value("type", "") == "step") last_step_ = std::max(last_step_, r.at("step").get<long long>());
    }
  }
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open metrics log " + path.string());
}

void MetricsLog::write(const json& record) {
  if (record.value("type", "") == "step") {
    const long long step = record.at("step").get<long long>();
    if (step <= last_step_) {
      throw std::logic_error("metrics log: step " + std::to_string(step) + " does not follow " +
                             std::to_string(last_step_));
    }
    last_step_ = step;
  }
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

std::vector<json> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics log " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<EvalItem> eval_items_from(const std::vector<synth::PairedSample>& samples, synth::Split split) {
  std::vector<EvalItem> items;
  for (const auto& s : samples) {
    if (split == synth::Split::Test) {
      items.push_back({s.index, s.x_l, s.y_l});
    } else {
      items.push_back({s.index, s.x_h, s.y_h});
    }
  }
  return items;
}

std::vector<EvalItem> load_eval_items(const fs::path& data_dir, const std::string& split) {
  if (split == "test") return eval_items_from(synth::load_split(data_dir, synth::Split::Test), synth::Split::Test);
  if (split == "debug") {
    return eval_items_from(synth::load_split(data_dir, synth::Split::DebugHcm), synth::Split::DebugHcm);
  }
  if (split == "train-hcm") {
    return eval_items_from(synth::load_split(data_dir, synth::Split::Train), synth::Split::Train);
  }
  throw ConfigError("unknown split \"" + split + "\" (expected test, debug or train-hcm)");
}

EvalOutput evaluate_model(const detnet::DetectorModel<float>& model, const std::vector<EvalItem>& items,
                          const DecodeConfig& decode, int threads) {
  std::vector<std::vector<Detection>> per_item(items.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    ad::NoGradGuard no_grad;
    for (std::size_t i = begin; i < items.size(); i += step) {
      auto grid = model.detection_head(model.backbone_forward(detnet::DetectorModel<float>::to_input(items[i].image)));
      per_item[i] = detnet::decode_predictions(grid, decode.map_conf_thresh, decode.nms_iou);
    }
  };
  const std::size_t n_threads = static_cast<std::size_t>(std::clamp(threads, 1, 64));
  if (n_threads == 1 || items.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
    for (auto& t : pool) t.join();
  }
  EvalOutput out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (out.gts.contains(items[i].id)) throw std::invalid_argument("evaluate: duplicate image id " + std::to_string(items[i].id));
    out.gts[items[i].id] = items[i].gts;
    out.dets[items[i].id] = std::move(per_item[i]);
  }
  out.report = evalmap::evaluate(out.dets, out.gts, decode.conf_thresh);
  return out;
}

EvalOutput evaluate_checkpoint(const fs::path& checkpoint, const fs::path& data_dir, const std::string& split,
                               const DecodeConfig& decode, int threads) {
  decode.validate();
  auto items = load_eval_items(data_dir, split);
  const auto ckpt = detnet::load_checkpoint(checkpoint);
  return evaluate_model(ckpt.model, items, decode, threads);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

double unix_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

json step_record(long long step, int epoch, const losses::LossBreakdown& b) {
  json j = b.to_json();
  j["type"] = "step";
  j["step"] = step;
  j["epoch"] = epoch;
  return j;
}

json eval_record(long long step, int epoch, const evalmap::APReport& r) {
  json j = r.to_json();
  j["type"] = "eval";
  j["split"] = "test";
  j["step"] = step;
  j["epoch"] = epoch;
  return j;
}

void save_state(const fs::path& dir, const detnet::DetectorModel<float>& model, const Optimizer& opt,
                const TrainConfig& cfg, long long step, int epoch) {
  json meta{{"step", step}, {"epoch", epoch}, {"train_config", cfg.to_json()}};
  detnet::save_checkpoint(dir, model, meta, opt.export_state());
}

}  // namespace

detnet::DetectorModel<float> initial_model(const TrainConfig& cfg) {
  return detnet::DetectorModel<float>(cfg.model, derive_seed(cfg.seed, kInitTag));
}

TrainResult train(const TrainConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                  const TrainOptions& options) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  // Everything that can fail on I/O or config happens before the loop.
  const auto manifest = synth::read_manifest(data_dir);
  const auto train_set = synth::load_split(data_dir, synth::Split::Train);
  const auto test_items = eval_items_from(synth::load_split(data_dir, synth::Split::Test), synth::Split::Test);
  const int batch = cfg.batch_size;
  if (cfg.epochs > 0 && static_cast<int>(train_set.size()) < batch) {
    throw ConfigError("train split has " + std::to_string(train_set.size()) + " samples, fewer than batch_size " +
                      std::to_string(batch));
  }
  std::vector<augment::DetSample> pool;
  pool.reserve(train_set.size());
  for (const auto& s : train_set) pool.push_back({s.x_h, s.y_h});

  fs::create_directories(out_dir);
  const fs::path ckpt_dir = out_dir / "checkpoint";

  detnet::DetectorModel<float> model = initial_model(cfg);
  auto optimizer = make_optimizer(cfg.optimizer);
  long long step = 0;
  int start_epoch = 0;
  if (options.resume) {
    auto ckpt = detnet::load_checkpoint(ckpt_dir);
    if (!(ckpt.model.config() == cfg.model)) throw ConfigError("resume: checkpoint model config differs from config");
    model = std::move(ckpt.model);
    optimizer->import_state(ckpt.extra, model.parameters());
    step = ckpt.meta.at("step").get<long long>();
    start_epoch = ckpt.meta.at("epoch").get<int>();
  }

  MetricsLog metrics(out_dir / "metrics.jsonl", options.resume);
  std::ofstream timing(out_dir / "timing.jsonl", options.resume ? std::ios::app : std::ios::trunc);
  if (options.resume) {
    metrics.write(json{{"type", "resume"}, {"step", step}, {"epoch", start_epoch}});
  } else {
    metrics.write(json{{"type", "config"}, {"config", cfg.to_json()}, {"dataset", manifest.config.to_json()}});
    save_state(ckpt_dir, model, *optimizer, cfg, step, 0);
  }

  TrainResult result;
  const int n = static_cast<int>(train_set.size());
  const int batches_per_epoch = n / batch;  // the incomplete tail batch is dropped
  std::vector<int> order(static_cast<std::size_t>(n));
  bool evaluated_last = false;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      ++step;
      Rng aug_rng(derive_seed(cfg.seed, kAugTag, static_cast<uint64_t>(step)));
      const auto idx = std::span<const int>(order).subspan(static_cast<std::size_t>(b * batch),
                                                           static_cast<std::size_t>(batch));
      const auto tb = make_batch(train_set, pool, idx, cfg.aug, aug_rng);
      losses::LossBreakdown values;
      try {
        values = train_step(model, *optimizer, tb, cfg, step);
      } catch (const TrainingAborted& e) {
        metrics.write(json{{"type", "abort"}, {"step", step}, {"epoch", epoch}, {"reason", e.what()}});
        throw;
      }
      metrics.write(step_record(step, epoch, values));
      if (!result.first_loss) result.first_loss = values;
      result.last_loss = values;
      epoch_loss += values.total;
    }
    const bool do_eval = (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.epochs;
    evaluated_last = false;
    if (do_eval) {
      result.final_report = evaluate_model(model, test_items, cfg.decode).report;
      metrics.write(eval_record(step, epoch, result.final_report));
      evaluated_last = true;
    }
    save_state(ckpt_dir, model, *optimizer, cfg, step, epoch + 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    timing << json{{"epoch", epoch}, {"step", step}, {"seconds", secs}, {"unix_time", unix_seconds()}}.dump() << '\n';
    timing.flush();
    result.epochs_completed = epoch + 1;
    if (options.progress) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "epoch %d/%d step %lld mean_loss %.4f%s (%.1fs)", epoch + 1, cfg.epochs, step,
                    batches_per_epoch > 0 ? epoch_loss / batches_per_epoch : 0.0,
                    do_eval ? (" map50 " + std::to_string(result.final_report.map50)).c_str() : "", secs);
      options.progress(buf);
    }
  }
  if (!evaluated_last) {
    result.final_report = evaluate_model(model, test_items, cfg.decode).report;
    metrics.write(eval_record(step, std::max(cfg.epochs, start_epoch) - 1, result.final_report));
  }
  result.epochs_completed = std::max(result.epochs_completed, start_epoch);
  result.steps = step;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  json summary{{"final", result.final_report.to_json()},
               {"steps", step},
               {"epochs", result.epochs_completed},
               {"config", cfg.to_json()}};
  if (result.first_loss) summary["first_loss"] = result.first_loss->to_json();
  if (result.last_loss) summary["last_loss"] = result.last_loss->to_json();
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// Ablation

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_relative(double rel) {
  if (std::isinf(rel)) return rel > 0 ? "+inf%" : "-inf%";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", rel * 100.0);
  return buf;
}

namespace {

double relative_improvement(double with, double without) {
  if (without == 0) return with > 0 ? INFINITY : 0.0;
  return (with - without) / without;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json AblationResult::to_json() const {
  json runs_j = json::array();
  for (const auto& r : runs) {
    runs_j.push_back(json{{"seed", r.seed},
                          {"map50_with_dac", r.map50_with},
                          {"map50_without_dac", r.map50_without},
                          {"relative_improvement", finite_or_null(r.relative)},
                          {"relative_improvement_text", format_relative(r.relative)},
                          {"seconds_with_dac", r.seconds_with},
                          {"seconds_without_dac", r.seconds_without}});
  }
  return json{{"lambda_dac", lambda},
              {"runs", runs_j},
              {"median_map50_with_dac", median_with},
              {"median_map50_without_dac", median_without},
              {"median_relative_improvement", finite_or_null(median_relative)},
              {"median_relative_improvement_text", format_relative(median_relative)}};
}

std::string AblationResult::to_text() const {
  std::string s = "seed  map50(without)  map50(with)  delta\n";
  char buf[160];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%-5llu %-15.4f %-12.4f %s\n", static_cast<unsigned long long>(r.seed),
                  r.map50_without, r.map50_with, format_relative(r.relative).c_str());
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "median %-14.4f %-12.4f %s\n", median_without, median_with,
                format_relative(median_relative).c_str());
  s += buf;
  return s;
}

AblationResult ablate(const TrainConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                      const std::vector<uint64_t>& seeds, const TrainOptions& options) {
  cfg.validate();
  if (!(cfg.dac.lambda > 0)) throw ConfigError("ablate: dac.lambda must be > 0 for the with-DAC arm");
  if (seeds.empty()) throw ConfigError("ablate: at least one seed required");
  AblationResult result;
  result.lambda = cfg.dac.lambda;
  std::vector<double> with_maps, without_maps;
  for (uint64_t seed : seeds) {
    TrainConfig with = cfg;
    with.seed = seed;
    TrainConfig without = with;
    without.dac.lambda = 0;
    auto strip = [](json j) {
      j["dac"].erase("lambda");
      return j;
    };
    if (strip(with.to_json()) != strip(without.to_json())) {
      throw std::logic_error("ablate: arm configs differ beyond dac.lambda");
    }
    const fs::path seed_dir = out_dir / ("seed" + std::to_string(seed));
    auto tag = [&](const std::string& arm) {
      TrainOptions o;
      if (options.progress) o.progress = [&, arm](const std::string& line) {
        options.progress("[seed " + std::to_string(seed) + " " + arm + "] " + line);
      };
      return o;
    };
    const auto r_without = train(without, data_dir, seed_dir / "without_dac", tag("without_dac"));
    const auto r_with = train(with, data_dir, seed_dir / "with_dac", tag("with_dac"));
    AblationRun run;
    run.seed = seed;
    run.map50_with = r_with.final_report.map50;
    run.map50_without = r_without.final_report.map50;
    run.relative = relative_improvement(run.map50_with, run.map50_without);
    run.seconds_with = r_with.seconds;
    run.seconds_without = r_without.seconds;
    result.runs.push_back(run);
    with_maps.push_back(run.map50_with);
    without_maps.push_back(run.map50_without);
  }
  result.median_with = median(with_maps);
  result.median_without = median(without_maps);
  result.median_relative = relative_improvement(result.median_with, result.median_without);
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "ablation.json") << result.to_json().dump(2) << '\n';
  return result;
}

}  // namespace dacdet::pipeline
