// Command-line front end: dataset generation, training, evaluation,
// ablation and gradient checking.
//
// Exit codes: 0 success, 1 validation error (bad flags, config or inputs),
// 2 runtime failure (I/O, corrupt files, aborted training, failed check).

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacdet/detnet/checkpoint.hpp"
#include "dacdet/evalmap/evalmap.hpp"
#include "dacdet/pipeline/config.hpp"
#include "dacdet/pipeline/gradcheck.hpp"
#include "dacdet/pipeline/trainer.hpp"
#include "dacdet/synth/dataset.hpp"

namespace fs = std::filesystem;
using namespace dacdet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw pipeline::ConfigError("--seeds: \"" + tok + "\" is not a seed");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw pipeline::ConfigError("--seeds: empty list");
  return seeds;
}

pipeline::TrainConfig load_train_config(const std::string& path) {
  return path.empty() ? pipeline::TrainConfig{} : pipeline::TrainConfig::load(path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out, int threads) {
  synth::GeneratorConfig cfg;
  if (!config_path.empty()) cfg = synth::GeneratorConfig::from_json(pipeline::read_json_file(config_path));
  if (threads > 0) cfg.threads = threads;
  const auto m = synth::generate_dataset(cfg, out);
  for (const auto& s : m.splits) std::cout << s.name << ": " << s.count << " samples\n";
  std::cout << "manifest: " << (fs::path(out) / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, std::string data, std::string out, bool resume, bool quiet) {
  auto cfg = load_train_config(config_path);
  if (data.empty()) data = cfg.data_dir;
  if (out.empty()) out = cfg.out_dir;
  if (data.empty() || out.empty()) throw pipeline::ConfigError("train: --data and --out are required");
  pipeline::TrainOptions opts;
  opts.resume = resume;
  if (!quiet) opts.progress = log_line;
  const auto r = pipeline::train(cfg, data, out, opts);
  std::cout << r.final_report.to_json().dump(2) << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split, double conf,
             int threads, const std::string& pr_csv, const std::string& dets_dir) {
  pipeline::DecodeConfig decode;
  // Thresholds recorded with the checkpoint's training config are the defaults.
  const auto ckpt = detnet::load_checkpoint(checkpoint);
  if (ckpt.meta.contains("train_config") && ckpt.meta["train_config"].contains("decode")) {
    decode = pipeline::DecodeConfig::from_json(ckpt.meta["train_config"]["decode"]);
  }
  if (conf >= 0) decode.conf_thresh = conf;
  decode.map_conf_thresh = std::min(decode.map_conf_thresh, decode.conf_thresh);
  decode.validate();
  const auto items = pipeline::load_eval_items(data, split);
  const auto out = pipeline::evaluate_model(ckpt.model, items, decode, threads);
  if (!pr_csv.empty()) evalmap::write_pr_curves_csv(pr_csv, out.dets, out.gts);
  if (!dets_dir.empty()) {
    fs::create_directories(dets_dir);
    for (const auto& [id, dets] : out.dets) {
      char name[32];
      std::snprintf(name, sizeof name, "%06d_dets.txt", id);
      evalmap::write_detections(fs::path(dets_dir) / name, dets);
    }
  }
  std::cout << out.report.to_json().dump(2) << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, std::string data, std::string out, const std::string& seeds_text,
               bool quiet) {
  auto cfg = load_train_config(config_path);
  const auto seeds = parse_seeds(seeds_text);
  if (data.empty()) data = cfg.data_dir;
  if (out.empty()) out = cfg.out_dir.empty() ? "ablation" : cfg.out_dir;
  if (data.empty()) throw pipeline::ConfigError("ablate: --data is required");
  pipeline::TrainOptions opts;
  if (!quiet) opts.progress = log_line;
  const auto r = pipeline::ablate(cfg, data, out, seeds, opts);
  std::cout << r.to_text();
  std::cout << "report: " << (fs::path(out) / "ablation.json").string() << "\n";
  return kExitOk;
}

int cmd_grad_check(int size, int batch, uint64_t seed, bool as_json) {
  pipeline::GradCheckConfig cfg;
  cfg.image_size = size;
  cfg.batch = batch;
  cfg.seed = seed;
  const auto r = pipeline::grad_check(cfg);
  if (as_json) {
    std::cout << r.to_json().dump(2) << "\n";
  } else {
    std::cout << r.to_text();
  }
  return r.passed ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dacdet: contrastive domain adaptation for single-shot parasite detection"};
  app.require_subcommand(1);

  std::string config, out, data, checkpoint, split = "test", seeds = "1,2,3", pr_csv, dets_dir;
  int threads = 0, eval_threads = 1, size = 16, batch = 2;
  uint64_t seed = 1;
  double conf = -1;
  bool resume = false, quiet = false, as_json = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a paired HCM/LCM synthetic dataset");
  gen->add_option("--config", config, "Generator config (JSON); defaults when omitted")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--threads", threads, "Worker threads (output is identical for any count)");

  auto* tr = app.add_subcommand("train", "Train a detector (optionally with the contrastive loss)");
  tr->add_option("--config", config, "Train config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory");
  tr->add_option("--out", out, "Run directory");
  tr->add_flag("--resume", resume, "Continue from <out>/checkpoint");
  tr->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (mAP@0.5, precision, recall)");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint directory or checkpoint.json")->required();
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--split", split, "test | debug | train-hcm")->check(CLI::IsMember({"test", "debug", "train-hcm"}));
  ev->add_option("--conf", conf, "Operating confidence threshold (default from checkpoint, else 0.25)")
      ->check(CLI::Range(0.0, 1.0));
  ev->add_option("--threads", eval_threads, "Evaluation threads")->check(CLI::Range(1, 64));
  ev->add_option("--pr-csv", pr_csv, "Write PR-curve points (class,recall,precision)");
  ev->add_option("--dets-dir", dets_dir, "Write per-image detection records");

  auto* ab = app.add_subcommand("ablate", "Paired with/without contrastive-loss runs over seeds");
  ab->add_option("--config", config, "Train config (JSON)")->check(CLI::ExistingFile);
  ab->add_option("--data", data, "Dataset directory");
  ab->add_option("--out", out, "Output directory (default: ablation)");
  ab->add_option("--seeds", seeds, "Comma-separated seeds");
  ab->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every gradient in f64");
  gc->add_option("--size", size, "Image side (multiple of 8)")->check(CLI::Range(8, 256));
  gc->add_option("--batch", batch, "Batch size N")->check(CLI::Range(2, 16));
  gc->add_option("--seed", seed, "Random seed");
  gc->add_flag("--json", as_json, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_data(config, out, threads);
    if (*tr) return cmd_train(config, data, out, resume, quiet);
    if (*ev) return cmd_eval(checkpoint, data, split, conf, eval_threads, pr_csv, dets_dir);
    if (*ab) return cmd_ablate(config, data, out, seeds, quiet);
    if (*gc) return cmd_grad_check(size, batch, seed, as_json);
  } catch (const synth::DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == synth::DatasetError::Kind::InvalidConfig ? kExitValidation : kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
