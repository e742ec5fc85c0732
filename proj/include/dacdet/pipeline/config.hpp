#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dacdet/augment/augment.hpp"
#include "dacdet/detnet/model.hpp"
#include "dacdet/losses/losses.hpp"

namespace dacdet::pipeline {

/// Invalid configuration: reported before any work starts (CLI exit code 1).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OptimizerKind { Adam, Sgd };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // SGD only

  void validate() const;
  nlohmann::json to_json() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
};

struct DecodeConfig {
  double conf_thresh = 0.25;   // operating point for precision / recall
  double nms_iou = 0.45;
  double map_conf_thresh = 0.001;  // decode floor for the PR sweep behind mAP

  void validate() const;
  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  OptimizerConfig optimizer;
  losses::DacConfig dac;
  augment::AugConfig aug;
  detnet::ModelConfig model;
  DecodeConfig decode;
  uint64_t seed = 1;
  int eval_every = 5;  // epochs; 0 evaluates only at the end
  // Optional dataset / output locations; CLI flags take precedence.
  std::string data_dir;
  std::string out_dir;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
};

/// Reads a JSON file; parse failures raise ConfigError naming the file.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace dacdet::pipeline
