#include "dacdet/pipeline/config.hpp"

#include <algorithm>
#include <fstream>

namespace dacdet::pipeline {

using nlohmann::json;

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("optimizer must be \"adam\" or \"sgd\", got \"" + s + "\"");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas must be in [0, 1)");
  if (!(eps > 0)) throw ConfigError("adam eps must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
}

json OptimizerConfig::to_json() const {
  return json{{"kind", to_string(kind)}, {"learning_rate", learning_rate}, {"beta1", beta1},
              {"beta2", beta2},          {"eps", eps},                     {"momentum", momentum}};
}

OptimizerConfig OptimizerConfig::from_json(const json& j) {
  OptimizerConfig c;
  c.kind = optimizer_from_string(j.value("kind", to_string(c.kind)));
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.momentum = j.value("momentum", c.momentum);
  return c;
}

void DecodeConfig::validate() const {
  if (!(conf_thresh >= 0 && conf_thresh <= 1)) throw ConfigError("decode.conf_thresh must be in [0, 1]");
  if (!(map_conf_thresh >= 0 && map_conf_thresh <= conf_thresh)) {
    throw ConfigError("decode.map_conf_thresh must be in [0, conf_thresh]");
  }
  if (!(nms_iou > 0 && nms_iou <= 1)) throw ConfigError("decode.nms_iou must be in (0, 1]");
}

json DecodeConfig::to_json() const {
  return json{{"conf_thresh", conf_thresh}, {"nms_iou", nms_iou}, {"map_conf_thresh", map_conf_thresh}};
}

DecodeConfig DecodeConfig::from_json(const json& j) {
  DecodeConfig c;
  c.conf_thresh = j.value("conf_thresh", c.conf_thresh);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  c.map_conf_thresh = j.value("map_conf_thresh", c.map_conf_thresh);
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dac.lambda > 0 && batch_size < 2) {
    throw ConfigError("batch_size must be >= 2 when dac.lambda > 0 (the contrastive loss needs negatives)");
  }
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  optimizer.validate();
  decode.validate();
  try {
    dac.validate();
    aug.validate();
    model.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json TrainConfig::to_json() const {
  json j{{"epochs", epochs},
         {"batch_size", batch_size},
         {"optimizer", optimizer.to_json()},
         {"dac", dac.to_json()},
         {"aug", aug.to_json()},
         {"model", model.to_json()},
         {"decode", decode.to_json()},
         {"seed", seed},
         {"eval_every", eval_every}};
  if (!data_dir.empty()) j["data_dir"] = data_dir;
  if (!out_dir.empty()) j["out_dir"] = out_dir;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  static const char* kKnown[] = {"epochs", "batch_size", "optimizer", "dac",      "aug",     "model",
                                 "decode", "seed",       "eval_every", "data_dir", "out_dir"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ConfigError("unknown train config key \"" + key + "\"");
    }
  }
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("optimizer")) c.optimizer = OptimizerConfig::from_json(j.at("optimizer"));
    if (j.contains("dac")) c.dac = losses::DacConfig::from_json(j.at("dac"));
    if (j.contains("aug")) c.aug = augment::AugConfig::from_json(j.at("aug"));
    if (j.contains("model")) c.model = detnet::ModelConfig::from_json(j.at("model"));
    if (j.contains("decode")) c.decode = DecodeConfig::from_json(j.at("decode"));
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace dacdet::pipeline
