#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacdet/detnet/model.hpp"

namespace dacdet::detnet {

inline constexpr int kCheckpointFormatVersion = 1;

/// Extra named arrays stored after the model parameters (optimizer moments).
struct NamedArray {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  DetectorModel<float> model;
  nlohmann::json meta;  // free-form training state echo (step, epoch, config)
  std::vector<NamedArray> extra;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, VersionMismatch, Corrupt, ShapeMismatch, Io };

  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Writes `checkpoint.json` (names, shapes, byte offsets, config echo, version)
/// and `checkpoint.bin` (little-endian float32, manifest order) into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const DetectorModel<float>& model,
                     const nlohmann::json& meta = nlohmann::json::object(),
                     const std::vector<NamedArray>& extra = {});

/// Accepts the checkpoint directory or its checkpoint.json path.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dacdet::detnet
