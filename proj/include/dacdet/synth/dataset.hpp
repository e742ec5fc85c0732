#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacdet/common/box.hpp"
#include "dacdet/common/image.hpp"
#include "dacdet/synth/degrade.hpp"

namespace dacdet::synth {

inline constexpr int kDatasetFormatVersion = 1;

struct Range {
  double lo = 0;
  double hi = 0;
};

/// Everything that determines a generated dataset. Parsed from and echoed to JSON.
struct GeneratorConfig {
  uint64_t seed = 7;
  int image_size = 64;
  int n_train = 200;
  int n_test = 50;
  int parasites_min = 1;
  int parasites_max = 4;
  double radius_min = 4.0;
  double radius_max = 7.0;
  int cells_min = 3;
  int cells_max = 9;
  std::array<double, kNumClasses> class_weights{1, 1, 1, 1};
  std::string magnification = "1000x";
  // Per-sample degradation parameters are drawn uniformly from these ranges.
  Range blur_sigma{0.7, 1.2};
  Range contrast_scale{0.65, 0.85};
  Range brightness_offset{-0.08, 0.04};
  Range noise_std{0.02, 0.05};
  double max_shift_px = 1.5;
  Range vignette_strength{0.1, 0.3};
  // Also write clean renderings of the test fields of view under debug/.
  bool emit_debug_hcm = true;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

enum class Split { Train, Test, DebugHcm };

/// One field of view. Train: x_h, y_h, x_l (LCM carries no boxes).
/// Test: x_l, y_l only. DebugHcm: x_h, y_h of the test fields of view.
struct PairedSample {
  int index = 0;
  Image x_h;
  std::vector<Box> y_h;
  Image x_l;
  std::vector<Box> y_l;
};

struct SampleRecord {
  int index = 0;
  std::vector<std::string> files;  // relative to the dataset root
};

struct SplitManifest {
  std::string name;
  int count = 0;
  std::vector<SampleRecord> samples;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  GeneratorConfig config;
  std::vector<SplitManifest> splits;
  std::filesystem::path root;

  const SplitManifest& split(const std::string& name) const;
  nlohmann::json to_json() const;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, VersionMismatch, CorruptRecord, ManifestIntegrity, InvalidConfig, Io };

  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Fully synthesized content for one sample; a pure function of (config, split, index).
struct GeneratedSample {
  PairedSample sample;
  DegradationParams degradation;
};
GeneratedSample synthesize_sample(const GeneratorConfig& config, Split split, int index);

/// Writes manifest.json plus train/ and test/ (and debug/) files under `out_dir`.
DatasetManifest generate_dataset(const GeneratorConfig& config, const std::filesystem::path& out_dir);

/// Parses and integrity-checks manifest.json (file existence, counts).
DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads every sample of a split; `manifest_path` may be the dataset directory.
std::vector<PairedSample> load_split(const std::filesystem::path& manifest_path, Split split);

std::string split_name(Split split);

/// Annotation text I/O: one `class_id cx cy w h` line per box.
void write_boxes(const std::filesystem::path& path, const std::vector<Box>& boxes);
std::vector<Box> read_boxes(const std::filesystem::path& path);

}  // namespace dacdet::synth
