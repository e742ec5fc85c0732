#include "dacdet/detnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dacdet/ad/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dacdet::detnet {

namespace {

constexpr const char* kFormatName = "dacdet-checkpoint";
constexpr const char* kManifestName = "checkpoint.json";
constexpr const char* kBlobName = "checkpoint.bin";

[[noreturn]] void fail(CheckpointError::Kind kind, const std::string& what) { throw CheckpointError(kind, what); }

void append_le(std::vector<unsigned char>& out, float v) {
  const auto bits = std::bit_cast<uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
}

float read_le(const unsigned char* p) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const DetectorModel<float>& model, const json& meta,
                     const std::vector<NamedArray>& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(CheckpointError::Kind::Io, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<unsigned char> blob;
  json tensors = json::array();
  auto emit = [&](const std::string& name, const std::vector<int64_t>& shape, std::span<const float> values) {
    tensors.push_back(json{{"name", name}, {"shape", shape}, {"offset", blob.size()}, {"count", values.size()}});
    for (float v : values) append_le(blob, v);
  };
  for (const auto& p : model.parameters()) emit(p.name(), p.shape().dims(), p.data());
  for (const auto& e : extra) emit(e.name, e.shape, e.values);

  json manifest{{"format", kFormatName},
                {"format_version", kCheckpointFormatVersion},
                {"model_config", model.config().to_json()},
                {"meta", meta},
                {"blob", kBlobName},
                {"blob_bytes", blob.size()},
                {"n_model_tensors", model.parameters().size()},
                {"tensors", tensors}};

  std::ofstream bin(dir / kBlobName, std::ios::binary);
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!bin) fail(CheckpointError::Kind::Io, "cannot write " + (dir / kBlobName).string());
  std::ofstream man(dir / kManifestName, std::ios::binary);
  man << manifest.dump(2) << '\n';
  if (!man) fail(CheckpointError::Kind::Io, "cannot write " + (dir / kManifestName).string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / kManifestName : path;
  const fs::path dir = manifest_path.parent_path();
  std::ifstream man(manifest_path, std::ios::binary);
  if (!man) fail(CheckpointError::Kind::MissingFile, "checkpoint manifest not found: " + manifest_path.string());
  json j;
  try {
    man >> j;
  } catch (const json::exception& e) {
    fail(CheckpointError::Kind::Corrupt, "checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }

  try {
    if (j.value("format", std::string()) != kFormatName) {
      fail(CheckpointError::Kind::Corrupt, "not a checkpoint manifest: " + manifest_path.string());
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      fail(CheckpointError::Kind::VersionMismatch, "checkpoint format_version " + std::to_string(version) +
                                                       " unsupported (expected " +
                                                       std::to_string(kCheckpointFormatVersion) + ")");
    }
    ModelConfig config;
    try {
      config = ModelConfig::from_json(j.at("model_config"));
    } catch (const std::invalid_argument& e) {
      fail(CheckpointError::Kind::ShapeMismatch, std::string("checkpoint config invalid: ") + e.what());
    }

    const fs::path blob_path = dir / j.at("blob").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) fail(CheckpointError::Kind::MissingFile, "checkpoint blob not found: " + blob_path.string());
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    const auto expected_bytes = j.at("blob_bytes").get<std::size_t>();
    if (blob.size() != expected_bytes) {
      fail(CheckpointError::Kind::Corrupt, "checkpoint blob has " + std::to_string(blob.size()) +
                                               " bytes, manifest declares " + std::to_string(expected_bytes));
    }

    Checkpoint ck{DetectorModel<float>(config, 0), j.value("meta", json::object()), {}};
    const auto n_model = j.at("n_model_tensors").get<std::size_t>();
    const auto& tensors = j.at("tensors");
    auto& params = ck.model.parameters();
    if (n_model != params.size() || tensors.size() < n_model) {
      fail(CheckpointError::Kind::ShapeMismatch, "checkpoint lists " + std::to_string(n_model) +
                                                     " model tensors, config implies " +
                                                     std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<int64_t>>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (offset % 4 != 0 || offset + 4 * count > blob.size()) {
        fail(CheckpointError::Kind::Corrupt, "checkpoint tensor " + name + " lies outside the blob");
      }
      std::vector<float> values(count);
      for (std::size_t k = 0; k < count; ++k) values[k] = read_le(blob.data() + offset + 4 * k);
      if (i < n_model) {
        auto& p = params[i];
        if (p.name() != name || p.shape().dims() != shape || static_cast<std::size_t>(p.numel()) != count) {
          fail(CheckpointError::Kind::ShapeMismatch, "checkpoint tensor " + name + " " + ad::Shape(shape).to_string() +
                                                         " does not match model parameter " + p.name() + " " +
                                                         p.shape().to_string());
        }
        std::copy(values.begin(), values.end(), p.mutable_data().begin());
      } else {
        ck.extra.push_back(NamedArray{name, shape, std::move(values)});
      }
    }
    return ck;
  } catch (const json::exception& e) {
    fail(CheckpointError::Kind::Corrupt, "checkpoint manifest malformed: " + std::string(e.what()));
  } catch (const ad::ShapeError& e) {
    fail(CheckpointError::Kind::ShapeMismatch, std::string("checkpoint shape invalid: ") + e.what());
  }
}

}  // namespace dacdet::detnet
