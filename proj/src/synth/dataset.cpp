#include "dacdet/synth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "dacdet/common/rng.hpp"
#include "dacdet/synth/png_io.hpp"
#include "dacdet/synth/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dacdet::synth {

namespace {

constexpr const char* kFormatName = "dacdet-dataset";

uint64_t split_tag(Split split) {
  // The debug split re-renders the test fields of view.
  return split == Split::Train ? 1 : 2;
}

std::string sample_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return buf;
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw std::invalid_argument(std::string("config: ") + key + " must be [lo, hi]");
  return Range{v[0].get<double>(), v[1].get<double>()};
}

[[noreturn]] void fail(DatasetError::Kind kind, const std::string& what) { throw DatasetError(kind, what); }

double parse_double(std::string_view tok, bool& ok) {
  double v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = res.ec == std::errc() && res.ptr == tok.data() + tok.size();
  return v;
}

}  // namespace

void GeneratorConfig::validate() const {
  auto bad = [](const std::string& what) { throw DatasetError(DatasetError::Kind::InvalidConfig, "config: " + what); };
  if (image_size < 16 || image_size % 8 != 0) bad("image_size must be a multiple of 8 and >= 16");
  if (n_train < 0 || n_test < 0) bad("sample counts must be >= 0");
  if (parasites_min < 0 || parasites_max < parasites_min) bad("parasite count range invalid");
  if (!(radius_min > 0) || radius_max < radius_min) bad("radius range invalid");
  if (2 * (radius_max + max_shift_px + 1) >= image_size) bad("radius_max too large for image_size");
  if (cells_min < 0 || cells_max < cells_min) bad("cell count range invalid");
  double total = 0;
  for (double w : class_weights) {
    if (!(w >= 0)) bad("class weights must be >= 0");
    total += w;
  }
  if (!(total > 0)) bad("class weights must not all be zero");
  for (const Range* r : {&blur_sigma, &contrast_scale, &brightness_offset, &noise_std, &vignette_strength}) {
    if (!(r->hi >= r->lo)) bad("degradation ranges must be ordered [lo, hi]");
  }
  if (!(max_shift_px >= 0 && max_shift_px <= 0.03 * image_size)) bad("max_shift_px must be within 3% of image width");
  // Probe both range ends against the parameter validator.
  for (int end = 0; end < 2; ++end) {
    DegradationParams p;
    p.blur_sigma = end ? blur_sigma.hi : blur_sigma.lo;
    p.contrast_scale = end ? contrast_scale.hi : contrast_scale.lo;
    p.brightness_offset = end ? brightness_offset.hi : brightness_offset.lo;
    p.noise_std = end ? noise_std.hi : noise_std.lo;
    p.vignette_strength = end ? vignette_strength.hi : vignette_strength.lo;
    try {
      p.validate(image_size);
    } catch (const std::invalid_argument& e) {
      bad(e.what());
    }
  }
  if (threads < 1) bad("threads must be >= 1");
}

json GeneratorConfig::to_json() const {
  return json{{"seed", seed},
              {"image_size", image_size},
              {"n_train", n_train},
              {"n_test", n_test},
              {"parasites_min", parasites_min},
              {"parasites_max", parasites_max},
              {"radius_min", radius_min},
              {"radius_max", radius_max},
              {"cells_min", cells_min},
              {"cells_max", cells_max},
              {"class_weights", class_weights},
              {"magnification", magnification},
              {"blur_sigma", range_json(blur_sigma)},
              {"contrast_scale", range_json(contrast_scale)},
              {"brightness_offset", range_json(brightness_offset)},
              {"noise_std", range_json(noise_std)},
              {"max_shift_px", max_shift_px},
              {"vignette_strength", range_json(vignette_strength)},
              {"emit_debug_hcm", emit_debug_hcm}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  GeneratorConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.image_size = j.value("image_size", c.image_size);
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.parasites_min = j.value("parasites_min", c.parasites_min);
    c.parasites_max = j.value("parasites_max", c.parasites_max);
    c.radius_min = j.value("radius_min", c.radius_min);
    c.radius_max = j.value("radius_max", c.radius_max);
    c.cells_min = j.value("cells_min", c.cells_min);
    c.cells_max = j.value("cells_max", c.cells_max);
    if (j.contains("class_weights")) c.class_weights = j.at("class_weights").get<std::array<double, kNumClasses>>();
    c.magnification = j.value("magnification", c.magnification);
    c.blur_sigma = range_from(j, "blur_sigma", c.blur_sigma);
    c.contrast_scale = range_from(j, "contrast_scale", c.contrast_scale);
    c.brightness_offset = range_from(j, "brightness_offset", c.brightness_offset);
    c.noise_std = range_from(j, "noise_std", c.noise_std);
    c.max_shift_px = j.value("max_shift_px", c.max_shift_px);
    c.vignette_strength = range_from(j, "vignette_strength", c.vignette_strength);
    c.emit_debug_hcm = j.value("emit_debug_hcm", c.emit_debug_hcm);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw DatasetError(DatasetError::Kind::InvalidConfig, std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetError(DatasetError::Kind::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

std::string split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::DebugHcm:
      return "debug";
  }
  return "?";
}

GeneratedSample synthesize_sample(const GeneratorConfig& config, Split split, int index) {
  const int size = config.image_size;
  Rng rng(derive_seed(config.seed, split_tag(split), static_cast<uint64_t>(index)));

  const int n_parasites = uniform_int(rng, config.parasites_min, config.parasites_max);
  const int n_cells = uniform_int(rng, config.cells_min, config.cells_max);
  std::discrete_distribution<int> class_dist(config.class_weights.begin(), config.class_weights.end());

  std::vector<ParasiteSpec> parasites;
  for (int k = 0; k < n_parasites; ++k) {
    ParasiteSpec p;
    p.cls = static_cast<ParasiteClass>(class_dist(rng));
    p.radius = uniform(rng, config.radius_min, config.radius_max);
    p.orientation = uniform(rng, 0.0, 2 * std::numbers::pi);
    const double margin = p.radius + config.max_shift_px + 1.0;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      p.cx = uniform(rng, margin, size - margin);
      p.cy = uniform(rng, margin, size - margin);
      placed = std::all_of(parasites.begin(), parasites.end(), [&](const ParasiteSpec& q) {
        return std::hypot(p.cx - q.cx, p.cy - q.cy) >= p.radius + q.radius + 2.0;
      });
    }
    if (placed) parasites.push_back(p);
  }

  const uint64_t scene_seed = rng();
  SceneSpec spec(scene_seed, size, n_cells, parasites, config.radius_min, config.radius_max);
  RenderedScene scene = render_scene(spec);

  DegradationParams deg;
  deg.blur_sigma = uniform(rng, config.blur_sigma.lo, config.blur_sigma.hi);
  deg.contrast_scale = uniform(rng, config.contrast_scale.lo, config.contrast_scale.hi);
  deg.brightness_offset = uniform(rng, config.brightness_offset.lo, config.brightness_offset.hi);
  deg.noise_std = uniform(rng, config.noise_std.lo, config.noise_std.hi);
  deg.vignette_strength = uniform(rng, config.vignette_strength.lo, config.vignette_strength.hi);
  const double shift_r = config.max_shift_px * std::sqrt(uniform(rng, 0.0, 1.0));
  const double shift_a = uniform(rng, 0.0, 2 * std::numbers::pi);
  deg.shift_dx = shift_r * std::cos(shift_a);
  deg.shift_dy = shift_r * std::sin(shift_a);
  deg.validate(size);
  Rng noise_rng(rng());

  GeneratedSample out;
  out.degradation = deg;
  PairedSample& s = out.sample;
  s.index = index;
  s.x_h = std::move(scene.image);
  s.y_h = std::move(scene.boxes);
  s.x_l = degrade(s.x_h, deg, noise_rng);
  quantize_8bit(s.x_l);

  if (split == Split::Test) {
    for (const Box& b : s.y_h) {
      if (deg.shift_dx == 0 && deg.shift_dy == 0) {
        s.y_l.push_back(b);
        continue;
      }
      Box t = b;
      t.cx += deg.shift_dx / size;
      t.cy += deg.shift_dy / size;
      if (!box_is_valid(t, 0.0) && !clip_box(t)) continue;
      s.y_l.push_back(quantize_box(t));
    }
  }
  return out;
}

const SplitManifest& DatasetManifest::split(const std::string& name) const {
  for (const auto& s : splits) {
    if (s.name == name) return s;
  }
  fail(DatasetError::Kind::ManifestIntegrity, "manifest: no split named '" + name + "'");
}

json DatasetManifest::to_json() const {
  json j{{"format", kFormatName}, {"format_version", format_version}, {"config", config.to_json()}};
  json splits_j = json::object();
  for (const auto& s : splits) {
    json samples = json::array();
    for (const auto& r : s.samples) samples.push_back(json{{"index", r.index}, {"files", r.files}});
    splits_j[s.name] = json{{"count", s.count}, {"samples", samples}};
  }
  j["splits"] = splits_j;
  return j;
}

void write_boxes(const fs::path& path, const std::vector<Box>& boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(DatasetError::Kind::Io, "cannot write " + path.string());
  for (const Box& b : boxes) out << format_box(b) << '\n';
  if (!out) fail(DatasetError::Kind::Io, "write failed for " + path.string());
}

std::vector<Box> read_boxes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(DatasetError::Kind::MissingFile, "cannot open " + path.string());
  std::vector<Box> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    bool ok = tok.size() == 5;
    Box b;
    if (ok) {
      auto res = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), b.class_id);
      ok = res.ec == std::errc() && res.ptr == tok[0].data() + tok[0].size();
    }
    double* fields[] = {&b.cx, &b.cy, &b.w, &b.h};
    for (std::size_t i = 0; ok && i < 4; ++i) *fields[i] = parse_double(tok[i + 1], ok);
    if (!ok || !box_is_valid(b)) {
      fail(DatasetError::Kind::CorruptRecord,
           path.string() + ":" + std::to_string(line_no) + ": malformed annotation '" + line + "'");
    }
    boxes.push_back(b);
  }
  return boxes;
}

DatasetManifest generate_dataset(const GeneratorConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  for (const char* sub : {"train", "test", "debug"}) {
    if (std::string(sub) == "debug" && !config.emit_debug_hcm) continue;
    fs::create_directories(out_dir / sub, ec);
    if (ec) fail(DatasetError::Kind::Io, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  DatasetManifest manifest;
  manifest.config = config;
  manifest.root = out_dir;

  SplitManifest train{"train", config.n_train, {}};
  SplitManifest test{"test", config.n_test, {}};
  SplitManifest debug{"debug", config.n_test, {}};
  for (int i = 0; i < config.n_train; ++i) {
    const std::string stem = "train/" + sample_stem(i);
    train.samples.push_back({i, {stem + "_hcm.png", stem + "_lcm.png", stem + "_hcm.txt"}});
  }
  for (int i = 0; i < config.n_test; ++i) {
    const std::string stem = sample_stem(i);
    test.samples.push_back({i, {"test/" + stem + "_lcm.png", "test/" + stem + "_lcm.txt"}});
    debug.samples.push_back({i, {"debug/" + stem + "_hcm.png", "debug/" + stem + "_hcm.txt"}});
  }

  struct Job {
    Split split;
    int index;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < config.n_train; ++i) jobs.push_back({Split::Train, i});
  for (int i = 0; i < config.n_test; ++i) jobs.push_back({Split::Test, i});

  auto run = [&](std::size_t begin, std::size_t step) {
    for (std::size_t k = begin; k < jobs.size(); k += step) {
      const Job& job = jobs[k];
      GeneratedSample g = synthesize_sample(config, job.split, job.index);
      const std::string stem = sample_stem(job.index);
      if (job.split == Split::Train) {
        write_png(out_dir / "train" / (stem + "_hcm.png"), g.sample.x_h);
        write_png(out_dir / "train" / (stem + "_lcm.png"), g.sample.x_l);
        write_boxes(out_dir / "train" / (stem + "_hcm.txt"), g.sample.y_h);
      } else {
        write_png(out_dir / "test" / (stem + "_lcm.png"), g.sample.x_l);
        write_boxes(out_dir / "test" / (stem + "_lcm.txt"), g.sample.y_l);
        if (config.emit_debug_hcm) {
          write_png(out_dir / "debug" / (stem + "_hcm.png"), g.sample.x_h);
          write_boxes(out_dir / "debug" / (stem + "_hcm.txt"), g.sample.y_h);
        }
      }
    }
  };
  const std::size_t n_threads = static_cast<std::size_t>(config.threads);
  if (n_threads <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) workers.emplace_back(run, t, n_threads);
  }

  manifest.splits.push_back(std::move(train));
  manifest.splits.push_back(std::move(test));
  if (config.emit_debug_hcm) manifest.splits.push_back(std::move(debug));

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) fail(DatasetError::Kind::Io, "cannot write manifest in " + out_dir.string());
  out << manifest.to_json().dump(2) << '\n';
  if (!out) fail(DatasetError::Kind::Io, "manifest write failed in " + out_dir.string());
  return manifest;
}

DatasetManifest read_manifest(const fs::path& manifest_path) {
  fs::path path = fs::is_directory(manifest_path) ? manifest_path / "manifest.json" : manifest_path;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(DatasetError::Kind::MissingFile, "manifest not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(DatasetError::Kind::ManifestIntegrity, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }

  DatasetManifest m;
  m.root = path.parent_path();
  try {
    if (j.value("format", std::string()) != kFormatName) {
      fail(DatasetError::Kind::ManifestIntegrity, "manifest " + path.string() + " has unknown format");
    }
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      fail(DatasetError::Kind::VersionMismatch, "manifest format_version " + std::to_string(m.format_version) +
                                                    " unsupported (expected " +
                                                    std::to_string(kDatasetFormatVersion) + ")");
    }
    m.config = GeneratorConfig::from_json(j.at("config"));
    for (const auto& [name, sj] : j.at("splits").items()) {
      SplitManifest s;
      s.name = name;
      s.count = sj.at("count").get<int>();
      for (const auto& rj : sj.at("samples")) {
        s.samples.push_back({rj.at("index").get<int>(), rj.at("files").get<std::vector<std::string>>()});
      }
      m.splits.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(DatasetError::Kind::ManifestIntegrity, "manifest " + path.string() + " malformed: " + e.what());
  }

  for (const auto& s : m.splits) {
    if (s.count != static_cast<int>(s.samples.size())) {
      fail(DatasetError::Kind::ManifestIntegrity, "manifest split '" + s.name + "' declares " +
                                                      std::to_string(s.count) + " samples but lists " +
                                                      std::to_string(s.samples.size()));
    }
    for (const auto& r : s.samples) {
      for (const auto& f : r.files) {
        if (!fs::exists(m.root / f)) {
          fail(DatasetError::Kind::MissingFile,
               "split '" + s.name + "' sample " + std::to_string(r.index) + ": missing file " + f);
        }
      }
    }
    // Files on disk must agree with the declared count, per file kind.
    if (!s.samples.empty()) {
      const fs::path dir = m.root / s.name;
      for (const auto& ref : s.samples.front().files) {
        const std::string suffix = ref.substr(ref.find('_'));
        int on_disk = 0;
        for (const auto& e : fs::directory_iterator(dir)) {
          const std::string fname = e.path().filename().string();
          if (fname.size() > suffix.size() && fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0) {
            ++on_disk;
          }
        }
        if (on_disk != s.count) {
          fail(DatasetError::Kind::ManifestIntegrity, "split '" + s.name + "': manifest count " +
                                                          std::to_string(s.count) + " but " +
                                                          std::to_string(on_disk) + " '*" + suffix +
                                                          "' files on disk");
        }
      }
    }
  }
  return m;
}

std::vector<PairedSample> load_split(const fs::path& manifest_path, Split split) {
  DatasetManifest m = read_manifest(manifest_path);
  const SplitManifest& s = m.split(split_name(split));
  const int size = m.config.image_size;
  std::vector<PairedSample> out;
  out.reserve(s.samples.size());
  for (const auto& r : s.samples) {
    const std::string who = "split '" + s.name + "' sample " + std::to_string(r.index);
    auto load_image = [&](const std::string& rel) {
      Image img;
      try {
        img = read_png(m.root / rel, 3);
      } catch (const PngError& e) {
        fail(DatasetError::Kind::CorruptRecord, who + ": corrupt image " + rel + " (" + e.what() + ")");
      }
      if (img.width != size || img.height != size) {
        fail(DatasetError::Kind::CorruptRecord, who + ": image " + rel + " has wrong dimensions");
      }
      return img;
    };
    auto load_boxes = [&](const std::string& rel) {
      try {
        return read_boxes(m.root / rel);
      } catch (const DatasetError& e) {
        fail(DatasetError::Kind::CorruptRecord, who + ": " + e.what());
      }
    };
    PairedSample p;
    p.index = r.index;
    for (const auto& f : r.files) {
      const bool hcm = f.find("_hcm") != std::string::npos;
      const bool png = f.ends_with(".png");
      if (png && hcm) p.x_h = load_image(f);
      if (png && !hcm) p.x_l = load_image(f);
      if (!png && hcm) p.y_h = load_boxes(f);
      if (!png && !hcm) p.y_l = load_boxes(f);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dacdet::synth
