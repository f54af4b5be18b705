#include "inmerge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "inmerge/error.hpp"
#include "inmerge/io.hpp"

namespace inmerge {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::string_view kMetaFormat = "inmerge-dataset";
constexpr int kMetaVersion = 1;

std::string blob_name(SplitName s, std::string_view what) {
  return std::string(split_name(s)) + "_" + std::string(what) + ".bin";
}

std::vector<std::uint8_t> read_blob(const fs::path& path,
                                    std::size_t expected) {
  if (!fs::exists(path)) {
    throw DataError(DataError::Kind::kMissingFile,
                    "missing dataset file " + path.string());
  }
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    throw DataError(DataError::Kind::kSizeMismatch,
                    path.filename().string() + ": expected " +
                        std::to_string(expected) + " bytes, got " +
                        std::to_string(actual));
  }
  std::vector<std::uint8_t> bytes(expected);
  std::ifstream in(path, std::ios::binary);
  if (expected > 0 &&
      !in.read(reinterpret_cast<char*>(bytes.data()),
               static_cast<std::streamsize>(expected))) {
    throw DataError(DataError::Kind::kSizeMismatch,
                    "short read from " + path.string());
  }
  return bytes;
}

void check_labels(const Dataset& d, SplitName name) {
  const Split& s = d.split(name);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const std::uint8_t v = s.labels[i];
    const bool ok = d.task == HeadKind::kMultilabel ? v <= 1 : v < d.classes;
    if (!ok) {
      throw DataError(
          DataError::Kind::kLabelDomain,
          std::string(split_name(name)) + " label " + std::to_string(v) +
              " at byte " + std::to_string(i) + " outside " +
              (d.task == HeadKind::kMultilabel
                   ? std::string("{0,1}")
                   : "[0," + std::to_string(d.classes) + ")"));
    }
  }
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Pattern value of class k at pixel (y, x) with per-sample draws in `p`.
struct PatternDraw {
  double a, b, c, d;
};

PatternDraw draw_pattern(SynthKind kind, std::size_t k, std::size_t classes,
                         std::size_t h, std::size_t w, Rng& rng) {
  const double pi = std::numbers::pi;
  if (kind == SynthKind::kStripedTextures) {
    // Orientation centred on k*pi/K with jitter; frequency band per class
    // parity; random phase and contrast.
    const double spacing = pi / static_cast<double>(classes);
    const double theta = static_cast<double>(k) * spacing +
                         0.22 * spacing * rng.normal();
    const double freq = (k % 2 == 0 ? 0.14 : 0.20) + rng.uniform(-0.05, 0.05);
    const double phase = rng.uniform(0.0, 2.0 * pi);
    const double contrast = rng.uniform(0.18, 0.4);
    return {theta, freq, phase, contrast};
  }
  // Gaussian spot: centre on a ring at angle 2*pi*k/K, jittered.
  const double angle = 2.0 * pi * static_cast<double>(k) /
                       static_cast<double>(classes);
  const double radius = 0.25 * static_cast<double>(std::min(h, w));
  const double cy = static_cast<double>(h) / 2.0 + radius * std::sin(angle) +
                    0.06 * static_cast<double>(h) * rng.normal();
  const double cx = static_cast<double>(w) / 2.0 + radius * std::cos(angle) +
                    0.06 * static_cast<double>(w) * rng.normal();
  const double scale = rng.uniform(0.08, 0.15) * static_cast<double>(std::min(h, w));
  return {cy, cx, scale, rng.uniform(0.6, 0.9)};
}

double pattern_value(SynthKind kind, const PatternDraw& p, double y, double x) {
  if (kind == SynthKind::kStripedTextures) {
    const double u = x * std::cos(p.a) + y * std::sin(p.a);
    return p.d * std::sin(2.0 * std::numbers::pi * p.b * u + p.c);
  }
  const double dy = y - p.a, dx = x - p.b;
  return p.d * std::exp(-(dy * dy + dx * dx) / (2.0 * p.c * p.c));
}

void render(const SynthSpec& spec, std::span<const std::size_t> present,
            Rng& rng, std::span<std::uint8_t> out) {
  std::vector<PatternDraw> draws;
  for (std::size_t k : present) {
    draws.push_back(
        draw_pattern(spec.kind, k, spec.classes, spec.height, spec.width, rng));
  }
  const bool stripes = spec.kind == SynthKind::kStripedTextures;
  const double base = stripes ? 0.5 : 0.1;
  const double noise = stripes ? 0.22 : 0.08;
  std::size_t idx = 0;
  for (std::size_t c = 0; c < spec.channels; ++c) {
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x, ++idx) {
        double v = base;
        for (const auto& d : draws) {
          v += pattern_value(spec.kind, d, static_cast<double>(y),
                             static_cast<double>(x)) /
               static_cast<double>(stripes ? draws.size() : 1);
        }
        out[idx] = to_pixel(v + noise * rng.normal());
      }
    }
  }
}

Split take(const Dataset& d, const std::vector<std::uint8_t>& images,
           const std::vector<std::uint8_t>& labels,
           std::span<const std::size_t> order) {
  Split s;
  s.count = order.size();
  const std::size_t ib = d.image_bytes(), lb = d.label_bytes();
  s.images.reserve(order.size() * ib);
  s.labels.reserve(order.size() * lb);
  for (std::size_t idx : order) {
    s.images.insert(s.images.end(), images.begin() + idx * ib,
                    images.begin() + (idx + 1) * ib);
    s.labels.insert(s.labels.end(), labels.begin() + idx * lb,
                    labels.begin() + (idx + 1) * lb);
  }
  return s;
}

}  // namespace

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::kTrain:
      return "train";
    case SplitName::kVal:
      return "val";
    case SplitName::kTest:
      return "test";
  }
  return "?";
}

SplitName parse_split_name(std::string_view s) {
  if (s == "train") return SplitName::kTrain;
  if (s == "val") return SplitName::kVal;
  if (s == "test") return SplitName::kTest;
  throw ConfigError("unknown split '" + std::string(s) +
                    "' (expected train|val|test)");
}

const Split& Dataset::split(SplitName s) const {
  switch (s) {
    case SplitName::kTrain:
      return train;
    case SplitName::kVal:
      return val;
    case SplitName::kTest:
      break;
  }
  return test;
}

Split& Dataset::split(SplitName s) {
  return const_cast<Split&>(std::as_const(*this).split(s));
}

void Dataset::validate() const {
  if (classes == 0 || channels == 0 || height == 0 || width == 0) {
    throw DataError(DataError::Kind::kInvalid,
                    "dataset extents and class count must be positive");
  }
  if (task == HeadKind::kMulticlass && classes > 256) {
    throw DataError(DataError::Kind::kInvalid,
                    "multiclass datasets support at most 256 classes");
  }
  if (mean.size() != channels || std.size() != channels) {
    throw DataError(DataError::Kind::kInvalid,
                    "normalization needs one mean/std per channel");
  }
  for (double s : std) {
    if (!(s > 0.0)) {
      throw DataError(DataError::Kind::kInvalid,
                      "normalization std must be positive");
    }
  }
  for (SplitName name : {SplitName::kTrain, SplitName::kVal, SplitName::kTest}) {
    const Split& s = split(name);
    if (s.images.size() != s.count * image_bytes() ||
        s.labels.size() != s.count * label_bytes()) {
      throw DataError(DataError::Kind::kSizeMismatch,
                      std::string(split_name(name)) +
                          " split buffers do not match its sample count");
    }
    check_labels(*this, name);
  }
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  data.validate();
  fs::create_directories(dir);
  json meta = {
      {"format", kMetaFormat},
      {"version", kMetaVersion},
      {"task", data.task == HeadKind::kMultilabel ? "multilabel" : "multiclass"},
      {"classes", data.classes},
      {"channels", data.channels},
      {"height", data.height},
      {"width", data.width},
      {"splits",
       {{"train", data.train.count},
        {"val", data.val.count},
        {"test", data.test.count}}},
      {"normalization", {{"mean", data.mean}, {"std", data.std}}}};
  for (SplitName name : {SplitName::kTrain, SplitName::kVal, SplitName::kTest}) {
    const Split& s = data.split(name);
    write_file_atomic(dir / blob_name(name, "images"), s.images);
    write_file_atomic(dir / blob_name(name, "labels"), s.labels);
  }
  write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) {
    throw DataError(DataError::Kind::kMissingFile,
                    "missing dataset file " + meta_path.string());
  }
  Dataset d;
  try {
    std::ifstream in(meta_path);
    const json meta = json::parse(in);
    for (const auto& [key, _] : meta.items()) {
      static const std::vector<std::string> known = {
          "format", "version",  "task",  "classes",      "channels",
          "height", "width",    "splits", "normalization"};
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw DataError(DataError::Kind::kInvalid,
                        "meta.json: unknown key '" + key + "'");
      }
    }
    if (meta.at("format").get<std::string>() != kMetaFormat ||
        meta.at("version").get<int>() != kMetaVersion) {
      throw DataError(DataError::Kind::kInvalid,
                      "meta.json: unsupported format or version");
    }
    const std::string task = meta.at("task").get<std::string>();
    if (task == "multiclass") {
      d.task = HeadKind::kMulticlass;
    } else if (task == "multilabel") {
      d.task = HeadKind::kMultilabel;
    } else {
      throw DataError(DataError::Kind::kInvalid,
                      "meta.json: unknown task '" + task + "'");
    }
    d.classes = meta.at("classes").get<std::size_t>();
    d.channels = meta.at("channels").get<std::size_t>();
    d.height = meta.at("height").get<std::size_t>();
    d.width = meta.at("width").get<std::size_t>();
    d.train.count = meta.at("splits").at("train").get<std::size_t>();
    d.val.count = meta.at("splits").at("val").get<std::size_t>();
    d.test.count = meta.at("splits").at("test").get<std::size_t>();
    d.mean = meta.at("normalization").at("mean").get<std::vector<double>>();
    d.std = meta.at("normalization").at("std").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::kInvalid,
                    "meta.json: " + std::string(e.what()));
  }
  for (SplitName name : {SplitName::kTrain, SplitName::kVal, SplitName::kTest}) {
    Split& s = d.split(name);
    s.images = read_blob(dir / blob_name(name, "images"),
                         s.count * d.image_bytes());
    s.labels = read_blob(dir / blob_name(name, "labels"),
                         s.count * d.label_bytes());
  }
  d.validate();
  return d;
}

SynthKind parse_synth_kind(std::string_view s) {
  if (s == "gauss_blobs") return SynthKind::kGaussBlobs;
  if (s == "striped_textures") return SynthKind::kStripedTextures;
  throw ConfigError("unknown synthetic kind '" + std::string(s) +
                    "' (expected gauss_blobs|striped_textures)");
}

std::string_view synth_kind_name(SynthKind k) {
  return k == SynthKind::kGaussBlobs ? "gauss_blobs" : "striped_textures";
}

Dataset synth_make(const SynthSpec& spec) {
  if (spec.per_class == 0 || spec.classes == 0 || spec.channels == 0 ||
      spec.height == 0 || spec.width == 0) {
    throw ConfigError("synthetic dataset parameters must be positive");
  }
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) {
    throw ConfigError("label noise must lie in [0,1]");
  }
  Dataset d;
  d.task = spec.task;
  d.classes = spec.classes;
  d.channels = spec.channels;
  d.height = spec.height;
  d.width = spec.width;
  d.mean.assign(spec.channels, 0.5);
  d.std.assign(spec.channels, 0.5);

  const std::size_t total = spec.per_class * spec.classes;
  std::vector<std::uint8_t> images(total * d.image_bytes());
  std::vector<std::uint8_t> labels(total * d.label_bytes(), 0);
  Rng rng(derive_seed(spec.seed, StreamPurpose::kSynth, 0));
  for (std::size_t s = 0; s < total; ++s) {
    std::vector<std::size_t> present;
    if (spec.task == HeadKind::kMultilabel) {
      for (std::size_t k = 0; k < spec.classes; ++k) {
        if (rng.bernoulli(0.5)) {
          present.push_back(k);
          labels[s * spec.classes + k] = 1;
        }
      }
    } else {
      const std::size_t k = s / spec.per_class;
      present.push_back(k);
      labels[s] = static_cast<std::uint8_t>(k);
    }
    render(spec, present, rng,
           std::span(images).subspan(s * d.image_bytes(), d.image_bytes()));
  }

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Rng shuffle(derive_seed(spec.seed, StreamPurpose::kSynth, 1));
  for (std::size_t i = total; i > 1; --i) {
    std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
  }

  std::array<std::size_t, 3> sizes{};
  if (spec.split_sizes) {
    sizes = *spec.split_sizes;
    if (sizes[0] + sizes[1] + sizes[2] != total) {
      throw ConfigError("split sizes must sum to " + std::to_string(total));
    }
  } else {
    sizes[1] = total * 15 / 100;
    sizes[2] = total * 15 / 100;
    sizes[0] = total - sizes[1] - sizes[2];
  }
  const std::span<const std::size_t> all(order);
  d.train = take(d, images, labels, all.subspan(0, sizes[0]));
  d.val = take(d, images, labels, all.subspan(sizes[0], sizes[1]));
  d.test = take(d, images, labels, all.subspan(sizes[0] + sizes[1], sizes[2]));

  if (spec.label_noise > 0.0 && spec.task == HeadKind::kMulticlass &&
      spec.classes > 1) {
    const std::size_t n = d.train.count;
    const auto flips = static_cast<std::size_t>(
        std::llround(spec.label_noise * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng noise(derive_seed(spec.seed, StreamPurpose::kLabelNoise));
    for (std::size_t i = 0; i < flips; ++i) {
      std::swap(idx[i], idx[i + noise.uniform_index(n - i)]);
      auto& label = d.train.labels[idx[i]];
      std::size_t other = noise.uniform_index(spec.classes - 1);
      if (other >= label) ++other;
      label = static_cast<std::uint8_t>(other);
    }
  }
  d.validate();
  return d;
}

Tensor normalize(std::span<const std::uint8_t> images, const Shape& shape,
                 std::span<const double> mean, std::span<const double> std) {
  if (shape.size() != 4) throw ShapeError("normalize: shape must be rank 4");
  if (images.size() != shape_size(shape)) {
    throw ShapeError("normalize: byte count does not match shape");
  }
  const std::size_t channels = shape[1], plane = shape[2] * shape[3];
  if (mean.size() != channels || std.size() != channels) {
    throw ShapeError("normalize: need one mean/std per channel");
  }
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("normalize: std must be positive");
  }
  Tensor out(shape);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t c = (i / plane) % channels;
    out[i] = static_cast<float>((images[i] / 255.0 - mean[c]) / std[c]);
  }
  return out;
}

void flip_sample(std::span<float> sample, std::size_t channels,
                 std::size_t height, std::size_t width) {
  for (std::size_t row = 0; row < channels * height; ++row) {
    auto line = sample.subspan(row * width, width);
    std::reverse(line.begin(), line.end());
  }
}

Tensor augment_flip(const Tensor& batch, double prob, Rng& rng) {
  if (batch.rank() != 4) throw ShapeError("augment_flip: batch must be rank 4");
  Tensor out = batch;
  for (std::size_t n = 0; n < batch.dim(0); ++n) {
    if (rng.bernoulli(prob)) {
      flip_sample(out.slice(n), batch.dim(1), batch.dim(2), batch.dim(3));
    }
  }
  return out;
}

bool flip_decision(std::uint64_t seed, std::size_t epoch,
                   std::size_t sample_index, double prob) {
  Rng rng(derive_seed(derive_seed(seed, StreamPurpose::kAugment, epoch),
                      StreamPurpose::kAugment, sample_index));
  return rng.bernoulli(prob);
}

std::vector<std::vector<std::size_t>> make_batches(
    std::size_t n, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Tensor gather_images(const Dataset& data, const Split& split,
                     std::span<const std::size_t> indices) {
  const std::size_t ib = data.image_bytes();
  std::vector<std::uint8_t> bytes(indices.size() * ib);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= split.count) throw ShapeError("sample index out of range");
    std::copy_n(split.images.begin() + static_cast<std::ptrdiff_t>(indices[b] * ib),
                ib, bytes.begin() + static_cast<std::ptrdiff_t>(b * ib));
  }
  return normalize(bytes, {indices.size(), data.channels, data.height, data.width},
                   data.mean, data.std);
}

std::vector<std::uint8_t> gather_labels(const Dataset& data,
                                        const Split& split,
                                        std::span<const std::size_t> indices) {
  const std::size_t lb = data.label_bytes();
  std::vector<std::uint8_t> out(indices.size() * lb);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    std::copy_n(split.labels.begin() + static_cast<std::ptrdiff_t>(indices[b] * lb),
                lb, out.begin() + static_cast<std::ptrdiff_t>(b * lb));
  }
  return out;
}

}  // namespace inmerge
