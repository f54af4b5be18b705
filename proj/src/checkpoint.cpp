#include "inmerge/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include "inmerge/config_io.hpp"
#include "inmerge/error.hpp"
#include "inmerge/io.hpp"

namespace inmerge {
namespace {

constexpr std::string_view kFormat = "inmerge-checkpoint";
constexpr int kVersion = 1;
constexpr std::size_t kPreamble = sizeof(kCheckpointMagic) + 8;

constexpr std::string_view kVelocityPrefix = "velocity/";
constexpr std::string_view kBestPrefix = "best/";

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

[[noreturn]] void fail(CheckpointError::Kind kind, const std::string& what) {
  throw CheckpointError(kind, "checkpoint: " + what);
}

std::vector<Parameter> params_with_prefix(
    const std::vector<Parameter>& all, std::string_view prefix) {
  std::vector<Parameter> out;
  for (const auto& p : all) {
    if (p.name.size() > prefix.size() &&
        std::string_view(p.name).substr(0, prefix.size()) == prefix) {
      out.push_back({p.name.substr(prefix.size()), p.value});
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model,
                                            const CheckpointState& state) {
  std::vector<NamedTensor> tensors;
  for (const auto& p : model.params()) tensors.push_back({p.name, &p.value});
  if (state.optimizer) {
    if (state.optimizer->velocity.size() != model.params().size()) {
      throw ShapeError("checkpoint: optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      tensors.push_back({std::string(kVelocityPrefix) + model.params()[i].name,
                         &state.optimizer->velocity[i]});
    }
  }
  if (state.best_model) {
    for (const auto& p : state.best_model->params()) {
      tensors.push_back({std::string(kBestPrefix) + p.name, &p.value});
    }
  }

  json entries = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    const std::uint64_t length = t.tensor->size() * sizeof(float);
    entries.push_back({{"name", t.name},
                       {"dtype", "f32"},
                       {"shape", t.tensor->shape()},
                       {"offset", offset},
                       {"length", length}});
    offset += length;
  }
  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"tensors", entries},
                 {"arch", to_json(model.arch())},
                 {"train", state.train ? to_json(*state.train) : json(nullptr)},
                 {"merge", state.train && state.train->merge
                               ? to_json(*state.train->merge)
                               : json(nullptr)},
                 {"rng", {{"next_epoch", state.next_epoch}}},
                 {"log", to_json(state.log)}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + text.size() + offset);
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : tensors) {
    for (float f : t.tensor->data()) put_f32(out, f);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof(kCheckpointMagic)) {
    fail(Kind::kTruncated, "file shorter than the magic bytes");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    fail(Kind::kBadMagic, "bad magic bytes");
  }
  if (bytes.size() < kPreamble) fail(Kind::kTruncated, "missing header length");
  const std::uint64_t header_len = get_u64(bytes.data() + sizeof(kCheckpointMagic));
  if (header_len == 0) fail(Kind::kCorruptHeader, "header length is zero");
  if (header_len > bytes.size() - kPreamble) {
    fail(Kind::kTruncated, "header length " + std::to_string(header_len) +
                               " exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + kPreamble,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len));
  } catch (const json::exception& e) {
    fail(Kind::kCorruptHeader, std::string("header is not valid JSON: ") + e.what());
  }
  const std::span<const std::uint8_t> payload =
      bytes.subspan(kPreamble + header_len);

  std::vector<Parameter> all;
  ArchConfig arch;
  CheckpointState state;
  std::optional<TrainConfig> train;
  try {
    if (header.at("format").get<std::string>() != kFormat ||
        header.at("version").get<int>() != kVersion) {
      fail(Kind::kCorruptHeader, "unsupported format or version");
    }
    std::set<std::string> seen;
    std::uint64_t expected_offset = 0;
    for (const auto& e : header.at("tensors")) {
      const std::string name = e.at("name").get<std::string>();
      if (!seen.insert(name).second) {
        fail(Kind::kCorruptHeader, "duplicate tensor '" + name + "'");
      }
      const std::string dtype = e.at("dtype").get<std::string>();
      if (dtype != "f32") {
        fail(Kind::kUnknownDtype, "tensor '" + name + "' has dtype '" + dtype + "'");
      }
      const Shape shape = e.at("shape").get<Shape>();
      const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
      const std::uint64_t length = e.at("length").get<std::uint64_t>();
      if (shape.empty() || std::find(shape.begin(), shape.end(), 0) != shape.end() ||
          length != shape_size(shape) * sizeof(float)) {
        fail(Kind::kCorruptHeader, "tensor '" + name + "' length does not match its shape");
      }
      if (offset < expected_offset) {
        fail(Kind::kOffsetOverlap, "tensor '" + name + "' overlaps its predecessor");
      }
      if (offset > expected_offset) {
        fail(Kind::kCorruptHeader, "gap before tensor '" + name + "'");
      }
      if (offset + length > payload.size()) {
        fail(Kind::kTruncated, "payload ends inside tensor '" + name + "'");
      }
      std::vector<float> values(shape_size(shape));
      for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = get_f32(payload.data() + offset + 4 * i);
      }
      all.push_back({name, Tensor(shape, std::move(values))});
      expected_offset = offset + length;
    }
    if (expected_offset != payload.size()) {
      fail(Kind::kCorruptHeader, "payload has " +
                                     std::to_string(payload.size() - expected_offset) +
                                     " trailing bytes");
    }
    arch = arch_from_json(header.at("arch"));
    if (!header.at("train").is_null()) train = train_from_json(header.at("train"));
    state.next_epoch = header.at("rng").at("next_epoch").get<std::size_t>();
    state.log = train_log_from_json(header.at("log"));
  } catch (const json::exception& e) {
    fail(Kind::kCorruptHeader, std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    fail(Kind::kCorruptHeader, std::string("malformed config echo: ") + e.what());
  }
  state.train = train;

  std::vector<Parameter> model_params;
  for (const auto& p : all) {
    if (p.name.find('/') == std::string::npos) model_params.push_back(p);
  }
  std::vector<Parameter> velocity = params_with_prefix(all, kVelocityPrefix);
  std::vector<Parameter> best = params_with_prefix(all, kBestPrefix);
  try {
    std::vector<LayerSpec> layers = resolve_layers(arch);
    Model model(arch, layers, std::move(model_params));
    if (!velocity.empty()) {
      OptimizerState opt;
      if (velocity.size() != model.params().size()) {
        fail(Kind::kMismatch, "velocity tensors do not cover the model");
      }
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        if (velocity[i].name != model.params()[i].name) {
          fail(Kind::kMismatch, "velocity tensor order does not match the model");
        }
        require_shape(velocity[i].value, model.params()[i].value.shape(),
                      velocity[i].name);
        opt.velocity.push_back(std::move(velocity[i].value));
      }
      state.optimizer = std::move(opt);
    }
    if (!best.empty()) state.best_model.emplace(arch, layers, std::move(best));
    return {std::move(model), std::move(state)};
  } catch (const ShapeError& e) {
    fail(Kind::kMismatch, e.what());
  } catch (const ConfigError& e) {
    fail(Kind::kMismatch, e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointState& state) {
  write_file_atomic(path, encode_checkpoint(model, state));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "checkpoint: no such file " + path.string());
  }
  return decode_checkpoint(read_file(path));
}

void save_protocol_state(const std::filesystem::path& path,
                         const ProtocolState& state, const TrainConfig& cfg) {
  CheckpointState s;
  s.optimizer = state.optimizer;
  s.best_model = state.best_model;
  s.train = cfg;
  s.next_epoch = state.next_epoch;
  s.log = state.log;
  save_checkpoint(path, state.model, s);
}

ProtocolState protocol_state_from(Checkpoint ckpt) {
  if (!ckpt.state.optimizer || !ckpt.state.best_model) {
    throw CheckpointError(CheckpointError::Kind::kMismatch,
                          "checkpoint has no resumable training state");
  }
  return ProtocolState{std::move(ckpt.model), std::move(*ckpt.state.optimizer),
                       std::move(*ckpt.state.best_model), ckpt.state.next_epoch,
                       std::move(ckpt.state.log)};
}

}  // namespace inmerge
