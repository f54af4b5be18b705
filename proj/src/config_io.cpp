#include "inmerge/config_io.hpp"

#include <fstream>
#include <set>

#include "inmerge/error.hpp"

namespace inmerge {
namespace {

// Rejects keys outside `allowed`; `where` names the section in messages.
void check_keys(const json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + " must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
T get_or(const json& j, std::string_view where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

template <class T>
T get_req(const json& j, std::string_view where, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string(where) + ": missing key '" + key + "'");
  }
  return get_or<T>(j, where, key, T{});
}

std::size_t get_size(const json& j, std::string_view where, const char* key,
                     std::size_t fallback) {
  if (j.contains(key) && !j.at(key).is_number_unsigned() &&
      !(j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0)) {
    throw ConfigError(std::string(where) + "." + key +
                      " must be a non-negative integer");
  }
  return get_or<std::size_t>(j, where, key, fallback);
}

}  // namespace

json to_json(const LayerSpec& spec) {
  json j = {{"kind", std::string(layer_kind_name(spec))}};
  if (const auto* c = std::get_if<Conv2dSpec>(&spec)) {
    j["in_channels"] = c->in_channels;
    j["out_channels"] = c->out_channels;
    j["kernel_h"] = c->kernel_h;
    j["kernel_w"] = c->kernel_w;
    j["stride"] = c->stride;
    j["padding"] = c->padding;
  } else if (const auto* p = std::get_if<MaxPool2dSpec>(&spec)) {
    j["window"] = p->window;
    j["stride"] = p->stride;
  } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
    j["in_features"] = d->in_features;
    j["out_features"] = d->out_features;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("layer entries need a 'kind'");
  }
  const std::string kind = get_req<std::string>(j, "layer", "kind");
  const std::string where = "layer " + kind;
  if (kind == "conv2d") {
    check_keys(j, where,
               {"kind", "in_channels", "out_channels", "kernel", "kernel_h",
                "kernel_w", "stride", "padding"});
    Conv2dSpec c;
    c.in_channels = get_size(j, where, "in_channels", 0);
    c.out_channels = get_size(j, where, "out_channels", 0);
    const std::size_t k = get_size(j, where, "kernel", 3);
    c.kernel_h = get_size(j, where, "kernel_h", k);
    c.kernel_w = get_size(j, where, "kernel_w", k);
    c.stride = get_size(j, where, "stride", 1);
    c.padding = get_size(j, where, "padding", 0);
    if (c.out_channels == 0 || c.kernel_h == 0 || c.kernel_w == 0 ||
        c.stride == 0) {
      throw ConfigError(where + ": channels, kernel and stride must be >= 1");
    }
    return c;
  }
  if (kind == "relu") {
    check_keys(j, where, {"kind"});
    return ReluSpec{};
  }
  if (kind == "maxpool2d") {
    check_keys(j, where, {"kind", "window", "stride"});
    MaxPool2dSpec p;
    p.window = get_size(j, where, "window", 2);
    p.stride = get_size(j, where, "stride", p.window);
    if (p.window == 0 || p.stride == 0) {
      throw ConfigError(where + ": window and stride must be >= 1");
    }
    return p;
  }
  if (kind == "dense") {
    check_keys(j, where, {"kind", "in_features", "out_features"});
    DenseSpec d;
    d.in_features = get_size(j, where, "in_features", 0);
    d.out_features = get_size(j, where, "out_features", 0);
    if (d.out_features == 0) throw ConfigError(where + ": out_features >= 1");
    return d;
  }
  if (kind == "flatten") {
    check_keys(j, where, {"kind"});
    return FlattenSpec{};
  }
  throw ConfigError("unknown layer kind '" + kind + "'");
}

std::string_view head_kind_name(HeadKind k) {
  return k == HeadKind::kMultilabel ? "multilabel" : "multiclass";
}

HeadKind parse_head_kind(std::string_view s) {
  if (s == "multiclass") return HeadKind::kMulticlass;
  if (s == "multilabel") return HeadKind::kMultilabel;
  throw ConfigError("unknown head kind '" + std::string(s) + "'");
}

json to_json(const ArchConfig& arch) {
  json layers = json::array();
  for (const auto& l : arch.layers) layers.push_back(to_json(l));
  return {{"preset", arch.preset},
          {"layers", layers},
          {"channels", arch.channels},
          {"height", arch.height},
          {"width", arch.width},
          {"classes", arch.head.classes},
          {"head", std::string(head_kind_name(arch.head.kind))}};
}

ArchConfig arch_from_json(const json& j) {
  check_keys(j, "arch",
             {"preset", "layers", "channels", "height", "width", "classes",
              "head"});
  ArchConfig a;
  a.preset = get_or<std::string>(j, "arch", "preset", "");
  if (j.contains("layers")) {
    for (const auto& l : j.at("layers")) a.layers.push_back(layer_from_json(l));
  }
  a.channels = get_size(j, "arch", "channels", 1);
  a.height = get_size(j, "arch", "height", 28);
  a.width = get_size(j, "arch", "width", 28);
  a.head.classes = get_size(j, "arch", "classes", 2);
  a.head.kind =
      parse_head_kind(get_or<std::string>(j, "arch", "head", "multiclass"));
  return a;
}

json to_json(const MergeConfig& cfg) {
  return {{"alpha", cfg.alpha}, {"p", cfg.p},
          {"tau", cfg.tau},     {"l_s", cfg.l_s},
          {"seed", cfg.seed},   {"inverted_gate", cfg.inverted_gate}};
}

MergeConfig merge_from_json(const json& j, std::uint64_t default_seed) {
  check_keys(j, "merge", {"alpha", "p", "tau", "l_s", "seed", "inverted_gate"});
  MergeConfig m;
  m.alpha = get_or<double>(j, "merge", "alpha", m.alpha);
  m.p = get_or<double>(j, "merge", "p", m.p);
  m.tau = get_or<double>(j, "merge", "tau", m.tau);
  m.l_s = get_size(j, "merge", "l_s", m.l_s);
  m.seed = get_or<std::uint64_t>(j, "merge", "seed", default_seed);
  m.inverted_gate = get_or<bool>(j, "merge", "inverted_gate", false);
  m.validate();
  return m;
}

json to_json(const TrainConfig& cfg) {
  json j = {{"lr0", cfg.lr0},
            {"momentum", cfg.momentum},
            {"weight_decay", cfg.weight_decay},
            {"gamma", cfg.gamma},
            {"batch_size", cfg.batch_size},
            {"epochs_pretrain", cfg.epochs_pretrain},
            {"epochs_inmerge", cfg.epochs_inmerge},
            {"seed", cfg.seed},
            {"augment_flip", cfg.augment_flip}};
  j["milestones"] = cfg.milestones ? json(*cfg.milestones) : json(nullptr);
  j["merge"] = cfg.merge ? to_json(*cfg.merge) : json(nullptr);
  return j;
}

TrainConfig train_from_json(const json& j) {
  check_keys(j, "train",
             {"lr0", "momentum", "weight_decay", "milestones", "gamma",
              "batch_size", "epochs_pretrain", "epochs_inmerge", "seed",
              "augment_flip", "merge"});
  TrainConfig t;
  t.lr0 = get_or<double>(j, "train", "lr0", t.lr0);
  t.momentum = get_or<double>(j, "train", "momentum", t.momentum);
  t.weight_decay = get_or<double>(j, "train", "weight_decay", t.weight_decay);
  t.gamma = get_or<double>(j, "train", "gamma", t.gamma);
  t.batch_size = get_size(j, "train", "batch_size", t.batch_size);
  t.epochs_pretrain = get_size(j, "train", "epochs_pretrain", t.epochs_pretrain);
  t.epochs_inmerge = get_size(j, "train", "epochs_inmerge", t.epochs_inmerge);
  t.seed = get_or<std::uint64_t>(j, "train", "seed", t.seed);
  t.augment_flip = get_or<bool>(j, "train", "augment_flip", t.augment_flip);
  if (j.contains("milestones") && !j.at("milestones").is_null()) {
    t.milestones =
        get_or<std::vector<std::size_t>>(j, "train", "milestones", {});
  }
  if (j.contains("merge") && !j.at("merge").is_null()) {
    t.merge = merge_from_json(j.at("merge"), t.seed);
  }
  t.validate();
  return t;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"phase", std::string(phase_name(r.phase))},
          {"lr", r.lr},
          {"iterations", r.stats.iterations},
          {"train_loss", r.stats.train_loss},
          {"sweeps", r.stats.sweeps},
          {"merge_considered", r.stats.merge_considered},
          {"merge_draws", r.stats.merge_draws},
          {"merge_gate_passes", r.stats.merge_gate_passes},
          {"merges_applied", r.stats.merges_applied},
          {"val_loss", r.val_loss},
          {"val_metric", r.val_metric}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.phase = j.at("phase").get<std::string>() == "inmerge" ? Phase::kInmerge
                                                          : Phase::kPretrain;
  r.lr = j.at("lr").get<double>();
  r.stats.iterations = j.at("iterations").get<std::size_t>();
  r.stats.train_loss = j.at("train_loss").get<double>();
  r.stats.sweeps = j.at("sweeps").get<std::size_t>();
  r.stats.merge_considered = j.at("merge_considered").get<std::size_t>();
  r.stats.merge_draws = j.at("merge_draws").get<std::size_t>();
  r.stats.merge_gate_passes = j.at("merge_gate_passes").get<std::size_t>();
  r.stats.merges_applied = j.at("merges_applied").get<std::size_t>();
  r.val_loss = j.at("val_loss").get<double>();
  r.val_metric = j.at("val_metric").get<double>();
  return r;
}

json to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) epochs.push_back(to_json(e));
  return {{"epochs", epochs},
          {"best_epoch",
           log.best_epoch ? json(*log.best_epoch) : json(nullptr)},
          {"best_val_metric", log.best_val_metric}};
}

TrainLog train_log_from_json(const json& j) {
  TrainLog log;
  for (const auto& e : j.at("epochs")) {
    log.epochs.push_back(epoch_record_from_json(e));
  }
  if (!j.at("best_epoch").is_null()) {
    log.best_epoch = j.at("best_epoch").get<std::size_t>();
  }
  log.best_val_metric = j.at("best_val_metric").get<double>();
  return log;
}

json to_json(const MergeReport& report) {
  json layers = json::array();
  for (const auto& l : report.layers) {
    const char* status = l.status == LayerSweepStatus::kShallow ? "shallow"
                         : l.status == LayerSweepStatus::kDegenerate
                             ? "degenerate"
                             : "swept";
    layers.push_back({{"ordinal", l.ordinal},
                      {"status", status},
                      {"considered", l.kernels_considered},
                      {"draws", l.partner_draws},
                      {"gate_passes", l.gate_passes},
                      {"merges", l.merges_applied},
                      {"zero_norm", l.zero_norm}});
  }
  return {{"layers", layers},
          {"considered", report.total_considered()},
          {"draws", report.total_draws()},
          {"gate_passes", report.total_gate_passes()},
          {"merges", report.total_merges()}};
}

json to_json(const MetricBundle& m) {
  json per_class = json::array();
  for (const auto& v : m.per_class_auroc) {
    per_class.push_back(v ? json(*v) : json(nullptr));
  }
  return {{"n_samples", m.n_samples},
          {"loss", m.loss},
          {"accuracy", m.accuracy ? json(*m.accuracy) : json(nullptr)},
          {"per_class_auroc", per_class},
          {"mean_auroc", m.mean_auroc ? json(*m.mean_auroc) : json(nullptr)},
          {"absent_classes", m.absent_classes}};
}

ArchSection arch_section_from_json(const json& j) {
  check_keys(j, "arch",
             {"preset", "layers", "channels", "height", "width", "classes",
              "head"});
  ArchSection a;
  a.preset = get_or<std::string>(j, "arch", "preset", "");
  if (j.contains("layers")) {
    if (!j.at("layers").is_array()) {
      throw ConfigError("arch.layers must be an array");
    }
    for (const auto& l : j.at("layers")) a.layers.push_back(layer_from_json(l));
  }
  if (a.preset.empty() && a.layers.empty()) {
    throw ConfigError("arch needs a 'preset' or a 'layers' list");
  }
  if (j.contains("channels")) a.channels = get_size(j, "arch", "channels", 0);
  if (j.contains("height")) a.height = get_size(j, "arch", "height", 0);
  if (j.contains("width")) a.width = get_size(j, "arch", "width", 0);
  if (j.contains("classes")) a.classes = get_size(j, "arch", "classes", 0);
  if (j.contains("head")) {
    a.head = parse_head_kind(get_req<std::string>(j, "arch", "head"));
  }
  return a;
}

json to_json(const ArchSection& a) {
  json j = json::object();
  if (!a.preset.empty()) j["preset"] = a.preset;
  if (!a.layers.empty()) {
    j["layers"] = json::array();
    for (const auto& l : a.layers) j["layers"].push_back(to_json(l));
  }
  if (a.channels) j["channels"] = *a.channels;
  if (a.height) j["height"] = *a.height;
  if (a.width) j["width"] = *a.width;
  if (a.classes) j["classes"] = *a.classes;
  if (a.head) j["head"] = std::string(head_kind_name(*a.head));
  return j;
}

ArchConfig arch_for_dataset(const ArchSection& section, const Dataset& data) {
  auto agree = [](const char* what, std::optional<std::size_t> declared,
                  std::size_t actual) {
    if (declared && *declared != actual) {
      throw DataError(DataError::Kind::kInvalid,
                      std::string("arch declares ") + what + "=" +
                          std::to_string(*declared) + " but dataset has " +
                          what + "=" + std::to_string(actual));
    }
  };
  agree("classes", section.classes, data.classes);
  agree("channels", section.channels, data.channels);
  agree("height", section.height, data.height);
  agree("width", section.width, data.width);
  if (section.head && *section.head != data.task) {
    throw DataError(DataError::Kind::kInvalid,
                    "arch declares head " +
                        std::string(head_kind_name(*section.head)) +
                        " but dataset task is " +
                        std::string(head_kind_name(data.task)));
  }
  ArchConfig a;
  a.preset = section.preset;
  a.layers = section.layers;
  a.channels = data.channels;
  a.height = data.height;
  a.width = data.width;
  a.head = {data.task, data.classes};
  return a;
}

RunConfig run_config_from_json(const json& j,
                               const std::filesystem::path& base_dir) {
  check_keys(j, "config", {"arch", "data", "train", "merge", "output"});
  if (!j.contains("arch")) throw ConfigError("config: missing 'arch'");
  if (!j.contains("data")) throw ConfigError("config: missing 'data'");
  RunConfig cfg;
  cfg.arch = arch_section_from_json(j.at("arch"));
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  cfg.data_dir = resolve(get_req<std::string>(j, "config", "data"));
  json train = j.contains("train") ? j.at("train") : json::object();
  if (train.contains("merge")) {
    throw ConfigError("train: 'merge' belongs at the top level");
  }
  cfg.train = train_from_json(train);
  if (j.contains("merge") && !j.at("merge").is_null()) {
    cfg.train.merge = merge_from_json(j.at("merge"), cfg.train.seed);
  }
  cfg.output_dir = resolve(get_or<std::string>(j, "config", "output", "out"));
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json train = to_json(cfg.train);
  train.erase("merge");
  json j = {{"arch", to_json(cfg.arch)},
            {"data", cfg.data_dir.string()},
            {"train", train},
            {"output", cfg.output_dir.string()}};
  if (cfg.train.merge) j["merge"] = to_json(*cfg.train.merge);
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace inmerge
