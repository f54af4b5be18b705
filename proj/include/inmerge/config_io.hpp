#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "inmerge/merge.hpp"
#include "inmerge/metrics.hpp"
#include "inmerge/model.hpp"
#include "inmerge/train.hpp"

namespace inmerge {

using json = nlohmann::json;

// JSON forms of the configuration types. Readers reject unknown keys and
// fill documented defaults for missing ones; they throw ConfigError.

json to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const json& j);

std::string_view head_kind_name(HeadKind k);
HeadKind parse_head_kind(std::string_view s);

json to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const json& j);

json to_json(const MergeConfig& cfg);
// `default_seed` is used when the document has no "seed".
MergeConfig merge_from_json(const json& j, std::uint64_t default_seed);

json to_json(const TrainConfig& cfg);
TrainConfig train_from_json(const json& j);

json to_json(const EpochRecord& rec);
EpochRecord epoch_record_from_json(const json& j);
json to_json(const TrainLog& log);
TrainLog train_log_from_json(const json& j);

json to_json(const MergeReport& report);
json to_json(const MetricBundle& m);

// The architecture section of a run config. Input geometry and head are
// normally taken from the dataset; when given they must agree with it.
struct ArchSection {
  std::string preset;
  std::vector<LayerSpec> layers;
  std::optional<std::size_t> channels, height, width, classes;
  std::optional<HeadKind> head;
};

ArchSection arch_section_from_json(const json& j);
json to_json(const ArchSection& a);
// Throws DataError naming both values on any disagreement.
ArchConfig arch_for_dataset(const ArchSection& section, const Dataset& data);

// Run configuration document:
//   { "arch": {...}, "data": "dir", "train": {...},
//     "merge": {...} (optional), "output": "dir" }
// Relative paths resolve against the config file's directory.
struct RunConfig {
  ArchSection arch;
  std::filesystem::path data_dir;
  TrainConfig train;
  std::filesystem::path output_dir;
};

RunConfig run_config_from_json(const json& j,
                               const std::filesystem::path& base_dir);
json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace inmerge
