#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inmerge/model.hpp"
#include "inmerge/rng.hpp"
#include "inmerge/tensor.hpp"

namespace inmerge {

// One split: N images as uint8 [N,C,H,W] plus labels (multiclass: one byte
// per sample; multilabel: K bytes per sample, each 0 or 1).
struct Split {
  std::size_t count = 0;
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;

  bool operator==(const Split&) const = default;
};

enum class SplitName { kTrain, kVal, kTest };

std::string_view split_name(SplitName s);
SplitName parse_split_name(std::string_view s);

struct Dataset {
  HeadKind task = HeadKind::kMulticlass;
  std::size_t classes = 2;
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  Split train;
  Split val;
  Split test;
  std::vector<double> mean;  // per channel, applied after x/255
  std::vector<double> std;

  std::size_t image_bytes() const { return channels * height * width; }
  std::size_t label_bytes() const {
    return task == HeadKind::kMultilabel ? classes : 1;
  }
  const Split& split(SplitName s) const;
  Split& split(SplitName s);

  // Throws DataError if labels or sizes are inconsistent.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// Directory layout: meta.json plus {train,val,test}_{images,labels}.bin.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

enum class SynthKind { kGaussBlobs, kStripedTextures };

SynthKind parse_synth_kind(std::string_view s);
std::string_view synth_kind_name(SynthKind k);

struct SynthSpec {
  SynthKind kind = SynthKind::kStripedTextures;
  // Multilabel images superimpose the patterns of every present class.
  HeadKind task = HeadKind::kMulticlass;
  std::size_t per_class = 100;
  std::size_t classes = 2;
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::uint64_t seed = 0;
  // Explicit {train, val, test} sizes summing to per_class*classes. When
  // absent val and test are floor(15%) each and train takes the rest.
  std::optional<std::array<std::size_t, 3>> split_sizes;
  // Fraction of training labels replaced with a different random class
  // (multiclass only).
  double label_noise = 0.0;
};

Dataset synth_make(const SynthSpec& spec);

// x/255 normalized per channel: (x/255 - mean[c]) / std[c].
Tensor normalize(std::span<const std::uint8_t> images, const Shape& shape,
                 std::span<const double> mean, std::span<const double> std);

// Mirrors one sample [C,H,W] along its width axis in place.
void flip_sample(std::span<float> sample, std::size_t channels,
                 std::size_t height, std::size_t width);

// Mirrors each sample of a [N,C,H,W] batch with probability `prob`, one
// draw from `rng` per sample in batch order.
Tensor augment_flip(const Tensor& batch, double prob, Rng& rng);

// Flip decision for one sample in one epoch from its own substream, so it
// does not depend on which batch the sample lands in.
bool flip_decision(std::uint64_t seed, std::size_t epoch,
                   std::size_t sample_index, double prob);

// Fisher-Yates permutation of [0, n) when a seed is given; identity order
// otherwise. The last batch may be partial.
std::vector<std::vector<std::size_t>> make_batches(
    std::size_t n, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed);

// Gathers samples into a normalized [B,C,H,W] tensor.
Tensor gather_images(const Dataset& data, const Split& split,
                     std::span<const std::size_t> indices);
std::vector<std::uint8_t> gather_labels(const Dataset& data,
                                        const Split& split,
                                        std::span<const std::size_t> indices);

}  // namespace inmerge
