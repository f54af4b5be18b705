#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "inmerge/model.hpp"
#include "inmerge/rng.hpp"
#include "inmerge/tensor.hpp"

namespace inmerge {

// In-model merging hyperparameters.
//
// For every conv layer whose ordinal is >= l_s, each kernel K_i draws a
// Bernoulli(p); when it fires a partner j != i is drawn uniformly from the
// same layer and, if cos(k_i, k_j) > tau, K_i is replaced by
// alpha*K_i + (1-alpha)*K_j.
struct MergeConfig {
  double alpha = 0.8;
  double p = 0.3;
  double tau = 0.3;
  std::size_t l_s = 3;
  std::uint64_t seed = 0;
  // Merge when sim < tau instead; only used to probe dissimilar merging.
  bool inverted_gate = false;

  // Throws ConfigError when a value is outside its domain.
  void validate() const;

  bool operator==(const MergeConfig&) const = default;
};

inline constexpr double kZeroNormEpsilon = 1e-12;

// Row-major flattening of one kernel [C_in, kh, kw].
std::vector<float> vectorize_kernel(const Tensor& kernel);

// Kernel `index` of a conv weight [C_out, C_in, kh, kw] as a flat view.
std::span<const float> kernel_view(const Tensor& weight, std::size_t index);

// Cosine similarity clamped to [-1, 1]; nullopt when either norm is below
// kZeroNormEpsilon. Throws ShapeError on length mismatch.
std::optional<double> cosine_similarity(std::span<const float> a,
                                        std::span<const float> b);

// alpha*k_i + (1-alpha)*k_j elementwise.
Tensor merge_pair(const Tensor& k_i, const Tensor& k_j, double alpha);

enum class LayerSweepStatus { kSwept, kShallow, kDegenerate };

struct LayerMergeStats {
  std::size_t ordinal = 0;
  LayerSweepStatus status = LayerSweepStatus::kSwept;
  std::size_t kernels_considered = 0;
  std::size_t partner_draws = 0;
  std::size_t gate_passes = 0;
  std::size_t merges_applied = 0;
  std::size_t zero_norm = 0;
};

// One partner draw, in the order it was taken.
struct MergeTraceEntry {
  std::size_t ordinal;
  std::size_t i;
  std::size_t j;
  std::optional<double> similarity;
  bool applied;
};

struct MergeReport {
  std::vector<LayerMergeStats> layers;
  std::vector<MergeTraceEntry> trace;  // filled only when requested

  std::size_t total_considered() const;
  std::size_t total_draws() const;
  std::size_t total_gate_passes() const;
  std::size_t total_merges() const;
};

struct SweepOptions {
  bool record_trace = false;
};

// One pass over every eligible conv layer. Similarities and merge sources
// read a snapshot of the layer taken before any kernel is rewritten; writes
// go to the live weights. Draws are consumed from `rng` in (layer, kernel)
// order: one Bernoulli per kernel, then a partner index only if it fired.
MergeReport inmerge_sweep(Model& model, const MergeConfig& cfg, Rng& rng,
                          SweepOptions options = {});

struct PairSimilarity {
  std::size_t i;
  std::size_t j;
  double similarity;
};

struct SimilarityStats {
  std::size_t ordinal = 0;
  std::size_t kernels = 0;
  std::vector<PairSimilarity> pairs;  // i < j, lexicographic
  std::size_t undefined_pairs = 0;    // pairs with a zero-norm kernel
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double mean_abs = 0.0;
  // Equal-width bins over [-1, 1]; 1.0 lands in the last bin.
  std::vector<std::size_t> histogram;
};

SimilarityStats similarity_stats(const Model& model, std::size_t ordinal,
                                 std::size_t bins = 20);

}  // namespace inmerge
