#pragma once

// Reference implementations used by the unit and acceptance tests. They are
// written directly from the definitions and share no code with the library
// beyond the Tensor container and the Rng engine.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inmerge/merge.hpp"
#include "inmerge/model.hpp"
#include "inmerge/rng.hpp"

namespace inmerge::testing {

// ||a - b|| / max(||a||, ||b||), 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradCheck {
  std::string kind;
  std::size_t instances = 0;
  double worst = 0.0;  // largest norm-wise relative error seen
};

// Analytic vs central-difference gradients (step 1e-3) for every layer
// kind, the two losses and a small end-to-end model, on `instances` random
// problems per kind.
std::vector<GradCheck> gradient_checks(std::uint64_t seed,
                                       std::size_t instances);

// Mann-Whitney statistic by explicit pair counting.
std::optional<double> pair_count_auroc(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels);

double oracle_cosine(std::span<const float> a, std::span<const float> b);

struct ReplayedMerge {
  std::size_t ordinal;
  std::size_t i;
  std::size_t j;
  bool applied;
};

// Re-derives a sweep's decisions from a fresh copy of the merge stream and
// the pre-sweep weights, and returns the weights the sweep must produce.
struct Replay {
  std::vector<ReplayedMerge> draws;
  std::vector<Tensor> expected_conv_weights;  // by conv ordinal
};

Replay replay_sweep(const Model& before, const MergeConfig& cfg,
                    std::uint64_t rng_seed);

// A conv-only model whose single layer holds `kernels` (each [C,kh,kw]).
Model single_conv_model(const std::vector<std::vector<float>>& kernels,
                        std::size_t channels, std::size_t kh, std::size_t kw);

}  // namespace inmerge::testing
