#include "inmerge/merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "inmerge/error.hpp"

namespace inmerge {
namespace {

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += static_cast<double>(a[k]) * b[k];
  }
  return s;
}

std::optional<double> cosine_from_parts(double d, double na, double nb) {
  if (na < kZeroNormEpsilon || nb < kZeroNormEpsilon) return std::nullopt;
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

// Interpolated in double and rounded once, so merging a kernel with an
// identical partner returns it unchanged for every alpha.
float interpolate(float a, float b, double alpha) {
  return static_cast<float>(alpha * a + (1.0 - alpha) * b);
}

}  // namespace

void MergeConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("merge alpha must lie in [0,1], got " +
                      std::to_string(alpha));
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("merge p must lie in [0,1], got " + std::to_string(p));
  }
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw ConfigError("merge tau must lie in [-1,1], got " +
                      std::to_string(tau));
  }
}

std::vector<float> vectorize_kernel(const Tensor& kernel) {
  if (kernel.empty()) throw ShapeError("vectorize_kernel: empty kernel");
  return {kernel.data().begin(), kernel.data().end()};
}

std::span<const float> kernel_view(const Tensor& weight, std::size_t index) {
  if (weight.rank() != 4) throw ShapeError("kernel_view: weight must be rank 4");
  return weight.slice(index);
}

std::optional<double> cosine_similarity(std::span<const float> a,
                                        std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()) + " differ");
  }
  return cosine_from_parts(dot(a, b), norm(a), norm(b));
}

Tensor merge_pair(const Tensor& k_i, const Tensor& k_j, double alpha) {
  require_shape(k_j, k_i.shape(), "merge_pair partner");
  Tensor out(k_i.shape());
  for (std::size_t e = 0; e < k_i.size(); ++e) {
    out[e] = interpolate(k_i[e], k_j[e], alpha);
  }
  return out;
}

std::size_t MergeReport::total_considered() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kernels_considered;
  return n;
}

std::size_t MergeReport::total_draws() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.partner_draws;
  return n;
}

std::size_t MergeReport::total_gate_passes() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.gate_passes;
  return n;
}

std::size_t MergeReport::total_merges() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.merges_applied;
  return n;
}

MergeReport inmerge_sweep(Model& model, const MergeConfig& cfg, Rng& rng,
                          SweepOptions options) {
  cfg.validate();

  MergeReport report;
  for (ConvLayerRef layer : model.conv_layers()) {
    LayerMergeStats stats;
    stats.ordinal = layer.ordinal;
    Tensor& live = layer.weight;
    const std::size_t n = live.dim(0);
    if (layer.ordinal < cfg.l_s) {
      stats.status = LayerSweepStatus::kShallow;
      report.layers.push_back(stats);
      continue;
    }
    if (n < 2) {
      stats.status = LayerSweepStatus::kDegenerate;
      report.layers.push_back(stats);
      continue;
    }

    const Tensor snapshot = live;
    std::vector<double> norms(n);
    for (std::size_t k = 0; k < n; ++k) norms[k] = norm(snapshot.slice(k));

    for (std::size_t i = 0; i < n; ++i) {
      ++stats.kernels_considered;
      if (!rng.bernoulli(cfg.p)) continue;
      ++stats.partner_draws;
      std::size_t j = rng.uniform_index(n - 1);
      if (j >= i) ++j;

      const auto src_i = snapshot.slice(i);
      const auto src_j = snapshot.slice(j);
      const std::optional<double> sim =
          cosine_from_parts(dot(src_i, src_j), norms[i], norms[j]);
      bool pass = false;
      if (!sim) {
        ++stats.zero_norm;
      } else {
        pass = cfg.inverted_gate ? *sim < cfg.tau : *sim > cfg.tau;
      }
      if (pass) {
        ++stats.gate_passes;
        auto dst = live.slice(i);
        for (std::size_t e = 0; e < dst.size(); ++e) {
          dst[e] = interpolate(src_i[e], src_j[e], cfg.alpha);
        }
        ++stats.merges_applied;
      }
      if (options.record_trace) {
        report.trace.push_back({layer.ordinal, i, j, sim, pass});
      }
    }
    report.layers.push_back(stats);
  }
  return report;
}

SimilarityStats similarity_stats(const Model& model, std::size_t ordinal,
                                 std::size_t bins) {
  if (bins == 0) throw ShapeError("similarity_stats: bins must be >= 1");
  const Tensor* weight = nullptr;
  for (const auto& layer : model.conv_layers()) {
    if (layer.ordinal == ordinal) weight = &layer.weight;
  }
  if (!weight) {
    throw ShapeError("no conv layer with ordinal " + std::to_string(ordinal) +
                     " (model has " + std::to_string(model.num_conv()) + ")");
  }

  SimilarityStats s;
  s.ordinal = ordinal;
  s.kernels = weight->dim(0);
  s.histogram.assign(bins, 0);
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0, sum_abs = 0.0;
  for (std::size_t i = 0; i < s.kernels; ++i) {
    for (std::size_t j = i + 1; j < s.kernels; ++j) {
      const auto sim =
          cosine_similarity(weight->slice(i), weight->slice(j));
      if (!sim) {
        ++s.undefined_pairs;
        continue;
      }
      s.pairs.push_back({i, j, *sim});
      s.min = std::min(s.min, *sim);
      s.max = std::max(s.max, *sim);
      sum += *sim;
      sum_abs += std::abs(*sim);
      auto bin = static_cast<std::size_t>((*sim + 1.0) / 2.0 *
                                          static_cast<double>(bins));
      s.histogram[std::min(bin, bins - 1)]++;
    }
  }
  if (s.pairs.empty()) {
    s.min = s.max = 0.0;
  } else {
    s.mean = sum / static_cast<double>(s.pairs.size());
    s.mean_abs = sum_abs / static_cast<double>(s.pairs.size());
  }
  return s;
}

}  // namespace inmerge
