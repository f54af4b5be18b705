#include "inmerge/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "inmerge/error.hpp"

namespace inmerge {

double accuracy(std::span<const std::uint8_t> pred,
                std::span<const std::uint8_t> truth) {
  if (pred.empty()) throw ShapeError("accuracy: empty input");
  if (pred.size() != truth.size()) {
    throw ShapeError("accuracy: prediction and label counts differ");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::optional<double> auroc(std::span<const double> scores,
                            std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("auroc: score and label counts differ");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk groups of equal score in ascending order. Each positive beats every
  // negative seen in earlier groups and ties with negatives in its own group.
  double concordant = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  std::size_t g = 0;
  while (g < order.size()) {
    std::size_t end = g;
    double pos = 0.0, neg = 0.0;
    while (end < order.size() && scores[order[end]] == scores[order[g]]) {
      if (labels[order[end]] > 1) throw ShapeError("auroc: non-binary label");
      (labels[order[end]] ? pos : neg) += 1.0;
      ++end;
    }
    concordant += pos * n_neg + 0.5 * pos * neg;
    n_pos += pos;
    n_neg += neg;
    g = end;
  }
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return concordant / (n_pos * n_neg);
}

double mean_auroc(std::span<const std::optional<double>> per_class) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& v : per_class) {
    if (v) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0) throw ShapeError("mean_auroc: no class has a defined AUROC");
  return sum / static_cast<double>(present);
}

std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("roc_points: score and label counts differ");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0.0, total_neg = 0.0;
  for (auto l : labels) (l ? total_pos : total_neg) += 1.0;

  std::vector<RocPoint> points;
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    points.push_back({threshold, total_neg > 0 ? fp / total_neg : 0.0,
                      total_pos > 0 ? tp / total_pos : 0.0});
  }
  return points;
}

}  // namespace inmerge
