#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace inmerge {

// Fraction of positions where pred == truth. Throws on empty or unequal
// inputs.
double accuracy(std::span<const std::uint8_t> pred,
                std::span<const std::uint8_t> truth);

// Mann-Whitney estimate of the area under the ROC curve:
// (concordant pairs + 0.5 * tied pairs) / (n_pos * n_neg).
// nullopt when the labels contain a single class.
std::optional<double> auroc(std::span<const double> scores,
                            std::span<const std::uint8_t> labels);

// Mean over the classes that have a value; throws if none do.
double mean_auroc(std::span<const std::optional<double>> per_class);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// One point per distinct score, descending thresholds, starting at (0,0).
std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels);

struct MetricBundle {
  std::size_t n_samples = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  std::vector<std::optional<double>> per_class_auroc;
  std::optional<double> mean_auroc;
  // Classes whose AUROC is undefined on this split (single-class labels).
  std::vector<std::size_t> absent_classes;
};

}  // namespace inmerge
