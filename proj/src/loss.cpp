#include "inmerge/loss.hpp"

#include <algorithm>
#include <cmath>

#include "inmerge/error.hpp"

namespace inmerge {

LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const std::uint8_t> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_ce: logits must be [N,K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_ce: expected " + std::to_string(n) +
                     " labels, got " + std::to_string(labels.size()));
  }
  LossResult r{0.0, Tensor(logits.shape())};
  std::vector<double> probs(k);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (labels[s] >= k) {
      throw ShapeError("softmax_ce: label " + std::to_string(labels[s]) +
                       " outside [0," + std::to_string(k) + ")");
    }
    const float* row = logits.raw() + s * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      probs[c] = std::exp(static_cast<double>(row[c]) - m);
      z += probs[c];
    }
    const double log_z = std::log(z) + m;
    total += log_z - row[labels[s]];
    for (std::size_t c = 0; c < k; ++c) {
      const double onehot = c == labels[s] ? 1.0 : 0.0;
      r.grad_logits[s * k + c] =
          static_cast<float>((probs[c] / z - onehot) / static_cast<double>(n));
    }
  }
  r.loss = total / static_cast<double>(n);
  if (!std::isfinite(r.loss)) throw NumericError("softmax_ce: non-finite loss");
  return r;
}

LossResult sigmoid_bce(const Tensor& logits,
                       std::span<const std::uint8_t> labels) {
  if (logits.rank() != 2) throw ShapeError("sigmoid_bce: logits must be [N,K]");
  if (labels.size() != logits.size()) {
    throw ShapeError("sigmoid_bce: label count does not match logits");
  }
  const double count = static_cast<double>(logits.size());
  LossResult r{0.0, Tensor(logits.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] > 1) {
      throw ShapeError("sigmoid_bce: non-binary label " +
                       std::to_string(labels[i]));
    }
    const double x = logits[i];
    const double y = labels[i];
    // max(x,0) - x*y + log(1 + exp(-|x|))
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    const double sig =
        x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    r.grad_logits[i] = static_cast<float>((sig - y) / count);
  }
  r.loss = total / count;
  if (!std::isfinite(r.loss)) throw NumericError("sigmoid_bce: non-finite loss");
  return r;
}

}  // namespace inmerge
