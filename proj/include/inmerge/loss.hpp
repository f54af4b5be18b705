#pragma once

#include <cstdint>
#include <span>

#include "inmerge/tensor.hpp"

namespace inmerge {

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

// Mean over the batch of -log softmax(logits)[label]; grad is
// (softmax - onehot) / N. Accumulation is done in double.
LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const std::uint8_t> labels);

// Mean over N*K elements of binary cross-entropy on sigmoid(logit);
// labels is a flat N*K array of 0/1.
LossResult sigmoid_bce(const Tensor& logits,
                       std::span<const std::uint8_t> labels);

}  // namespace inmerge
