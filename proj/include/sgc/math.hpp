#pragma once

#include "sgc/types.hpp"

#include <cmath>

namespace sgc {

template <class S>
S leaky_relu(S x, S slope) {
  return x >= S(0) ? x : slope * x;
}

// Derivative convention at the kink: 1 for x >= 0.
template <class S>
S leaky_relu_grad(S x, S slope) {
  return x >= S(0) ? S(1) : slope;
}

// Numerically stable softmax (max subtraction). logits must be non-empty.
template <class S>
Vec<S> softmax(const Vec<S>& logits) {
  const S m = logits.maxCoeff();
  Vec<S> out = (logits.array() - m).exp().matrix();
  out /= out.sum();
  return out;
}

template <class S>
S log_sum_exp(const Vec<S>& logits) {
  const S m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

}  // namespace sgc
