#pragma once

#include <span>

#include "savbdf/spectral.hpp"

namespace savbdf {

/// sum_i weights[i] * history[i], history ordered most recent first.
/// Realizes A_k(u^n) and B_k(u^n) for the BDF weights of a tableau.
inline Field combine_history(std::span<const double> weights, std::span<const Field> history) {
  if (weights.empty()) throw Error("combine_history needs at least one weight");
  if (history.size() < weights.size()) throw InsufficientHistory(weights.size(), history.size());
  Field out = history[0];
  out.scale(weights[0]);
  for (std::size_t i = 1; i < weights.size(); ++i) out.axpy(weights[i], history[i]);
  return out;
}

}  // namespace savbdf
