#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "subspace/tuner.hpp"

namespace subspace {

struct LayerDims {
  std::size_t n = 0;  // input width
  std::size_t m = 0;  // output width
};

/// Trainable parameters `method` attaches to one n×m weight at rank r.
std::size_t count_params(Method method, LayerDims dims, std::size_t rank);

/// Sum of count_params over every layer.
std::size_t count_params(Method method, const std::vector<LayerDims>& layers, std::size_t rank);

inline double permille(std::size_t trainable, std::size_t backbone) {
  return 1000.0 * static_cast<double>(trainable) / static_cast<double>(backbone);
}

/// Where tuners are placed, and the size of the whole backbone.
struct ModelShape {
  std::string name;
  std::vector<LayerDims> block;  // tuned weights of one block
  std::size_t blocks = 1;
  std::size_t backbone_count = 0;

  std::vector<LayerDims> layers() const;
};

/// Key and value projections plus the FFN intermediate of each of the 12
/// blocks; backbone size 124,645,632.
ModelShape roberta_base_shape();

/// "roberta-base", or "NxM[,NxM...][@blocks][/backbone]", e.g. "768x768,768x3072@12".
/// Without an explicit backbone the tuned weights themselves form the backbone.
ModelShape parse_model_shape(std::string_view text);

}  // namespace subspace
