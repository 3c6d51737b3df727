#pragma once

#include <cstdint>
#include <vector>

#include "avq/data/dataset.hpp"

namespace avq {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Grouped k-fold over source clips: clips are shuffled with `seed` and dealt
/// round-robin, so no clip straddles folds and fold sizes differ by at most one
/// clip. ConfigError when k < 2 or k exceeds the number of distinct clips.
std::vector<Fold> kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed);

}  // namespace avq
