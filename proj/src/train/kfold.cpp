#include "avq/train/kfold.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"

namespace avq {

std::vector<Fold> kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> clips = ds.clip_ids();
  if (k < 2) throw ConfigError("k-fold needs k >= 2, got " + std::to_string(k));
  if (k > clips.size()) {
    throw ConfigError("k-fold with k=" + std::to_string(k) + " needs at least as many source clips, got " +
                      std::to_string(clips.size()));
  }
  Rng rng(seed);
  std::shuffle(clips.begin(), clips.end(), rng.engine());
  std::unordered_map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < clips.size(); ++i) fold_of[clips[i]] = i % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t f = fold_of.at(ds[i].source_clip_id);
    for (std::size_t j = 0; j < k; ++j) (j == f ? folds[j].validation : folds[j].train).push_back(i);
  }
  return folds;
}

}  // namespace avq
