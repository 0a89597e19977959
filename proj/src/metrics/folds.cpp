#include "biopay/metrics/folds.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "biopay/metrics/classification.hpp"

namespace biopay::metrics {

std::vector<FoldSpec> make_folds(const Catalog& catalog, const FoldProtocol& protocol) {
  if (protocol.per_class == 0 || protocol.folds == 0) {
    throw MetricsError("make_folds: per_class and folds must be positive");
  }
  std::set<std::string> seen;
  for (const auto& cls : catalog) {
    if (cls.image_ids.size() < protocol.per_class) {
      throw MetricsError("make_folds: class '" + cls.class_name + "' has " +
                         std::to_string(cls.image_ids.size()) + " images, needs " +
                         std::to_string(protocol.per_class));
    }
    for (const auto& id : cls.image_ids) {
      if (!seen.insert(id).second) throw MetricsError("make_folds: duplicate image id '" + id + "'");
    }
  }

  std::mt19937_64 rng(protocol.seed);
  std::vector<FoldSpec> folds;
  folds.reserve(protocol.folds);
  for (std::size_t f = 0; f < protocol.folds; ++f) {
    FoldSpec fold;
    fold.fold_index = static_cast<int>(f + 1);
    for (const auto& cls : catalog) {
      std::vector<std::string> pool = cls.image_ids;
      for (std::size_t i = 0; i < protocol.per_class; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        fold.entries.push_back({cls.class_name, pool[i]});
      }
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

}  // namespace biopay::metrics
