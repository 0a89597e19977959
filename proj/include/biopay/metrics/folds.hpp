#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace biopay::metrics {

// Image ids grouped by class, in a fixed class order.
struct CatalogClass {
  std::string class_name;
  std::vector<std::string> image_ids;
};

using Catalog = std::vector<CatalogClass>;

struct FoldEntry {
  std::string class_name;
  std::string image_id;

  friend bool operator==(const FoldEntry&, const FoldEntry&) = default;
};

struct FoldSpec {
  int fold_index = 1;  // 1-based
  std::vector<FoldEntry> entries;

  friend bool operator==(const FoldSpec&, const FoldSpec&) = default;
};

struct FoldProtocol {
  std::size_t per_class = 29;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

// Each fold draws `per_class` ids per class without replacement; folds are
// drawn independently of each other, so an image may recur across folds.
std::vector<FoldSpec> make_folds(const Catalog& catalog, const FoldProtocol& protocol = {});

}  // namespace biopay::metrics
