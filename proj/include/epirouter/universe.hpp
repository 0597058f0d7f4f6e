#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "epirouter/errors.hpp"

namespace epirouter {

// Symbolic identifier of one belief-space universe. Comparison is exact
// symbol equality; ordering questions (argmax tie-breaks and the like) go
// through the registry's registration index, never through the symbol text.
struct UniverseId {
  std::string symbol;

  bool operator==(const UniverseId&) const = default;
};

inline const char* kStatFreq = "STAT_FREQ";
inline const char* kStatBayes = "STAT_BAYES";
inline const char* kStatMixed = "STAT_MIXED";
inline const char* kStatIllPosed = "STAT_ILL_POSED";
inline const char* kPhysClassical = "PHYS_CLASSICAL";
inline const char* kPhysQuantum = "PHYS_QUANTUM";
inline const char* kPhysRelativity = "PHYS_RELATIVITY";

// Ordered set of registered universes. Registration order is the total
// order used for deterministic tie-breaking.
class UniverseRegistry {
 public:
  // The seven built-in universes, in their canonical order.
  static UniverseRegistry standard();

  // Returns the new index. Throws RegistryError on duplicates.
  std::size_t register_universe(std::string symbol);

  bool contains(const UniverseId& u) const {
    return index_.count(u.symbol) != 0;
  }

  std::size_t index_of(const UniverseId& u) const {
    auto it = index_.find(u.symbol);
    if (it == index_.end()) {
      throw RegistryError("unknown universe symbol: " + u.symbol);
    }
    return it->second;
  }

  const UniverseId& at(std::size_t i) const { return universes_.at(i); }

  std::size_t size() const { return universes_.size(); }

  const std::vector<UniverseId>& list() const { return universes_; }

  bool operator==(const UniverseRegistry& other) const {
    return universes_ == other.universes_;
  }

 private:
  std::vector<UniverseId> universes_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace epirouter
