#include "epirouter/universe.hpp"

namespace epirouter {

UniverseRegistry UniverseRegistry::standard() {
  UniverseRegistry r;
  r.register_universe(kStatFreq);
  r.register_universe(kStatBayes);
  r.register_universe(kStatMixed);
  r.register_universe(kStatIllPosed);
  r.register_universe(kPhysClassical);
  r.register_universe(kPhysQuantum);
  r.register_universe(kPhysRelativity);
  return r;
}

std::size_t UniverseRegistry::register_universe(std::string symbol) {
  if (symbol.empty()) {
    throw RegistryError("universe symbol must be non-empty");
  }
  if (index_.count(symbol)) {
    throw RegistryError("duplicate universe symbol: " + symbol);
  }
  const std::size_t idx = universes_.size();
  index_.emplace(symbol, idx);
  universes_.push_back(UniverseId{std::move(symbol)});
  return idx;
}

}  // namespace epirouter
