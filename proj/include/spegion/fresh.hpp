#pragma once

// Deterministic name supply shared by the checker and the evaluator, so
// statically minted region names line up with dynamically minted ones.

#include <map>

#include "spegion/syntax.hpp"

namespace spegion {

struct FreshSource {
    std::uint32_t next_region = 1;
    std::map<Region, std::uint32_t> next_loc;

    FreshSource() { next_loc[Region::global()] = 2; }  // index 1 is the global unit

    Region fresh_region() { return Region::fresh(next_region++); }

    Location fresh_loc(const Region &rho) {
        auto [it, inserted] = next_loc.emplace(rho, 1);
        return Location{rho, it->second++};
    }
};

}  // namespace spegion
