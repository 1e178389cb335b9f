#pragma once

// The dual-layer store: an outer map from regions to inner stores, where each
// inner store maps locations to values and carries the region's maximum size.

#include <map>
#include <optional>

#include "spegion/size_algebra.hpp"
#include "spegion/syntax.hpp"

namespace spegion {

// sizeOf: lambdas weigh 1 plus their free locations; everything else weighs 1.
// The canonical global unit is ambient, not captured state, so it is not
// charged against closures that mention it.
inline std::size_t counted_locations(const TermRef &body) {
    std::size_t n = 0;
    for (const Location &l : free_locations(body))
        if (!(l == Location::global_unit())) ++n;
    return n;
}

inline Size size_of_value(const Value &v) {
    if (const auto *lam = std::get_if<LamV>(&v.node))
        return Size::of(1 + counted_locations(lam->body));
    if (const auto *bl = std::get_if<BigLamV>(&v.node))
        return Size::of(1 + counted_locations(bl->body));
    return Size::of(1);
}

struct InnerStore {
    std::map<Location, Value> cells;
    Size max_size = Size::omega();
};

// A recursive closure stores a pointer to its own cell; that self-reference
// is the cell itself, not extra space, so stored sizes do not count it.
inline Size size_of_stored(const Location &at, const Value &v) {
    const TermRef *body = nullptr;
    if (const auto *lam = std::get_if<LamV>(&v.node)) body = &lam->body;
    if (const auto *bl = std::get_if<BigLamV>(&v.node)) body = &bl->body;
    if (!body) return Size::of(1);
    std::size_t n = 0;
    for (const Location &l : free_locations(*body))
        if (!(l == Location::global_unit()) && !(l == at)) ++n;
    return Size::of(1 + n);
}

inline Size current_size(const InnerStore &inner) {
    Size total = Size::of(0);
    for (const auto &[loc, v] : inner.cells) total = size_add(total, size_of_stored(loc, v));
    return total;
}

struct Store {
    std::map<Region, InnerStore> regions;

    static Store initial() {
        Store s;
        InnerStore glob;
        glob.max_size = Size::omega();
        glob.cells.emplace(Location::global_unit(), val::unit());
        s.regions.emplace(Region::global(), std::move(glob));
        return s;
    }

    const InnerStore *find_region(const Region &r) const {
        auto it = regions.find(r);
        return it == regions.end() ? nullptr : &it->second;
    }
    InnerStore *find_region(const Region &r) {
        auto it = regions.find(r);
        return it == regions.end() ? nullptr : &it->second;
    }

    const Value *find_cell(const Location &l) const {
        const InnerStore *inner = find_region(l.region);
        if (!inner) return nullptr;
        auto it = inner->cells.find(l);
        return it == inner->cells.end() ? nullptr : &it->second;
    }
};

}  // namespace spegion
