#pragma once

// The extended-natural-number preordered semiring (N u {w}, +, *, monus, 0, 1, <=)
// with w as greatest element and truncated subtraction.

#include <atomic>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "spegion/syntax.hpp"

namespace spegion {

namespace detail {
inline void require_concrete(const Size &s, const char *op) {
    if (s.is_symbolic())
        throw std::logic_error(std::string("symbolic size reached ") + op + ": " + s.str());
}
inline void overflow_note() {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
        std::fputs("spegion: size arithmetic overflowed, saturating to w\n", stderr);
}
}  // namespace detail

// n + w = w = w + n; finite addition saturates to w on overflow.
inline Size size_add(const Size &a, const Size &b) {
    detail::require_concrete(a, "size_add");
    detail::require_concrete(b, "size_add");
    if (a.is_omega() || b.is_omega()) return Size::omega();
    if (a.n > std::numeric_limits<std::uint64_t>::max() - b.n) {
        detail::overflow_note();
        return Size::omega();
    }
    return Size::of(a.n + b.n);
}

// 0 annihilates (including 0 * w = 0); otherwise w absorbs.
inline Size size_mul(const Size &a, const Size &b) {
    detail::require_concrete(a, "size_mul");
    detail::require_concrete(b, "size_mul");
    if ((a.is_finite() && a.n == 0) || (b.is_finite() && b.n == 0)) return Size::of(0);
    if (a.is_omega() || b.is_omega()) return Size::omega();
    if (a.n > std::numeric_limits<std::uint64_t>::max() / b.n) {
        detail::overflow_note();
        return Size::omega();
    }
    return Size::of(a.n * b.n);
}

// a <= b in the preorder with w greatest.
inline bool size_leq(const Size &a, const Size &b) {
    detail::require_concrete(a, "size_leq");
    detail::require_concrete(b, "size_leq");
    if (b.is_omega()) return true;
    if (a.is_omega()) return false;
    return a.n <= b.n;
}

inline bool size_geq(const Size &a, const Size &b) { return size_leq(b, a); }

// Truncated subtraction, cases applied top to bottom:
//   n - n'  when both finite and n >= n'
//   0       when both finite and n < n'
//   n       when n' = 0
//   0       when n < n' and n' = w
//   w       when n = w
inline Size monus(const Size &a, const Size &b) {
    detail::require_concrete(a, "monus");
    detail::require_concrete(b, "monus");
    if (a.is_finite() && b.is_finite()) {
        if (a.n >= b.n) return Size::of(a.n - b.n);
        return Size::of(0);
    }
    if (b.is_finite() && b.n == 0) return a;
    if (b.is_omega() && !a.is_omega()) return Size::of(0);
    return Size::omega();  // a = w
}

}  // namespace spegion
