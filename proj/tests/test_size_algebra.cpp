#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "spegion/size_algebra.hpp"

using namespace spegion;

namespace {

std::vector<Size> small_universe() {
    std::vector<Size> u;
    for (std::uint64_t i = 0; i <= 8; ++i) u.push_back(Size::of(i));
    u.push_back(Size::omega());
    return u;
}

}  // namespace

TEST_CASE("addition basics") {
    CHECK(size_add(Size::of(2), Size::of(3)) == Size::of(5));
    CHECK(size_add(Size::of(7), Size::omega()) == Size::omega());
    CHECK(size_add(Size::of(0), Size::omega()) == Size::omega());
    CHECK(size_add(Size::omega(), Size::of(7)) == Size::omega());
}

TEST_CASE("multiplication basics") {
    CHECK(size_mul(Size::of(2), Size::of(3)) == Size::of(6));
    CHECK(size_mul(Size::of(1), Size::omega()) == Size::omega());
    // annihilator law, chosen to keep the semiring axioms
    CHECK(size_mul(Size::of(0), Size::omega()) == Size::of(0));
    CHECK(size_mul(Size::omega(), Size::of(0)) == Size::of(0));
}

TEST_CASE("monus definition cases") {
    CHECK(monus(Size::of(5), Size::of(3)) == Size::of(2));
    CHECK(monus(Size::of(3), Size::of(5)) == Size::of(0));
    CHECK(monus(Size::omega(), Size::of(100)) == Size::omega());
    CHECK(monus(Size::of(7), Size::of(0)) == Size::of(7));
    CHECK(monus(Size::of(7), Size::omega()) == Size::of(0));
    CHECK(monus(Size::omega(), Size::omega()) == Size::omega());
    CHECK(monus(Size::omega(), Size::of(0)) == Size::omega());
}

TEST_CASE("monus case precedence is consistent where cases overlap") {
    // when n' = 0 and n finite, the subtraction case and the n' = 0 case agree
    for (std::uint64_t n = 0; n <= 8; ++n) {
        CHECK(monus(Size::of(n), Size::of(0)) == Size::of(n));
    }
}

TEST_CASE("ordering") {
    CHECK(size_leq(Size::of(3), Size::of(10)));
    CHECK_FALSE(size_leq(Size::omega(), Size::of(5)));
    CHECK(size_leq(Size::omega(), Size::omega()));
    CHECK(size_leq(Size::of(4), Size::of(4)));
}

TEST_CASE("semiring axioms on the exhaustive small universe") {
    auto u = small_universe();
    Size zero = Size::of(0), one = Size::of(1);
    for (const Size &a : u) {
        CHECK(size_add(a, zero) == a);
        CHECK(size_add(zero, a) == a);
        CHECK(size_mul(a, one) == a);
        CHECK(size_mul(one, a) == a);
        CHECK(size_mul(a, zero) == zero);
        CHECK(size_mul(zero, a) == zero);
        for (const Size &b : u) {
            CHECK(size_add(a, b) == size_add(b, a));
            for (const Size &c : u) {
                CHECK(size_add(size_add(a, b), c) == size_add(a, size_add(b, c)));
                CHECK(size_mul(size_mul(a, b), c) == size_mul(a, size_mul(b, c)));
                CHECK(size_mul(a, size_add(b, c)) == size_add(size_mul(a, b), size_mul(a, c)));
                CHECK(size_mul(size_add(a, b), c) == size_add(size_mul(a, c), size_mul(b, c)));
            }
        }
    }
}

TEST_CASE("preorder laws and monotonicity") {
    auto u = small_universe();
    for (const Size &a : u) {
        CHECK(size_leq(a, a));
        for (const Size &b : u) {
            for (const Size &c : u) {
                if (size_leq(a, b) && size_leq(b, c)) CHECK(size_leq(a, c));
                if (size_leq(a, b)) {
                    CHECK(size_leq(size_add(a, c), size_add(b, c)));
                    CHECK(size_leq(size_mul(a, c), size_mul(b, c)));
                }
            }
        }
    }
}

TEST_CASE("monus interacts with the order") {
    auto u = small_universe();
    for (const Size &a : u) {
        for (const Size &b : u) {
            if (a.is_finite()) CHECK(size_leq(monus(a, b), a));
            if (size_leq(b, a) && a.is_finite()) CHECK(size_geq(size_add(monus(a, b), b), a));
        }
    }
}

TEST_CASE("random pairs keep the laws") {
    std::mt19937 rng(20240811);
    std::uniform_int_distribution<std::uint64_t> d(0, 1u << 20);
    std::uniform_int_distribution<int> omega_roll(0, 9);
    auto draw = [&]() { return omega_roll(rng) == 0 ? Size::omega() : Size::of(d(rng)); };
    for (int i = 0; i < 10000; ++i) {
        Size a = draw(), b = draw(), c = draw();
        CHECK(size_add(a, b) == size_add(b, a));
        CHECK(size_add(size_add(a, b), c) == size_add(a, size_add(b, c)));
        CHECK(size_mul(a, size_add(b, c)) == size_add(size_mul(a, b), size_mul(a, c)));
        CHECK(size_leq(monus(a, b), a));
    }
}

TEST_CASE("addition saturates instead of overflowing") {
    Size huge = Size::of(std::numeric_limits<std::uint64_t>::max() - 1);
    CHECK(size_add(huge, Size::of(5)) == Size::omega());
}
