#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "mygo/errors.hpp"
#include "mygo/rng.hpp"

using mygo::Rng;

TEST_CASE("rng: same seed gives the same stream") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs |= x != c.next_u64();
    }
    CHECK(differs);
}

TEST_CASE("rng: state blob round trip resumes the stream") {
    Rng a(7);
    for (int i = 0; i < 17; ++i) a.next_u64();
    const auto blob = a.state();
    Rng b = Rng::from_state(blob);
    CHECK(a == b);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    const std::uint8_t short_blob[3] = {1, 2, 3};
    CHECK_THROWS_AS(Rng::from_state(short_blob), mygo::DataError);
}

TEST_CASE("rng: uniform and below stay in range") {
    Rng r(1);
    double lo = 1, hi = 0, mean = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        mean += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(mean / n == doctest::Approx(0.5).epsilon(0.01));
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto k = r.below(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
}

TEST_CASE("rng: shuffle is a permutation and seed-determined") {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Rng r1(3), r2(3);
    r1.shuffle(a);
    r2.shuffle(b);
    CHECK(a == b);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
    CHECK(a != expect);
}

TEST_CASE("rng: split streams differ from the parent") {
    Rng parent(9);
    Rng child = parent.split();
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        seen.insert(parent.next_u64());
        seen.insert(child.next_u64());
    }
    CHECK(seen.size() == 200);
}
