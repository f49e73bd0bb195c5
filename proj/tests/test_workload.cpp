#include <catch_amalgamated.hpp>

#include <cmath>

#include "cosa/workload.hpp"

using namespace cosa;

namespace {

std::int64_t product(const std::vector<std::int64_t>& v) {
    std::int64_t p = 1;
    for (auto x : v) p *= x;
    return p;
}

// Independent padding oracle: trial division from scratch.
std::int64_t oracle_pad(std::int64_t b, std::int64_t max_prime) {
    for (;; ++b) {
        std::int64_t x = b, big = 1;
        for (std::int64_t p = 2; p <= x; ++p) {
            while (x % p == 0) {
                x /= p;
                big = p;
            }
        }
        if (big <= max_prime) return b;
    }
}

}  // namespace

TEST_CASE("factorize keeps unit dimensions empty") {
    const auto pf = factorize(LayerDims::make(3, 1, 1, 1, 1, 4, 3));
    CHECK(pf.of(Dim::R) == std::vector<std::int64_t>{3});
    CHECK(pf.of(Dim::S).empty());
    CHECK(pf.of(Dim::C).empty());
    CHECK(pf.of(Dim::K) == std::vector<std::int64_t>{2, 2});
    CHECK(pf.of(Dim::N) == std::vector<std::int64_t>{3});
    CHECK(total_factor_count(pf) == 4);
}

TEST_CASE("factorize small bounds") {
    auto pf = factorize(LayerDims::make(12, 1, 1, 1, 1, 1, 1));
    CHECK(pf.of(Dim::R) == std::vector<std::int64_t>{2, 2, 3});
    pf = factorize(LayerDims::make(1, 1, 1, 1, 1, 1, 1));
    CHECK(total_factor_count(pf) == 0);
}

TEST_CASE("large primes are padded to the next smooth bound") {
    auto pf = factorize(LayerDims::make(1, 1, 1, 1, 13, 1, 1));
    CHECK(pf.padded[Dim::C] == 14);
    CHECK(pf.of(Dim::C) == std::vector<std::int64_t>{2, 7});
    CHECK(pf.is_padded(Dim::C));
    CHECK_FALSE(pf.is_padded(Dim::K));

    pf = factorize(LayerDims::make(1, 1, 1, 1, 13, 1, 1), PaddingPolicy::none());
    CHECK(pf.padded[Dim::C] == 13);
    CHECK(pf.of(Dim::C) == std::vector<std::int64_t>{13});
}

TEST_CASE("listing layer has fourteen factors") {
    const auto pf = factorize(LayerDims::make(3, 3, 28, 28, 8, 4, 3));
    CHECK(total_factor_count(pf) == 14);
    CHECK(pf.of(Dim::P) == std::vector<std::int64_t>{2, 2, 7});
}

TEST_CASE("factor lists reproduce padded bounds") {
    for (std::int64_t b = 1; b <= 2000; ++b) {
        const auto pf = factorize(LayerDims::make(b, 1, 1, 1, 1, 1, 1));
        REQUIRE(pf.padded[Dim::R] == oracle_pad(b, 7));
        REQUIRE(product(pf.of(Dim::R)) == pf.padded[Dim::R]);
        for (std::size_t i = 0; i < pf.of(Dim::R).size(); ++i) {
            const auto f = pf.of(Dim::R)[i];
            REQUIRE(is_prime(f));
            REQUIRE(f <= 7);
            REQUIRE(std::abs(pf.log2_factors[0][i] - std::log2(static_cast<double>(f))) <= 1e-12 * std::log2(f));
        }
    }
}

TEST_CASE("invalid layers are rejected") {
    CHECK_FALSE(LayerDims::make(0, 1, 1, 1, 1, 1, 1).valid());
    CHECK_FALSE(LayerDims::make(1, 1, 1, 1, 1, 1, 1, 0).valid());
    CHECK_THROWS_AS(factorize(LayerDims::make(1, 1, 1, -2, 1, 1, 1)), std::invalid_argument);
}

TEST_CASE("dimension letters round trip") {
    for (auto d : kAllDims) {
        Dim back;
        REQUIRE(parse_dim(dim_letter(d), back));
        CHECK(back == d);
    }
    Dim x;
    CHECK_FALSE(parse_dim('Z', x));
}
