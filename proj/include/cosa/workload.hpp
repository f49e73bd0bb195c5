#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cosa {

/// Loop dimensions of a convolution nest, in canonical order.
enum class Dim : int { R = 0, S, P, Q, C, K, N };

inline constexpr int kNumDims = 7;
inline constexpr std::array<Dim, kNumDims> kAllDims = {Dim::R, Dim::S, Dim::P, Dim::Q,
                                                      Dim::C, Dim::K, Dim::N};

char dim_letter(Dim d);  // 'R', 'S', ...
bool parse_dim(char c, Dim& out);

/// Seven loop bounds of a DNN layer. Stride only affects input-tile sizing.
struct LayerDims {
    std::array<std::int64_t, kNumDims> bounds{1, 1, 1, 1, 1, 1, 1};
    std::int64_t stride = 1;

    static LayerDims make(std::int64_t r, std::int64_t s, std::int64_t p, std::int64_t q,
                          std::int64_t c, std::int64_t k, std::int64_t n,
                          std::int64_t stride = 1);

    std::int64_t operator[](Dim d) const { return bounds[static_cast<int>(d)]; }
    std::int64_t& operator[](Dim d) { return bounds[static_cast<int>(d)]; }

    bool valid() const;
    std::string to_string() const;  // "R=3 S=1 ... stride=1"

    friend bool operator==(const LayerDims&, const LayerDims&) = default;
};

struct PaddingPolicy {
    /// Largest prime allowed in a factor list; bounds with a larger prime
    /// factor are padded up. Zero means no padding.
    std::int64_t max_prime = 7;

    static PaddingPolicy none() { return PaddingPolicy{0}; }
};

/// Prime-factor decomposition of the (possibly padded) loop bounds.
/// Unit dimensions have empty factor lists.
struct PrimeFactorization {
    LayerDims original;
    LayerDims padded;
    std::array<std::vector<std::int64_t>, kNumDims> factors;
    std::array<std::vector<double>, kNumDims> log2_factors;

    const std::vector<std::int64_t>& of(Dim d) const { return factors[static_cast<int>(d)]; }
    bool is_padded(Dim d) const { return padded[d] != original[d]; }
};

PrimeFactorization factorize(const LayerDims& dims, const PaddingPolicy& policy = {});

std::size_t total_factor_count(const PrimeFactorization& pf);

// Helpers shared with the padding oracle in the tests.
std::vector<std::int64_t> prime_factors(std::int64_t value);
bool is_prime(std::int64_t value);
std::int64_t largest_prime_factor(std::int64_t value);

}  // namespace cosa
