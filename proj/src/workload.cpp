#include "cosa/workload.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cosa {

char dim_letter(Dim d) {
    static constexpr char kLetters[] = {'R', 'S', 'P', 'Q', 'C', 'K', 'N'};
    return kLetters[static_cast<int>(d)];
}

bool parse_dim(char c, Dim& out) {
    switch (c) {
        case 'R': case 'r': out = Dim::R; return true;
        case 'S': case 's': out = Dim::S; return true;
        case 'P': case 'p': out = Dim::P; return true;
        case 'Q': case 'q': out = Dim::Q; return true;
        case 'C': case 'c': out = Dim::C; return true;
        case 'K': case 'k': out = Dim::K; return true;
        case 'N': case 'n': out = Dim::N; return true;
        default: return false;
    }
}

LayerDims LayerDims::make(std::int64_t r, std::int64_t s, std::int64_t p, std::int64_t q,
                          std::int64_t c, std::int64_t k, std::int64_t n,
                          std::int64_t stride) {
    LayerDims d;
    d.bounds = {r, s, p, q, c, k, n};
    d.stride = stride;
    return d;
}

bool LayerDims::valid() const {
    for (auto b : bounds) {
        if (b < 1) return false;
    }
    return stride >= 1;
}

std::string LayerDims::to_string() const {
    std::ostringstream os;
    for (int j = 0; j < kNumDims; ++j) {
        os << dim_letter(static_cast<Dim>(j)) << '=' << bounds[j] << ' ';
    }
    os << "stride=" << stride;
    return os.str();
}

std::vector<std::int64_t> prime_factors(std::int64_t value) {
    std::vector<std::int64_t> out;
    for (std::int64_t p = 2; p * p <= value; ++p) {
        while (value % p == 0) {
            out.push_back(p);
            value /= p;
        }
    }
    if (value > 1) out.push_back(value);
    return out;
}

bool is_prime(std::int64_t value) {
    if (value < 2) return false;
    for (std::int64_t p = 2; p * p <= value; ++p) {
        if (value % p == 0) return false;
    }
    return true;
}

std::int64_t largest_prime_factor(std::int64_t value) {
    auto f = prime_factors(value);
    return f.empty() ? 1 : f.back();
}

PrimeFactorization factorize(const LayerDims& dims, const PaddingPolicy& policy) {
    if (!dims.valid()) throw std::invalid_argument("factorize: invalid layer " + dims.to_string());
    if (policy.max_prime < 0 || policy.max_prime == 1)
        throw std::invalid_argument("factorize: max_prime must be 0 (no padding) or >= 2");
    PrimeFactorization pf;
    pf.original = dims;
    pf.padded = dims;
    for (int j = 0; j < kNumDims; ++j) {
        std::int64_t bound = dims.bounds[j];
        if (policy.max_prime > 0) {
            // Smooth numbers are dense enough that this terminates quickly.
            while (largest_prime_factor(bound) > policy.max_prime) ++bound;
        }
        pf.padded.bounds[j] = bound;
        pf.factors[j] = prime_factors(bound);
        for (auto f : pf.factors[j]) pf.log2_factors[j].push_back(std::log2(static_cast<double>(f)));
    }
    return pf;
}

std::size_t total_factor_count(const PrimeFactorization& pf) {
    std::size_t n = 0;
    for (const auto& f : pf.factors) n += f.size();
    return n;
}

}  // namespace cosa
