#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace biobo {

using GeneId = std::string;

/// Malformed input file (CSV, GMT, TOML). The message carries file:line:column.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& what);
    ParseError(const std::string& file, const std::string& what);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string file_;
    std::size_t line_ = 0;
    std::size_t column_ = 0;
};

/// Inconsistent data: duplicate ids, empty intersections, misaligned inputs.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization failure or non-finite training loss.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Number of items in the top `fraction` of `n`: ceil(fraction * n), at least 1.
/// A small tolerance keeps products like 0.07 * 100 from rounding up to 8.
inline std::size_t ceil_count(double fraction, std::size_t n) {
    if (n == 0) return 0;
    const double raw = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return k;
}

/// Mixes a base seed with a stream tag and index (splitmix64 finalizer), so each
/// consumer of randomness gets an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept;

/// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
    initial_design = 1,
    acquisition = 2,
    surrogate = 3,
    random_policy = 4,
    split = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept {
    return derive_seed(seed, static_cast<std::uint64_t>(stream), index);
}

/// Indices of the k largest values, ordered by value descending; equal values
/// are ordered by ascending key (`keys[i]`, compared lexicographically).
std::vector<std::size_t> top_k_indices(const std::vector<double>& values, const std::vector<GeneId>& keys,
                                       std::size_t k);

/// 64-bit FNV-1a, used for stable config/spec hashes in output files.
std::uint64_t fnv1a64(const std::string& text) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace biobo
