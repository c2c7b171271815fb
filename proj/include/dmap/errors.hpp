#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dmap {

// Base class for every error the toolkit throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parameter is outside its documented domain (non-positive factor,
// even window size, quantile outside (0,1), ...).
struct InvalidParameter : Error {
    using Error::Error;
};

// A value breaks a domain invariant. `index` identifies the offending
// element (point index, pixel index) when known, -1 otherwise.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg, std::int64_t index = -1)
        : Error(index >= 0 ? msg + " (index " + std::to_string(index) + ")" : msg),
          index(index) {}
    std::int64_t index;
};

// Malformed file contents. `offset` is the byte position of the defect.
struct FormatError : Error {
    FormatError(const std::string& msg, std::uint64_t offset)
        : Error(msg + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
    std::uint64_t offset;
};

// Paired inputs disagree in shape. `index` is the pair position in a batch,
// -1 for single-pair operations.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg, std::int64_t index = -1)
        : Error(index >= 0 ? msg + " (pair " + std::to_string(index) + ")" : msg),
          index(index) {}
    std::int64_t index;
};

// A rectangle or coordinate falls outside its frame.
struct BoundsError : Error {
    using Error::Error;
};

// More cluster centers requested than distinct points exist.
struct InfeasibleK : Error {
    InfeasibleK(long long k_, long long distinct_)
        : Error("requested " + std::to_string(k_) + " centers but only " +
                std::to_string(distinct_) + " distinct points exist"),
          k(k_), distinct(distinct_) {}
    long long k;
    long long distinct;
};

}  // namespace dmap
