#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace numgen {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero counts, undersized glyphs, zero-area boxes and similar.
struct DegenerateInput : Error {
    using Error::Error;
};

struct CapacityError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

// Raised when an object exhausts its placement attempts.
class PlacementFailure : public Error {
public:
    PlacementFailure(std::size_t object_index, std::size_t attempts)
        : Error("placement failed for object " + std::to_string(object_index) + " after " +
                std::to_string(attempts) + " attempts"),
          object_index_(object_index) {}

    std::size_t object_index() const noexcept { return object_index_; }

private:
    std::size_t object_index_;
};

} // namespace numgen
