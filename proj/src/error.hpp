#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fsel {

enum class ErrorCode : int {
    InvalidArgument = 1,
    Parse,
    Io,
    DuplicateId,
    Budget,
    DimMismatch,
    Degenerate,
    Provider,
    Validation,
    Diverged,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised when a class has fewer pool items than the requested shots.
class BudgetError : public Error {
public:
    BudgetError(int class_id, std::size_t count, std::size_t shots)
        : Error(ErrorCode::Budget, "class " + std::to_string(class_id) + " has " + std::to_string(count) +
                                       " pool items, fewer than the " + std::to_string(shots) +
                                       " shots requested"),
          class_id_(class_id),
          count_(count) {}
    int class_id() const noexcept { return class_id_; }
    std::size_t count() const noexcept { return count_; }

private:
    int class_id_;
    std::size_t count_;
};

// A provider failure attributable to one image of a batch.
class BatchItemError : public Error {
public:
    BatchItemError(ErrorCode code, std::size_t index, const std::string& what) : Error(code, what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace fsel
