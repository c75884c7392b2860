#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace prospect {

/// Machine-readable error categories. The CLI maps these to `E_*` codes.
enum class ErrorCode {
    parse,
    invalid_input,
    dimension_mismatch,
    row_not_stochastic,
    non_finite_reward,
    numeric_overflow,
    underflow,
    not_converged,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::parse: return "E_PARSE";
    case ErrorCode::invalid_input: return "E_INPUT";
    case ErrorCode::dimension_mismatch: return "E_DIMENSION";
    case ErrorCode::row_not_stochastic: return "E_ROW_NOT_STOCHASTIC";
    case ErrorCode::non_finite_reward: return "E_NONFINITE_REWARD";
    case ErrorCode::numeric_overflow: return "E_OVERFLOW";
    case ErrorCode::underflow: return "E_UNDERFLOW";
    case ErrorCode::not_converged: return "E_NOCONV";
    }
    return "E_UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Unreadable or malformed input document.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(ErrorCode::parse, message) {}
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& message)
        : Error(ErrorCode::invalid_input, message) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& message)
        : Error(ErrorCode::dimension_mismatch, message) {}
};

class RowNotStochastic : public Error {
public:
    RowNotStochastic(std::size_t state, std::size_t action, double sum)
        : Error(ErrorCode::row_not_stochastic,
                "transition row (" + std::to_string(state) + ", " + std::to_string(action) +
                    ") is not stochastic: sum = " + std::to_string(sum)),
          state_(state), action_(action), sum_(sum) {}

    std::size_t state() const noexcept { return state_; }
    std::size_t action() const noexcept { return action_; }
    double sum() const noexcept { return sum_; }

private:
    std::size_t state_;
    std::size_t action_;
    double sum_;
};

class NonFiniteReward : public Error {
public:
    NonFiniteReward(std::size_t state, std::size_t action)
        : Error(ErrorCode::non_finite_reward,
                "reward (" + std::to_string(state) + ", " + std::to_string(action) +
                    ") is not finite"),
          state_(state), action_(action) {}

    std::size_t state() const noexcept { return state_; }
    std::size_t action() const noexcept { return action_; }

private:
    std::size_t state_;
    std::size_t action_;
};

class NumericOverflow : public Error {
public:
    explicit NumericOverflow(const std::string& message)
        : Error(ErrorCode::numeric_overflow, message) {}
};

class Underflow : public Error {
public:
    explicit Underflow(const std::string& message) : Error(ErrorCode::underflow, message) {}
};

/// Thrown by iterative routines that return a bare value; carries the last iterate.
template <class Partial>
class NotConverged : public Error {
public:
    NotConverged(const std::string& message, Partial partial)
        : Error(ErrorCode::not_converged, message), partial_(std::move(partial)) {}

    const Partial& partial() const noexcept { return partial_; }

private:
    Partial partial_;
};

} // namespace prospect
