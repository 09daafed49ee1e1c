#ifndef CMOTION_ERRORS_HPP
#define CMOTION_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmotion {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- expression errors ----

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, const std::string& expected, const std::string& found)
        : Error("syntax error at position " + std::to_string(position) + ": expected " +
                expected + ", found " + found),
          position_(position), expected_(expected) {}
    std::size_t position() const { return position_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class UnknownSymbol : public Error {
public:
    explicit UnknownSymbol(const std::string& symbol)
        : Error("unknown symbol: " + symbol), symbol_(symbol) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class NonIntegerExponent : public Error {
public:
    explicit NonIntegerExponent(const std::string& what)
        : Error("non-integer exponent: " + what) {}
};

class UnboundVariable : public Error {
public:
    explicit UnboundVariable(const std::string& symbol)
        : Error("unbound variable: " + symbol), symbol_(symbol) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain error: " + what) {}
};

class Overflow : public Error {
public:
    explicit Overflow(const std::string& what) : Error("arithmetic overflow: " + what) {}
};

/// Probabilistic zero test (or sampling loop) could not reach a verdict.
class Undecidable : public Error {
public:
    explicit Undecidable(const std::string& what) : Error("undecidable: " + what) {}
};

/// Precondition violation on a public operation.
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid argument: " + what) {}
};

// ---- problem model errors ----

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what)
        : Error("dimension mismatch: " + what) {}
};

class ForbiddenSymbol : public Error {
public:
    explicit ForbiddenSymbol(const std::string& what) : Error("forbidden symbol: " + what) {}
};

class BadHorizon : public Error {
public:
    explicit BadHorizon(const std::string& what) : Error("bad horizon: " + what) {}
};

class BadPsi0 : public Error {
public:
    explicit BadPsi0(const std::string& what) : Error("bad psi0: " + what) {}
};

/// Stationarity system is not uniquely solvable in the controls.
class NotSolvable : public Error {
public:
    explicit NotSolvable(const std::string& what) : Error("not solvable: " + what) {}
};

/// Stationary point of H in u fails the maximality (concavity) check.
class NotConcave : public Error {
public:
    explicit NotConcave(const std::string& what) : Error("not concave: " + what) {}
};

/// Box control sets are parsed but symbolic elimination does not support them.
class BoxControlUnsupported : public Error {
public:
    BoxControlUnsupported()
        : Error("box control sets are not supported by symbolic control elimination") {}
};

// ---- integration errors ----

class StepSizeUnderflow : public Error {
public:
    explicit StepSizeUnderflow(double last_good_time)
        : Error("step size underflow near t = " + std::to_string(last_good_time)),
          last_good_time_(last_good_time) {}
    double last_good_time() const { return last_good_time_; }

private:
    double last_good_time_;
};

class NonFiniteState : public Error {
public:
    explicit NonFiniteState(double time)
        : Error("non-finite state at t = " + std::to_string(time)), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

// ---- discovery errors ----

class EmptyBasis : public Error {
public:
    EmptyBasis() : Error("ansatz basis is empty") {}
};

// ---- problem file errors ----

class FileError : public Error {
public:
    FileError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

} // namespace cmotion

#endif
