#pragma once

#include <stdexcept>
#include <string>

namespace graphbm {

// Malformed input files or CLI arguments.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated structural invariants (bad graph data, bad vertex data,
// inadmissible operation arguments).
class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure after retries (e.g. singular boundary system).
class SolveError : public std::runtime_error {
public:
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace graphbm
