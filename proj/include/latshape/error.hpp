#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace latshape {

// Machine-readable error categories; the CLI reports `code()` verbatim.
enum class Errc {
    dimension,
    singular,
    normalization,
    factorization,
    range,
    construction,
    schema,
    overlap,
    infeasible,
    solver,
    rank_deficient,
    degenerate,
    config,
    io,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::dimension: return "dimension";
        case Errc::singular: return "singular";
        case Errc::normalization: return "normalization";
        case Errc::factorization: return "factorization";
        case Errc::range: return "range";
        case Errc::construction: return "construction";
        case Errc::schema: return "schema";
        case Errc::overlap: return "overlap";
        case Errc::infeasible: return "infeasible";
        case Errc::solver: return "solver";
        case Errc::rank_deficient: return "rank_deficient";
        case Errc::degenerate: return "degenerate";
        case Errc::config: return "config";
        case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }
    const char* code_name() const noexcept { return errc_name(code_); }

private:
    Errc code_;
};

// Range violation that remembers which element was out of range.
class RangeError : public Error {
public:
    RangeError(std::size_t index, const std::string& what) : Error(Errc::range, what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace latshape
