#ifndef KAH_CORE_HPP
#define KAH_CORE_HPP

#include <stdexcept>
#include <string>

namespace kah {

/// Ids into a session's variable table and a signature's symbol table.
using VarId = int;
using SymId = int;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input at the API level: wrong theory, wrong fragment, arity
/// mismatch, unknown name.
struct UsageError : Error {
    using Error::Error;
};

/// A structural problem in a term or expression (arity violation, unbound
/// recursion variable).
struct StructureError : Error {
    using Error::Error;
};

/// Operation not available for the configured theory (e.g. parallel star
/// over a plain monoid, custom theory without a normaliser).
struct TheoryError : Error {
    using Error::Error;
};

/// Expression falls outside the fragment required by an operation.
struct FragmentError : Error {
    using Error::Error;
};

/// A configurable resource cap was hit (e.g. tree determinisation budget).
struct ResourceError : Error {
    using Error::Error;
};

struct ParseError : Error {
    int line;
    int column;
    ParseError(const std::string& msg, int line_, int col_)
        : Error(msg + " (line " + std::to_string(line_) + ", column " +
                std::to_string(col_) + ")"),
          line(line_), column(col_) {}
};

} // namespace kah

#endif
