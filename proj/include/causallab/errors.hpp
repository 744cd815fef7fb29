#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace causallab {

/// A value failed one of its type invariants (non-negativity, sum-to-one,
/// shape consistency, ...). The message names the violated invariant.
class InvariantError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An operation hit a boundary of the simplex where it is undefined:
/// a zero marginal entry ("degenerate marginal"), a zero conditioning
/// entry ("undefined conditional") or a divergent density ("boundary
/// evaluation").
class DegenerateError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Malformed input file. `record()` is the zero-based record (line) index
/// at which parsing failed.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t record)
        : std::runtime_error(what + " (record " + std::to_string(record) + ")"),
          record_(record) {}

    std::size_t record() const noexcept { return record_; }

  private:
    std::size_t record_;
};

} // namespace causallab
