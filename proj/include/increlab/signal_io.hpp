#pragma once

#include "increlab/signal.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace increlab {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `t,<names...>` followed by one row per sample. Lines in `comments`
/// are emitted first, each prefixed with "# ".
void write_csv(std::ostream& os, const Signal& s, const std::vector<std::string>& column_names = {},
               const std::vector<std::string>& comments = {});

/// Reads a signal written by write_csv. Lines starting with '#' are skipped.
/// The time column must start at 0 and be uniform to 1e-9 relative.
Signal read_csv(std::istream& is);

}  // namespace increlab
