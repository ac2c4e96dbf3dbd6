#pragma once

#include <stdexcept>
#include <string>

namespace iontrap {

/// Bad user input: malformed files, out-of-range options.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Electrode layout that cannot be meshed or solved (non-positive
/// dimensions, overlapping panels, degenerate rectangles).
class InvalidGeometry : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// The boundary-element system could not be solved to the required accuracy.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A search (rf null, saddle) found nothing usable in its region.
class SearchFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NullNotFound : public SearchFailure {
 public:
  using SearchFailure::SearchFailure;
};

class AmbiguousNull : public SearchFailure {
 public:
  using SearchFailure::SearchFailure;
};

/// A least-squares fit whose design matrix is rank deficient.
class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iontrap
