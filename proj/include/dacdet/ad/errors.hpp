#pragma once

#include <stdexcept>
#include <string>

namespace dacdet::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside an op's mathematical domain (log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Cosine similarity requested for a zero-norm embedding.
class ZeroNormError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dacdet::ad
