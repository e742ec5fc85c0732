#include "dacdet/ad/shape.hpp"

#include <sstream>

#include "dacdet/ad/errors.hpp"

namespace dacdet::ad {

Shape::Shape(std::initializer_list<int64_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() const {
  if (dims_.empty() || dims_.size() > 4) {
    throw ShapeError("shape rank must be in [1, 4], got " + std::to_string(dims_.size()));
  }
  for (int64_t d : dims_) {
    if (d < 1) throw ShapeError("shape extents must be >= 1, got " + to_string());
  }
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims_) n *= d;
  return n;
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace dacdet::ad
