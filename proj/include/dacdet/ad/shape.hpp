#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace dacdet::ad {

/// Ordered list of positive extents, rank 1 to 4. Row-major, dim 0 outermost.
class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<int64_t> dims);
  explicit Shape(std::vector<int64_t> dims);

  std::size_t rank() const { return dims_.size(); }
  int64_t operator[](std::size_t i) const { return dims_[i]; }
  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t numel() const;
  std::string to_string() const;

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  void validate() const;

  std::vector<int64_t> dims_;
};

}  // namespace dacdet::ad
