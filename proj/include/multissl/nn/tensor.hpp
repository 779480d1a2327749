#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace multissl::nn {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major float64 array.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<size_t>(i < 0 ? rank() + i : i)); }
  bool empty() const { return data.empty(); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool operator==(const Tensor&) const = default;
};

/// Throws multissl::Error naming both shapes when they differ.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace multissl::nn
