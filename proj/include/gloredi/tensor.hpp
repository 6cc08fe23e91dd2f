#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gloredi {

using Shape = std::vector<std::size_t>;
using Complex = std::complex<double>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Raised when a computation produces NaN/Inf where finite values are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major grid of doubles with positive extents.
///
/// Used for images (H x W), sinograms (views x detectors), feature maps
/// (C x H x W) and batches (N x C x H x W). A default-constructed Grid is
/// empty (rank 0, no data) and only serves as a placeholder.
class Grid {
 public:
  Grid() = default;
  explicit Grid(Shape shape, double fill = 0.0);
  Grid(Shape shape, std::vector<double> data);

  static Grid zeros_like(const Grid& other) { return Grid(other.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double& at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
    return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }
  double at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) const {
    return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }

  void fill(double value);
  /// Same data, new shape of equal element count.
  Grid reshaped(Shape shape) const;

  Grid& operator+=(const Grid& other);
  Grid& operator-=(const Grid& other);
  Grid& operator*=(double scale);
  /// this += scale * other
  Grid& add_scaled(const Grid& other, double scale);

  double sum() const;
  double dot(const Grid& other) const;
  double l2_norm() const;
  double max_abs() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  /// Throws NumericalError naming `where` if any entry is NaN or Inf.
  void require_finite(std::string_view where) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Grid operator+(Grid lhs, const Grid& rhs);
Grid operator-(Grid lhs, const Grid& rhs);
Grid operator*(Grid lhs, double scale);
Grid operator*(double scale, Grid rhs);

void require_same_shape(const Grid& a, const Grid& b, std::string_view what);

/// Row-major complex grid. Half-spectrum layout for real transforms:
/// the last axis holds floor(W/2)+1 bins.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  explicit ComplexGrid(Shape shape);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<Complex> values() { return data_; }
  std::span<const Complex> values() const { return data_; }
  Complex* data() { return data_.data(); }
  const Complex* data() const { return data_.data(); }

  Complex& operator[](std::size_t i) { return data_[i]; }
  const Complex& operator[](std::size_t i) const { return data_[i]; }
  Complex& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const Complex& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

 private:
  Shape shape_;
  std::vector<Complex> data_;
};

// 4-D (N x C x H x W) helpers used by the layer engine.

/// Concatenates two batches along the channel axis.
Grid concat_channels(const Grid& a, const Grid& b);
/// Splits a batch along the channel axis at `first_channels`.
std::pair<Grid, Grid> split_channels(const Grid& x, std::size_t first_channels);
/// Copies sample `n` out of a 4-D batch as a C x H x W grid.
Grid take_sample(const Grid& batch, std::size_t n);
/// Stacks equally shaped grids into a new leading axis.
Grid stack(std::span<const Grid> items);

}  // namespace gloredi
