#include "gloredi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gloredi {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("grid shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw std::invalid_argument("grid extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Grid::Grid(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Grid::Grid(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("grid data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

void Grid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Grid Grid::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Grid(std::move(shape), data_);
}

void require_same_shape(const Grid& a, const Grid& b, std::string_view what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

Grid& Grid::operator+=(const Grid& other) {
  require_same_shape(*this, other, "grid +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Grid& Grid::operator-=(const Grid& other) {
  require_same_shape(*this, other, "grid -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Grid& Grid::operator*=(double scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

Grid& Grid::add_scaled(const Grid& other, double scale) {
  require_same_shape(*this, other, "grid add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
  return *this;
}

double Grid::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Grid::dot(const Grid& other) const {
  require_same_shape(*this, other, "grid dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
  return acc;
}

double Grid::l2_norm() const { return std::sqrt(dot(*this)); }

double Grid::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Grid::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Grid::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Grid::require_finite(std::string_view where) const {
  if (!all_finite()) throw NumericalError(std::string(where) + ": non-finite value");
}

Grid operator+(Grid lhs, const Grid& rhs) { return lhs += rhs; }
Grid operator-(Grid lhs, const Grid& rhs) { return lhs -= rhs; }
Grid operator*(Grid lhs, double scale) { return lhs *= scale; }
Grid operator*(double scale, Grid rhs) { return rhs *= scale; }

ComplexGrid::ComplexGrid(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), Complex{});
}

Grid concat_channels(const Grid& a, const Grid& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.extent(0) != b.extent(0) || a.extent(2) != b.extent(2) ||
      a.extent(3) != b.extent(3)) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + shape_string(a.shape()) +
                                " and " + shape_string(b.shape()));
  }
  const std::size_t n = a.extent(0), ca = a.extent(1), cb = b.extent(1);
  const std::size_t plane = a.extent(2) * a.extent(3);
  Grid out({n, ca + cb, a.extent(2), a.extent(3)});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.data() + s * ca * plane, ca * plane, out.data() + s * (ca + cb) * plane);
    std::copy_n(b.data() + s * cb * plane, cb * plane, out.data() + (s * (ca + cb) + ca) * plane);
  }
  return out;
}

std::pair<Grid, Grid> split_channels(const Grid& x, std::size_t first_channels) {
  if (x.rank() != 4 || first_channels == 0 || first_channels >= x.extent(1)) {
    throw std::invalid_argument("split_channels: cannot split " + shape_string(x.shape()) + " at " +
                                std::to_string(first_channels));
  }
  const std::size_t n = x.extent(0), c = x.extent(1), rest = c - first_channels;
  const std::size_t plane = x.extent(2) * x.extent(3);
  Grid a({n, first_channels, x.extent(2), x.extent(3)});
  Grid b({n, rest, x.extent(2), x.extent(3)});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(x.data() + s * c * plane, first_channels * plane, a.data() + s * first_channels * plane);
    std::copy_n(x.data() + (s * c + first_channels) * plane, rest * plane, b.data() + s * rest * plane);
  }
  return {std::move(a), std::move(b)};
}

Grid take_sample(const Grid& batch, std::size_t n) {
  if (batch.rank() != 4 || n >= batch.extent(0)) {
    throw std::invalid_argument("take_sample: index out of range for " + shape_string(batch.shape()));
  }
  Shape shape(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t count = shape_size(shape);
  return Grid(shape, std::vector<double>(batch.data() + n * count, batch.data() + (n + 1) * count));
}

Grid stack(std::span<const Grid> items) {
  if (items.empty()) throw std::invalid_argument("stack: no items");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  Grid out(shape);
  const std::size_t count = items[0].size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    require_same_shape(items[0], items[i], "stack");
    std::copy_n(items[i].data(), count, out.data() + i * count);
  }
  return out;
}

}  // namespace gloredi
