#ifndef EEGROAR_TENSOR_HPP
#define EEGROAR_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eegroar {

using Real = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense n-dimensional array over a flat row-major buffer. Rank is dynamic;
/// matrix/vector views into the buffer are exposed as Eigen maps so the
/// numeric kernels can stay expression-based.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_ = Storage::Zero(count(shape_));
  }

  Tensor(Shape shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("tensor data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " +
                                  shape_to_string(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar v) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = Storage::Constant(count(t.shape_), v);
    return t;
  }

  static Tensor from_values(Shape shape, std::initializer_list<Scalar> v) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.resize(static_cast<Index>(v.size()));
    Index i = 0;
    for (Scalar x : v) t.data_[i++] = x;
    if (t.data_.size() != count(t.shape_))
      throw std::invalid_argument("value list does not match shape " +
                                  shape_to_string(t.shape_));
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(axis); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator[](Index flat) { return data_[flat]; }
  Scalar operator[](Index flat) const { return data_[flat]; }

  template <typename... I>
  Scalar& operator()(I... idx) {
    return data_[flat_index(idx...)];
  }
  template <typename... I>
  Scalar operator()(I... idx) const {
    return data_[flat_index(idx...)];
  }

  template <typename... I>
  Index flat_index(I... idx) const {
    static_assert(sizeof...(I) >= 1);
    const Index ix[] = {static_cast<Index>(idx)...};
    const auto n = static_cast<Index>(sizeof...(I));
    if (n != rank()) throw std::invalid_argument("index rank mismatch");
    Index flat = 0;
    for (Index a = 0; a < n; ++a) flat = flat * shape_[a] + ix[a];
    return flat;
  }

  /// Same buffer, new extents. Total element count must be preserved.
  Tensor reshaped(Shape shape) const {
    if (count(shape) != size())
      throw std::invalid_argument("reshape from " + shape_to_string(shape_) +
                                  " to " + shape_to_string(shape) +
                                  " changes element count");
    return Tensor(std::move(shape), data_);
  }

  auto as_matrix(Index rows, Index cols) {
    if (rows * cols != size())
      throw std::invalid_argument("matrix view extent mismatch");
    return Eigen::Map<RowMatrix<Scalar>>(data_.data(), rows, cols);
  }
  auto as_matrix(Index rows, Index cols) const {
    if (rows * cols != size())
      throw std::invalid_argument("matrix view extent mismatch");
    return Eigen::Map<const RowMatrix<Scalar>>(data_.data(), rows, cols);
  }

  /// 2-D view using the trailing two extents (leading axes collapsed).
  auto as_matrix() {
    return as_matrix(size() / last_extent(), last_extent());
  }
  auto as_matrix() const {
    return as_matrix(size() / last_extent(), last_extent());
  }

  auto as_vector() {
    return Eigen::Map<Vector<Scalar>>(data_.data(), data_.size());
  }
  auto as_vector() const {
    return Eigen::Map<const Vector<Scalar>>(data_.data(), data_.size());
  }

  bool all_finite() const { return data_.isFinite().all(); }

  Scalar max_abs() const {
    return size() == 0 ? Scalar(0) : data_.abs().maxCoeff();
  }
  Scalar min() const { return data_.minCoeff(); }
  Scalar max() const { return data_.maxCoeff(); }
  Scalar sum() const { return data_.sum(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

  static Index count(const Shape& shape) {
    Index n = 1;
    for (Index e : shape) {
      if (e <= 0)
        throw std::invalid_argument("non-positive extent in shape " +
                                    shape_to_string(shape));
      n *= e;
    }
    return n;
  }

 private:
  Index last_extent() const {
    if (shape_.empty()) throw std::invalid_argument("rank-0 tensor view");
    return shape_.back();
  }

  Shape shape_;
  Storage data_;
};

using Tensord = Tensor<Real>;

template <typename Scalar>
Scalar dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot length mismatch");
  return (a.array() * b.array()).sum();
}

template <typename Scalar>
Scalar max_abs_difference(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("shape mismatch in max_abs_difference");
  return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace eegroar

#endif  // EEGROAR_TENSOR_HPP
