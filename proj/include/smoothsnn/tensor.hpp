#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace smoothsnn {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array. `Real` is float for training and double when the
/// engine runs in check mode.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  /// Builds a rows x cols matrix from nested braces.
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);
  static Tensor vector(std::initializer_list<Real> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  const std::vector<Real>& values() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const Real& at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  Real& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const Real& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Copy of the sub-tensor at `index` along the leading axis.
  Tensor slice(std::size_t index) const;
  /// Writes `part` into position `index` along the leading axis.
  void set_slice(std::size_t index, const Tensor& part);

  Tensor reshaped(Shape shape) const;

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

/// Throws DimensionError naming `what` and both shapes unless they agree.
template <typename Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b,
                        const char* what);

/// Standard matrix product. Each output accumulates over the inner index in
/// ascending order, so results are bitwise reproducible.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& m);

/// Row-wise softmax of x / temperature with max subtraction.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x, double temperature);

/// Row-wise log-softmax of x / temperature.
template <typename Real>
Tensor<Real> log_softmax_rows(const Tensor<Real>& x, double temperature);

// Elementwise helpers used across modules.
template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor);
/// a += factor * b
template <typename Real>
void axpy(Tensor<Real>& a, Real factor, const Tensor<Real>& b);

template <typename Real>
bool all_finite(const Tensor<Real>& t);

}  // namespace smoothsnn
