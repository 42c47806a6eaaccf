#include "smoothsnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "smoothsnn/errors.hpp"

namespace smoothsnn {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
  if (shape_.empty()) throw DimensionError("tensor shape must have rank >= 1");
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw DimensionError("tensor shape must have rank >= 1");
  if (shape_volume(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape_) +
                         " does not match " + std::to_string(data_.size()) +
                         " values");
  }
}

template <typename Real>
Tensor<Real> Tensor<Real>::matrix(
    std::initializer_list<std::initializer_list<Real>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<Real> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

template <typename Real>
Tensor<Real> Tensor<Real>::vector(std::initializer_list<Real> values) {
  return Tensor({values.size()}, std::vector<Real>(values));
}

template <typename Real>
Tensor<Real> Tensor<Real>::slice(std::size_t index) const {
  if (shape_.size() < 2 || index >= shape_[0]) {
    throw DimensionError("slice " + std::to_string(index) + " out of range for " +
                         shape_to_string(shape_));
  }
  Shape sub(shape_.begin() + 1, shape_.end());
  const std::size_t n = shape_volume(sub);
  std::vector<Real> data(data_.begin() + index * n,
                         data_.begin() + (index + 1) * n);
  return Tensor(std::move(sub), std::move(data));
}

template <typename Real>
void Tensor<Real>::set_slice(std::size_t index, const Tensor& part) {
  Shape sub(shape_.begin() + 1, shape_.end());
  if (index >= shape_[0] || part.shape() != sub) {
    throw DimensionError("cannot write " + shape_to_string(part.shape()) +
                         " into slice of " + shape_to_string(shape_));
  }
  std::copy(part.data_.begin(), part.data_.end(),
            data_.begin() + index * part.size());
}

template <typename Real>
Tensor<Real> Tensor<Real>::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

template <typename Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<Real> c({m, n});
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* pc = c.data().data();
  // i-k-j order: every c[i][j] still sums over k ascending from zero.
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = pc + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Real aik = pa[i * k + kk];
      const Real* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& m) {
  if (m.rank() != 2) {
    throw DimensionError("transpose expects a matrix, got " +
                         shape_to_string(m.shape()));
  }
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor<Real> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
  return out;
}

namespace {

template <typename Real>
void check_softmax_args(const Tensor<Real>& x, double temperature) {
  if (!(temperature > 0.0)) {
    throw ParameterError("softmax temperature must be > 0, got " +
                         std::to_string(temperature));
  }
  if (x.rank() != 2) {
    throw DimensionError("softmax_rows expects [n x C], got " +
                         shape_to_string(x.shape()));
  }
}

}  // namespace

template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x, double temperature) {
  check_softmax_args(x, temperature);
  const std::size_t n = x.dim(0), c = x.dim(1);
  const Real inv_t = Real(1.0 / temperature);
  Tensor<Real> out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    Real mx = x.at(i, 0) * inv_t;
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j) * inv_t);
    Real sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const Real e = std::exp(x.at(i, j) * inv_t - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= sum;
  }
  return out;
}

template <typename Real>
Tensor<Real> log_softmax_rows(const Tensor<Real>& x, double temperature) {
  check_softmax_args(x, temperature);
  const std::size_t n = x.dim(0), c = x.dim(1);
  const Real inv_t = Real(1.0 / temperature);
  Tensor<Real> out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    Real mx = x.at(i, 0) * inv_t;
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j) * inv_t);
    Real sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(x.at(i, j) * inv_t - mx);
    const Real log_z = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * inv_t - log_z;
  }
  return out;
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_same_shape(a, b, "add");
  Tensor<Real> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_same_shape(a, b, "sub");
  Tensor<Real> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_same_shape(a, b, "mul");
  Tensor<Real> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
  Tensor<Real> out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

template <typename Real>
void axpy(Tensor<Real>& a, Real factor, const Tensor<Real>& b) {
  require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += factor * b[i];
}

template <typename Real>
bool all_finite(const Tensor<Real>& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](Real v) { return std::isfinite(v); });
}

#define SMOOTHSNN_INSTANTIATE(Real)                                            \
  template class Tensor<Real>;                                                 \
  template void require_same_shape(const Tensor<Real>&, const Tensor<Real>&,   \
                                   const char*);                               \
  template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&);      \
  template Tensor<Real> transpose(const Tensor<Real>&);                        \
  template Tensor<Real> softmax_rows(const Tensor<Real>&, double);             \
  template Tensor<Real> log_softmax_rows(const Tensor<Real>&, double);         \
  template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);         \
  template Tensor<Real> sub(const Tensor<Real>&, const Tensor<Real>&);         \
  template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);         \
  template Tensor<Real> scale(const Tensor<Real>&, Real);                      \
  template void axpy(Tensor<Real>&, Real, const Tensor<Real>&);                \
  template bool all_finite(const Tensor<Real>&);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
