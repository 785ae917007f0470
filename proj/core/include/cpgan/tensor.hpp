#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpgan {

/// 64-byte-aligned storage. Vectorized kernels peel loops differently per
/// address alignment; pinning every buffer to one alignment keeps results
/// bitwise reproducible across allocations within one process.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlign)); }

  template <typename U>
  struct rebind {
    using other = AlignedAllocator<U>;
  };
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
  friend bool operator!=(const AlignedAllocator&, const AlignedAllocator&) { return false; }
};

/// Dense row-major tensor over a contiguous buffer. 4-D tensors follow the
/// NCHW convention; 2-D tensors are (rows, cols). No views, no striding --
/// every tensor owns its storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) { resize(std::move(shape)); }

  Tensor(std::initializer_list<int> shape) { resize(std::vector<int>(shape)); }

  static Tensor zeros(std::vector<int> shape) {
    Tensor t(std::move(shape));
    t.fill(T(0));
    return t;
  }

  void resize(std::vector<int> shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    shape_ = std::move(shape);
    data_.resize(static_cast<std::size_t>(n));
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int numel() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  /// NCHW element access.
  T& at(int n, int c, int h, int w) {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  const T& at(int n, int c, int h, int w) const {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }

  /// CHW element access.
  T& at(int c, int h, int w) {
    return data_[static_cast<std::size_t>((c * dim(1) + h) * dim(2) + w)];
  }
  const T& at(int c, int h, int w) const {
    return data_[static_cast<std::size_t>((c * dim(1) + h) * dim(2) + w)];
  }

  /// 2-D element access.
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r * dim(1) + c)]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r * dim(1) + c)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Reinterprets the buffer under a new shape with the same element count.
  void reshape(std::vector<int> shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != numel()) throw std::invalid_argument("Tensor::reshape: element count mismatch");
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  std::string shape_str() const { return shape_str(shape_); }

  static std::string shape_str(const std::vector<int>& s) {
    std::string r = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
      r += std::to_string(s[i]);
      if (i + 1 < s.size()) r += ",";
    }
    return r + ")";
  }

 private:
  std::vector<int> shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (int i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(static_cast<double>(t[i]))) return false;
  }
  return true;
}

}  // namespace cpgan
