#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgestereo/common.hpp"

namespace edgestereo {

// Dense N-dimensional array. Image-like data uses [batch, channels, height,
// width]. Default precision is f32; gradient checking runs in f64.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<int> shape, DType dt) : shape_(std::move(shape)), dtype_(dt) {
    const std::int64_t n = numel_of(shape_);
    if (dt == DType::F32)
      f32_.assign(static_cast<std::size_t>(n), 0.0f);
    else
      f64_.assign(static_cast<std::size_t>(n), 0.0);
  }

  static Tensor zeros(std::vector<int> shape, DType dt) { return Tensor(std::move(shape), dt); }

  static Tensor full(std::vector<int> shape, double v, DType dt) {
    Tensor t(std::move(shape), dt);
    t.fill(v);
    return t;
  }

  static Tensor from_values(std::vector<int> shape, const std::vector<double>& vals, DType dt) {
    Tensor t(std::move(shape), dt);
    check(static_cast<std::int64_t>(vals.size()) == t.numel(),
          "Tensor::from_values: value count does not match shape");
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, vals[static_cast<std::size_t>(i)]);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  DType dtype() const { return dtype_; }

  std::int64_t numel() const { return defined() ? numel_of(shape_) : 0; }

  // A default-constructed Tensor is undefined; every real tensor has rank >= 1
  // (scalars use shape {1}).
  bool defined() const { return !shape_.empty(); }

  template <typename T>
  std::span<T> data() {
    if constexpr (std::is_same_v<T, float>)
      return std::span<T>(f32_);
    else
      return std::span<T>(f64_);
  }

  template <typename T>
  std::span<const T> data() const {
    if constexpr (std::is_same_v<T, float>)
      return std::span<const T>(f32_);
    else
      return std::span<const T>(f64_);
  }

  // Element access through runtime dispatch; convenience for tests and glue,
  // kernels use typed spans.
  double get(std::int64_t i) const {
    return dtype_ == DType::F32 ? static_cast<double>(f32_[static_cast<std::size_t>(i)])
                                : f64_[static_cast<std::size_t>(i)];
  }

  void set(std::int64_t i, double v) {
    if (dtype_ == DType::F32)
      f32_[static_cast<std::size_t>(i)] = static_cast<float>(v);
    else
      f64_[static_cast<std::size_t>(i)] = v;
  }

  // 4-d accessor for [B,C,H,W] tensors.
  double at4(int b, int c, int y, int x) const {
    return get(offset4(b, c, y, x));
  }

  std::int64_t offset4(int b, int c, int y, int x) const {
    return ((static_cast<std::int64_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x;
  }

  void fill(double v) {
    dispatch(dtype_, [&]<typename T>() {
      for (auto& e : data<T>()) e = static_cast<T>(v);
    });
  }

  void add_(const Tensor& other) {
    check(same_shape(other) && dtype_ == other.dtype_, "Tensor::add_: shape or dtype mismatch");
    dispatch(dtype_, [&]<typename T>() {
      auto a = data<T>();
      auto b = other.data<T>();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    });
  }

  void scale_(double s) {
    dispatch(dtype_, [&]<typename T>() {
      for (auto& e : data<T>()) e *= static_cast<T>(s);
    });
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    bool ok = true;
    dispatch(dtype_, [&]<typename T>() {
      for (auto e : data<T>())
        if (!std::isfinite(e)) {
          ok = false;
          break;
        }
    });
    return ok;
  }

  bool bitwise_equal(const Tensor& other) const {
    if (!same_shape(other) || dtype_ != other.dtype_) return false;
    bool eq = true;
    dispatch(dtype_, [&]<typename T>() {
      auto a = data<T>();
      auto b = other.data<T>();
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i] || std::signbit(a[i]) != std::signbit(b[i])) {
          eq = false;
          break;
        }
    });
    return eq;
  }

  Tensor astype(DType dt) const {
    if (dt == dtype_) return *this;
    Tensor out(shape_, dt);
    for (std::int64_t i = 0; i < numel(); ++i) out.set(i, get(i));
    return out;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  static std::int64_t numel_of(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
      check(e >= 0, "Tensor: negative extent");
      n *= e;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  DType dtype_ = DType::F32;
  std::vector<float> f32_;
  std::vector<double> f64_;
};

}  // namespace edgestereo
