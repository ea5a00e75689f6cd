#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssda {

// Dense row-major tensor. Shapes are explicit; there is no broadcasting
// machinery here, ops that need it implement it themselves.
template <typename T>
struct Tensor {
  std::vector<long> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), T(0));
  }

  Tensor(std::vector<long> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<long>(data.size()) != numel_of(shape))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static long numel_of(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<long> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  long numel() const { return static_cast<long>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  long dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T& operator[](long i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](long i) const { return data[static_cast<size_t>(i)]; }

  // Index helpers; bounds are the caller's responsibility.
  T& at(long i, long j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  const T& at(long i, long j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  T& at(long i, long j, long k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  const T& at(long i, long j, long k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T& at(long i, long j, long k, long l) {
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  const T& at(long i, long j, long k, long l) const {
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace ssda
