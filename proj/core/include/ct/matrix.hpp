#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ct {

// Dense row-major matrix of doubles. Deliberately minimal: the solvers in
// this library only need row access and element indexing.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix gather_rows(const Matrix& m, std::span<const int> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = m.row(static_cast<std::size_t>(indices[r]));
    auto dst = out.row(r);
    for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (!top.empty() && !bottom.empty() && top.cols() != bottom.cols())
    throw std::invalid_argument("vstack: column counts differ");
  const std::size_t cols = top.empty() ? bottom.cols() : top.cols();
  Matrix out(top.rows() + bottom.rows(), cols);
  for (std::size_t i = 0; i < top.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = top(i, j);
  for (std::size_t i = 0; i < bottom.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out(top.rows() + i, j) = bottom(i, j);
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const int> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace ct
