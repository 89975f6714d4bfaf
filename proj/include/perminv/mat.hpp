#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace perminv {

/// Thrown when operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat row(std::span<const double> values);
  static Mat column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& values() const { return data_; }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Mat& m);

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C += A^T * B
void matmul_at_b_acc(const Mat& a, const Mat& b, Mat& c);
/// C += A * B^T
void matmul_a_bt_acc(const Mat& a, const Mat& b, Mat& c);

/// X W + b, with b (1 x h) broadcast to every row.
Mat affine_forward(const Mat& x, const Mat& w, const Mat& b);

enum class Activation { relu, leaky_relu, identity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation kind);

Mat activation_forward(const Mat& x, Activation kind, double slope = 0.01);

/// Numerically stable softmax over all entries (treated as a column).
std::vector<double> softmax_column(std::span<const double> y);

/// Max absolute elementwise difference; throws on shape mismatch.
double max_abs_diff(const Mat& a, const Mat& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace perminv
