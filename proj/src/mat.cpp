#include "perminv/mat.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace perminv {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapC view(const Mat& m) { return MapC(m.data().data(), m.rows(), m.cols()); }
Map view(Mat& m) { return Map(m.data().data(), m.rows(), m.cols()); }

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Mat: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Mat: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Mat Mat::row(std::span<const double> values) {
  return Mat(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Mat Mat::column(std::span<const double> values) {
  return Mat(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Mat::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b));
  }
  Mat c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  view(c).noalias() = view(a) * view(b);
  return c;
}

void matmul_at_b_acc(const Mat& a, const Mat& b, Mat& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
    throw ShapeError("matmul_at_b: " + shape_string(a) + "^T * " + shape_string(b));
  }
  if (a.rows() == 0 || c.empty()) return;
  view(c).noalias() += view(a).transpose() * view(b);
}

void matmul_a_bt_acc(const Mat& a, const Mat& b, Mat& c) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
    throw ShapeError("matmul_a_bt: " + shape_string(a) + " * " + shape_string(b) + "^T");
  }
  if (a.cols() == 0 || c.empty()) return;
  view(c).noalias() += view(a) * view(b).transpose();
}

Mat affine_forward(const Mat& x, const Mat& w, const Mat& b) {
  if (x.cols() != w.rows()) {
    throw ShapeError("affine: input " + shape_string(x) + " vs weight " + shape_string(w));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("affine: bias " + shape_string(b) + " vs weight " + shape_string(w));
  }
  Mat out = matmul(x, w);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
  }
  return out;
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky_relu";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Mat activation_forward(const Mat& x, Activation kind, double slope) {
  Mat out = x;
  auto d = out.data();
  switch (kind) {
    case Activation::relu:
      for (double& v : d) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::leaky_relu:
      for (double& v : d) v = v >= 0.0 ? v : slope * v;
      break;
    case Activation::identity:
      break;
  }
  return out;
}

std::vector<double> softmax_column(std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("softmax_column: empty input");
  const double top = *std::max_element(y.begin(), y.end());
  std::vector<double> out(y.size());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = std::exp(y[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= worst)) worst = d;  // propagates NaN
  }
  return worst;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + shape_string(a) + " vs " + shape_string(b));
  }
  return max_abs_diff(a.data(), b.data());
}

}  // namespace perminv
