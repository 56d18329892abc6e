#include "rnnopt/linalg.hpp"

#include <cmath>

namespace rnnopt {

namespace {

void require_same_length(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                         shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) {
      throw DimensionError("Matrix: ragged initializer");
    }
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw DimensionError("matvec: matrix " + m.shape_string() + " cannot multiply vector of length " +
                         std::to_string(v.size()));
  }
  Vector out(m.rows());
  const auto a = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = a.data() + r * m.cols();
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) sum += row[c] * v[c];
    out[r] = sum;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
  if (m.rows() != v.size()) {
    throw DimensionError("matvec_transposed: matrix " + m.shape_string() +
                         " cannot multiply vector of length " + std::to_string(v.size()));
  }
  Vector out(m.cols());
  const auto a = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = a.data() + r * m.cols();
    const double k = v[r];
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * k;
  }
  return out;
}

void add_outer(Matrix& acc, const Vector& left, const Vector& right) {
  if (acc.rows() != left.size() || acc.cols() != right.size()) {
    throw DimensionError("add_outer: accumulator " + acc.shape_string() + " vs outer " +
                         std::to_string(left.size()) + "x" + std::to_string(right.size()));
  }
  auto a = acc.values();
  for (std::size_t r = 0; r < acc.rows(); ++r) {
    double* row = a.data() + r * acc.cols();
    const double k = left[r];
    for (std::size_t c = 0; c < acc.cols(); ++c) row[c] += k * right[c];
  }
}

Vector operator+(const Vector& a, const Vector& b) {
  require_same_length(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector operator-(const Vector& a, const Vector& b) {
  require_same_length(a, b, "subtract");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_length(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector scale(const Vector& v, double k) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * k;
  return out;
}

void add_inplace(Vector& acc, const Vector& v) {
  require_same_length(acc, v, "add_inplace");
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

Vector concat(const Vector& a, const Vector& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.raw().begin(), a.raw().end());
  out.insert(out.end(), b.raw().begin(), b.raw().end());
  return Vector(std::move(out));
}

Vector slice(const Vector& v, std::size_t begin, std::size_t len) {
  if (begin + len > v.size()) {
    throw DimensionError("slice: [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                         ") out of range for length " + std::to_string(v.size()));
  }
  return Vector(std::vector<double>(v.raw().begin() + static_cast<std::ptrdiff_t>(begin),
                                    v.raw().begin() + static_cast<std::ptrdiff_t>(begin + len)));
}

double sigmoid(double x) {
  // Branch on sign so exp() never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector tanh_v(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

bool all_finite(std::span<const double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

Matrix init_uniform(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("init_uniform: scale must be > 0");
  }
  Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.uniform(-scale, scale);
  return m;
}

}  // namespace rnnopt
