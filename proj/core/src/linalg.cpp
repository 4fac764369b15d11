// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/linalg.hpp"

#include <cmath>
#include <string>

#include "imc/errors.hpp"

namespace imc {

namespace {
constexpr double kDegenerateNorm = 1e-20;
}

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m;
  m.rows_ = rows.size();
  m.cols_ = rows.size() ? rows.begin()->size() : 0;
  m.data_.reserve(m.rows_ * m.cols_);
  for (const auto& r : rows) {
    if (r.size() != m.cols_) {
      throw InvalidShapeError("from_rows: ragged initializer");
    }
    m.data_.insert(m.data_.end(), r.begin(), r.end());
  }
  return m;
}

Vec Mat::row_vec(std::size_t r) const {
  auto s = row(r);
  return Vec(s.begin(), s.end());
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Mat& m) { return all_finite(std::span(m.data())); }

void require_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) {
    throw NonFiniteError(std::string(what) + ": non-finite entry");
  }
}

void require_finite(const Mat& m, const char* what) {
  require_finite(std::span(m.data()), what);
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidShapeError("dot: dimension mismatch (" + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * y[k];
  return acc;
}

double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

Vec l2_normalize(const Vec& v) {
  require_finite(std::span(v), "l2_normalize");
  const double n = norm(v);
  if (n < kDegenerateNorm) {
    throw DegenerateInputError("l2_normalize: vector norm below 1e-20");
  }
  Vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] / n;
  return out;
}

Mat identity(std::size_t n) {
  Mat m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw InvalidShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  require_finite(a, "matmul lhs");
  require_finite(b, "matmul rhs");
  Mat out(a.rows(), b.cols(), 0.0);
  // ikj order keeps the inner loop contiguous for row-major data.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  require_finite(out, "matmul result");
  return out;
}

Mat normalize_rows(const Mat& m) {
  require_finite(m, "normalize_rows");
  Mat out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm(m.row(r));
    if (n < kDegenerateNorm) {
      throw DegenerateInputError("normalize_rows: row " + std::to_string(r) +
                                 " has norm below 1e-20");
    }
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / n;
  }
  return out;
}

Mat xavier_init(Rng& rng, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw InvalidShapeError("xavier_init: zero rows or cols");
  }
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-a, a);
  return m;
}

}  // namespace imc
