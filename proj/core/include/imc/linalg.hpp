// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "imc/rng.hpp"

namespace imc {

/// Feature / embedding vector. Unitless 64-bit scalars.
using Vec = std::vector<double>;

/// Dense row-major matrix. Batches are stored one row per sample.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  Vec row_vec(std::size_t r) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> xs);
bool all_finite(const Mat& m);

/// Throws NonFiniteError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> xs, const char* what);
void require_finite(const Mat& m, const char* what);

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);

/// Returns v / ||v||. Norms below 1e-20 are treated as degenerate rather than
/// silently producing NaN.
Vec l2_normalize(const Vec& v);

Mat identity(std::size_t n);
Mat transpose(const Mat& m);
Mat matmul(const Mat& a, const Mat& b);

/// Row-normalized copy; throws DegenerateInputError on a near-zero row.
Mat normalize_rows(const Mat& m);

/// Uniform Xavier/Glorot init on [-a, a], a = sqrt(6 / (rows + cols)).
Mat xavier_init(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace imc
