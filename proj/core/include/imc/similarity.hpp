// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "imc/linalg.hpp"

namespace imc {

/// Similarity-distance family used by the intra-modal constraint term.
enum class DeltaKind {
  CosDistance,  // 1 - cos(x, y)
  Msd,          // sum_k (x_k - y_k)^2
  L1,           // sum_k |x_k - y_k|
  L2,           // sqrt(sum_k (x_k - y_k)^2)
};

std::string to_string(DeltaKind kind);
DeltaKind delta_kind_from_string(const std::string& s);

/// Scalar score plus its analytic partials w.r.t. both arguments.
struct ScoreGrad {
  double value = 0.0;
  Vec d_x;
  Vec d_y;
};

/// Pairwise score used inside the ranking hinges: cosine similarity,
/// dot(x, y) / (||x|| ||y||). Higher means more related.
ScoreGrad ell_cosine_sim(std::span<const double> x, std::span<const double> y);

/// Similarity distance delta(x, y) >= 0 with analytic gradients. The L1
/// subgradient at a tied coordinate is 0; the L2 gradient at x == y is 0.
ScoreGrad delta(DeltaKind kind, std::span<const double> x, std::span<const double> y);

/// Value-only variant of delta().
double delta_value(DeltaKind kind, std::span<const double> x, std::span<const double> y);

}  // namespace imc
