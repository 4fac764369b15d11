// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/similarity.hpp"

#include <cmath>

#include "imc/errors.hpp"

namespace imc {

namespace {

constexpr double kDegenerateNorm = 1e-20;

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw InvalidShapeError(std::string(what) + ": dimension mismatch");
  }
  if (x.empty()) {
    throw InvalidShapeError(std::string(what) + ": empty vectors");
  }
  require_finite(x, what);
  require_finite(y, what);
}

// Clamp roundoff excursions of a cosine just outside [-1, 1].
double clamp_cos(double c) {
  if (c > 1.0) return 1.0;
  if (c < -1.0) return -1.0;
  return c;
}

}  // namespace

std::string to_string(DeltaKind kind) {
  switch (kind) {
    case DeltaKind::CosDistance: return "cos";
    case DeltaKind::Msd: return "msd";
    case DeltaKind::L1: return "l1";
    case DeltaKind::L2: return "l2";
  }
  return "?";
}

DeltaKind delta_kind_from_string(const std::string& s) {
  if (s == "cos") return DeltaKind::CosDistance;
  if (s == "msd") return DeltaKind::Msd;
  if (s == "l1") return DeltaKind::L1;
  if (s == "l2") return DeltaKind::L2;
  throw ConfigError("unknown delta kind '" + s + "' (expected cos|msd|l1|l2)");
}

ScoreGrad ell_cosine_sim(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "ell_cosine_sim");
  const double nx = norm(x);
  const double ny = norm(y);
  if (nx < kDegenerateNorm || ny < kDegenerateNorm) {
    throw DegenerateInputError("ell_cosine_sim: zero-norm vector");
  }
  const std::size_t d = x.size();
  ScoreGrad out;
  out.value = clamp_cos(dot(x, y) / (nx * ny));
  out.d_x.resize(d);
  out.d_y.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.d_x[k] = (y[k] / ny - out.value * x[k] / nx) / nx;
    out.d_y[k] = (x[k] / nx - out.value * y[k] / ny) / ny;
  }
  return out;
}

ScoreGrad delta(DeltaKind kind, std::span<const double> x, std::span<const double> y) {
  const std::size_t d = x.size();
  ScoreGrad out;
  switch (kind) {
    case DeltaKind::CosDistance: {
      ScoreGrad cos = ell_cosine_sim(x, y);
      out.value = 1.0 - cos.value;
      out.d_x.resize(d);
      out.d_y.resize(d);
      for (std::size_t k = 0; k < d; ++k) {
        out.d_x[k] = -cos.d_x[k];
        out.d_y[k] = -cos.d_y[k];
      }
      return out;
    }
    case DeltaKind::Msd: {
      check_pair(x, y, "delta msd");
      out.d_x.resize(d);
      out.d_y.resize(d);
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        out.value += diff * diff;
        out.d_x[k] = 2.0 * diff;
        out.d_y[k] = -2.0 * diff;
      }
      return out;
    }
    case DeltaKind::L1: {
      check_pair(x, y, "delta l1");
      out.d_x.resize(d);
      out.d_y.resize(d);
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        out.value += std::abs(diff);
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out.d_x[k] = s;
        out.d_y[k] = -s;
      }
      return out;
    }
    case DeltaKind::L2: {
      check_pair(x, y, "delta l2");
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        sq += diff * diff;
      }
      out.value = std::sqrt(sq);
      out.d_x.assign(d, 0.0);
      out.d_y.assign(d, 0.0);
      if (out.value > 0.0) {
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = x[k] - y[k];
          out.d_x[k] = diff / out.value;
          out.d_y[k] = -diff / out.value;
        }
      }
      return out;
    }
  }
  throw ConfigError("delta: unknown kind");
}

double delta_value(DeltaKind kind, std::span<const double> x, std::span<const double> y) {
  switch (kind) {
    case DeltaKind::CosDistance: {
      check_pair(x, y, "delta cos");
      const double nx = norm(x);
      const double ny = norm(y);
      if (nx < kDegenerateNorm || ny < kDegenerateNorm) {
        throw DegenerateInputError("delta cos: zero-norm vector");
      }
      return 1.0 - clamp_cos(dot(x, y) / (nx * ny));
    }
    case DeltaKind::Msd:
    case DeltaKind::L1:
    case DeltaKind::L2: {
      check_pair(x, y, "delta");
      double acc = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - y[k];
        acc += kind == DeltaKind::L1 ? std::abs(diff) : diff * diff;
      }
      return kind == DeltaKind::L2 ? std::sqrt(acc) : acc;
    }
  }
  throw ConfigError("delta_value: unknown kind");
}

}  // namespace imc
