// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "imc/errors.hpp"
#include "imc/similarity.hpp"

namespace imc {

namespace {

Mat random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = m.row(r);
    double n = 0.0;
    do {
      for (auto& x : row) x = rng.normal();
      n = norm(row);
    } while (n < 1e-8);
    for (auto& x : row) x /= n;
  }
  return m;
}

// Hinge values of both directions grouped by anchor, active or not.
struct HingeTable {
  std::vector<std::vector<double>> img;  // per image anchor
  std::vector<std::vector<double>> txt;  // per text anchor
};

HingeTable hinge_table(const EmbeddingBatch& b, double alpha) {
  const std::size_t B = b.size();
  HingeTable t;
  t.img.resize(B);
  t.txt.resize(B);
  for (std::size_t n = 0; n < B; ++n) {
    ScoreGrad pos = ell_cosine_sim(b.images.row(n), b.texts.row(n));
    for (std::size_t m = 0; m < B; ++m) {
      if (b.group_ids[m] == b.group_ids[n]) continue;
      t.img[n].push_back(alpha - pos.value +
                         ell_cosine_sim(b.images.row(n), b.texts.row(m)).value);
      t.txt[n].push_back(alpha - pos.value +
                         ell_cosine_sim(b.images.row(m), b.texts.row(n)).value);
    }
  }
  return t;
}

// Smallest gap between the two largest entries across the anchors' hinge
// lists, both per anchor and globally (the max kinks of the MH reductions).
double min_top2_gap(const std::vector<std::vector<double>>& per_anchor) {
  double min_gap = std::numeric_limits<double>::infinity();
  std::vector<double> all;
  for (const auto& hs : per_anchor) {
    all.insert(all.end(), hs.begin(), hs.end());
    if (hs.size() < 2) continue;
    std::vector<double> sorted(hs);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    min_gap = std::min(min_gap, sorted[0] - sorted[1]);
  }
  if (all.size() >= 2) {
    std::sort(all.begin(), all.end(), std::greater<>());
    min_gap = std::min(min_gap, all[0] - all[1]);
  }
  return min_gap;
}

std::vector<double> intra_modal_deltas(const Mat& v, std::span<const std::int64_t> groups,
                                       DeltaKind kind) {
  std::vector<double> out;
  for (std::size_t n = 0; n + 1 < v.rows(); ++n) {
    for (std::size_t m = n + 1; m < v.rows(); ++m) {
      if (groups[m] == groups[n]) continue;
      out.push_back(delta_value(kind, v.row(n), v.row(m)));
    }
  }
  return out;
}

bool has_coordinate_tie(const Mat& v, std::span<const std::int64_t> groups, double margin) {
  for (std::size_t n = 0; n + 1 < v.rows(); ++n) {
    for (std::size_t m = n + 1; m < v.rows(); ++m) {
      if (groups[m] == groups[n]) continue;
      for (std::size_t k = 0; k < v.cols(); ++k) {
        if (std::abs(v(n, k) - v(m, k)) < margin) return true;
      }
    }
  }
  return false;
}

double rel_err(double analytic, double numeric, double abs_floor) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < abs_floor) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

GradCheckResult check_batch_gradients(const BatchLossFn& fn, const EmbeddingBatch& batch,
                                      const GradCheckConfig& gc) {
  LossOutput analytic = fn(batch);
  GradCheckResult result;

  auto probe = [&](Mat EmbeddingBatch::* field, const Mat& grad) {
    EmbeddingBatch work = batch;
    Mat& target = work.*field;
    for (std::size_t i = 0; i < target.data().size(); ++i) {
      const double saved = target.data()[i];
      target.data()[i] = saved + gc.fd_step;
      const double up = fn(work).value;
      target.data()[i] = saved - gc.fd_step;
      const double down = fn(work).value;
      target.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * gc.fd_step);
      result.max_rel_err =
          std::max(result.max_rel_err, rel_err(grad.data()[i], numeric, gc.abs_floor));
    }
  };
  probe(&EmbeddingBatch::images, analytic.d_images);
  probe(&EmbeddingBatch::texts, analytic.d_texts);

  result.pass = result.max_rel_err <= gc.tol;
  return result;
}

EmbeddingBatch make_gradcheck_batch(Rng& rng, std::size_t batch_size, std::size_t dim,
                                    LossKind kind, LossConfig& cfg,
                                    const GradCheckConfig& gc) {
  if (batch_size < 4) throw ConfigError("make_gradcheck_batch: need batch size >= 4");

  for (int attempt = 0; attempt < 1000; ++attempt) {
    EmbeddingBatch b;
    b.images = random_unit_rows(rng, batch_size, dim);
    b.texts = random_unit_rows(rng, batch_size, dim);
    b.group_ids.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      b.group_ids[i] = static_cast<std::int64_t>(i);
    }

    const HingeTable table = hinge_table(b, cfg.alpha);
    bool clean = true;
    bool any_active = false;
    for (const auto* side : {&table.img, &table.txt}) {
      for (const auto& hs : *side) {
        for (double h : hs) {
          if (std::abs(h) < gc.boundary_margin) clean = false;
          if (h > 0.0) any_active = true;
        }
      }
    }
    if (!clean || !any_active) continue;
    // MH picks a max per anchor (or globally); near-ties there put the kink
    // within finite-difference reach.
    if (kind != LossKind::Sh &&
        std::min(min_top2_gap(table.img), min_top2_gap(table.txt)) < gc.boundary_margin) {
      continue;
    }

    if (kind == LossKind::Imc && cfg.lambda != 0.0) {
      auto deltas = intra_modal_deltas(b.images, b.group_ids, cfg.delta_kind);
      auto txt_deltas = intra_modal_deltas(b.texts, b.group_ids, cfg.delta_kind);
      deltas.insert(deltas.end(), txt_deltas.begin(), txt_deltas.end());
      std::sort(deltas.begin(), deltas.end());

      // Straddle the observed deltas so some pairs land inside the band.
      const std::size_t lo_idx = deltas.size() / 4;
      const std::size_t hi_idx = (3 * deltas.size()) / 4;
      const double lo = (deltas[lo_idx] + deltas[lo_idx + 1]) / 2.0;
      const double hi = (deltas[hi_idx] + deltas[hi_idx + 1]) / 2.0;
      if (!(lo >= 0.0) || !(lo < hi)) continue;
      cfg.mu_down = lo;
      cfg.mu_up = hi;

      bool near_edge = std::any_of(deltas.begin(), deltas.end(), [&](double d) {
        return std::abs(d - cfg.mu_down) < gc.boundary_margin ||
               std::abs(d - cfg.mu_up) < gc.boundary_margin;
      });
      if (near_edge) continue;
      if (cfg.delta_kind == DeltaKind::L1 &&
          (has_coordinate_tie(b.images, b.group_ids, 100 * gc.fd_step) ||
           has_coordinate_tie(b.texts, b.group_ids, 100 * gc.fd_step))) {
        continue;
      }
    }
    return b;
  }
  throw NumericalError("make_gradcheck_batch: no boundary-free batch found");
}

std::vector<GradCheckSuiteEntry> run_gradcheck_suite(std::uint64_t seed,
                                                     std::size_t batch_size,
                                                     std::size_t dim,
                                                     const GradCheckConfig& gc) {
  std::vector<GradCheckSuiteEntry> entries;
  Rng rng(seed);
  for (LossKind kind : {LossKind::Sh, LossKind::Mh, LossKind::Imc}) {
    for (DeltaKind dk :
         {DeltaKind::CosDistance, DeltaKind::Msd, DeltaKind::L1, DeltaKind::L2}) {
      LossConfig cfg;
      cfg.delta_kind = dk;
      Rng combo_rng = rng.derive((static_cast<std::uint64_t>(kind) << 8) ^
                                 static_cast<std::uint64_t>(dk));
      EmbeddingBatch batch = make_gradcheck_batch(combo_rng, batch_size, dim, kind, cfg, gc);
      auto fn = [kind, cfg](const EmbeddingBatch& b) { return compute_loss(kind, b, cfg); };
      const GradCheckResult r = check_batch_gradients(fn, batch, gc);
      entries.push_back({kind, dk, r.max_rel_err, r.pass});
    }
  }
  return entries;
}

}  // namespace imc
