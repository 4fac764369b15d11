// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "imc/errors.hpp"

namespace imc {

namespace {

constexpr char kCheckpointMagic[4] = {'I', 'M', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) {
    throw DataError("checkpoint: truncated file");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Mat& m) {
  write_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (double x : m.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) {
      buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf), 8);
  }
}

Mat vec_as_row(const Vec& v) {
  Mat m(1, v.size());
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

bool dropout_applies(const ProjectionModel& model, Modality mod) {
  return (mod == Modality::Image ? model.dropout_on_img : model.dropout_on_txt) &&
         model.dropout_p > 0.0;
}

}  // namespace

ProjectionModel make_model(Rng& rng, std::size_t d_in_img, std::size_t d_in_txt,
                           std::size_t embed_dim, double dropout_p) {
  if (embed_dim == 0) throw ConfigError("make_model: embed_dim must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("make_model: dropout_p must be in [0, 1)");
  }
  ProjectionModel model;
  model.w_img = xavier_init(rng, d_in_img, embed_dim);
  model.b_img.assign(embed_dim, 0.0);
  model.w_txt = xavier_init(rng, d_in_txt, embed_dim);
  model.b_txt.assign(embed_dim, 0.0);
  model.dropout_p = dropout_p;
  return model;
}

ForwardCache forward_cached(const ProjectionModel& model, const Mat& feats, Modality mod,
                            bool train_mode, Rng* rng) {
  const Mat& w = mod == Modality::Image ? model.w_img : model.w_txt;
  const Vec& b = mod == Modality::Image ? model.b_img : model.b_txt;
  if (feats.cols() != w.rows()) {
    throw InvalidShapeError("forward: feature dim " + std::to_string(feats.cols()) +
                            " does not match head input dim " + std::to_string(w.rows()));
  }
  require_finite(feats, "forward input");

  ForwardCache cache;
  cache.input = feats;
  if (train_mode && dropout_applies(model, mod)) {
    if (rng == nullptr) throw ConfigError("forward: training-mode dropout needs an rng");
    const double keep = 1.0 - model.dropout_p;
    const double inv_keep = 1.0 / keep;
    for (double& x : cache.input.data()) {
      x = rng->uniform() < keep ? x * inv_keep : 0.0;
    }
  }

  cache.pre_norm = matmul(cache.input, w);
  for (std::size_t r = 0; r < cache.pre_norm.rows(); ++r) {
    auto row = cache.pre_norm.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }

  cache.output = model.normalize_output ? normalize_rows(cache.pre_norm) : cache.pre_norm;
  return cache;
}

Mat forward(const ProjectionModel& model, const Mat& feats, Modality mod, bool train_mode,
            Rng& rng) {
  return forward_cached(model, feats, mod, train_mode, &rng).output;
}

Mat forward_eval(const ProjectionModel& model, const Mat& feats, Modality mod) {
  return forward_cached(model, feats, mod, /*train_mode=*/false, nullptr).output;
}

HeadGrads backward_head(const ProjectionModel& model, const ForwardCache& cache,
                        const Mat& d_out) {
  if (d_out.rows() != cache.output.rows() || d_out.cols() != cache.output.cols()) {
    throw InvalidShapeError("backward_head: gradient shape mismatch");
  }
  Mat d_pre = d_out;
  if (model.normalize_output) {
    // y = z / ||z||  =>  dz = (dy - (dy . y_hat) y_hat) / ||z||
    for (std::size_t r = 0; r < d_pre.rows(); ++r) {
      const double z_norm = norm(cache.pre_norm.row(r));
      auto y_hat = cache.output.row(r);
      auto g = d_pre.row(r);
      const double along = dot(g, y_hat);
      for (std::size_t c = 0; c < g.size(); ++c) {
        g[c] = (g[c] - along * y_hat[c]) / z_norm;
      }
    }
  }

  HeadGrads grads;
  grads.d_w = matmul(transpose(cache.input), d_pre);
  grads.d_b.assign(d_pre.cols(), 0.0);
  for (std::size_t r = 0; r < d_pre.rows(); ++r) {
    for (std::size_t c = 0; c < d_pre.cols(); ++c) grads.d_b[c] += d_pre(r, c);
  }
  return grads;
}

AdamState::AdamState(std::size_t n, AdamConfig cfg_in)
    : m(n, 0.0), v(n, 0.0), cfg(cfg_in) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr) {
  if (params.size() != state.m.size() || grads.size() != params.size()) {
    throw InvalidShapeError("adam_step: buffer size mismatch");
  }
  if (!all_finite(grads)) {
    throw NumericalError("adam_step: non-finite gradient, aborting step");
  }
  if (!(lr >= 0.0)) throw ConfigError("adam_step: negative learning rate");

  state.t += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / corr1;
    const double v_hat = state.v[i] / corr2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.cfg.eps);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ProjectionModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for write: " + path.string());
  os.write(kCheckpointMagic, 4);
  write_u32(os, kCheckpointVersion);
  write_tensor(os, "w_img", model.w_img);
  write_tensor(os, "b_img", vec_as_row(model.b_img));
  write_tensor(os, "w_txt", model.w_txt);
  write_tensor(os, "b_txt", vec_as_row(model.b_txt));
  if (!os) throw DataError("write failed: " + path.string());
}

ProjectionModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("bad magic in " + path.string() + " (expected IMCK)");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, Mat> tensors;
  while (true) {
    unsigned char peek;
    if (!is.read(reinterpret_cast<char*>(&peek), 1)) break;
    is.putback(static_cast<char>(peek));

    const std::uint32_t name_len = read_u32(is);
    if (name_len == 0 || name_len > 256) {
      throw DataError("checkpoint: implausible tensor name length");
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError("checkpoint: truncated name");
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    Mat m(rows, cols);
    for (double& x : m.data()) {
      unsigned char buf[8];
      if (!is.read(reinterpret_cast<char*>(buf), 8)) {
        throw DataError("checkpoint: truncated tensor data");
      }
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
      std::memcpy(&x, &bits, sizeof x);
    }
    if (!tensors.emplace(name, std::move(m)).second) {
      throw DataError("checkpoint: duplicate tensor '" + name + "'");
    }
  }

  for (const char* required : {"w_img", "b_img", "w_txt", "b_txt"}) {
    if (!tensors.contains(required)) {
      throw DataError("checkpoint: missing tensor '" + std::string(required) + "'");
    }
  }
  for (const auto& [name, m] : tensors) {
    if (name != "w_img" && name != "b_img" && name != "w_txt" && name != "b_txt") {
      throw DataError("checkpoint: unknown tensor '" + name + "'");
    }
    if (!all_finite(m)) throw DataError("checkpoint: non-finite values in '" + name + "'");
  }

  ProjectionModel model;
  model.w_img = tensors.at("w_img");
  model.w_txt = tensors.at("w_txt");
  const Mat& bi = tensors.at("b_img");
  const Mat& bt = tensors.at("b_txt");
  if (bi.rows() != 1 || bt.rows() != 1 || bi.cols() != model.w_img.cols() ||
      bt.cols() != model.w_txt.cols()) {
    throw DataError("checkpoint: bias shapes inconsistent with weights");
  }
  model.b_img = bi.row_vec(0);
  model.b_txt = bt.row_vec(0);
  if (model.w_img.cols() != model.w_txt.cols()) {
    throw DataError("checkpoint: heads disagree on embedding dim");
  }
  return model;
}

}  // namespace imc
