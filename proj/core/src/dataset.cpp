// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "imc/errors.hpp"

namespace imc {

namespace {

constexpr char kFeatureMagic[4] = {'C', 'M', 'F', 'V'};
constexpr std::uint32_t kFeatureVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) {
    throw DataError(std::string(what) + ": truncated file");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& is, const char* what) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw DataError(std::string(what) + ": truncated file");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

void write_features(const std::filesystem::path& path, const Mat& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for write: " + path.string());
  os.write(kFeatureMagic, 4);
  write_u32(os, kFeatureVersion);
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (double x : m.data()) write_f64(os, x);
  if (!os) throw DataError("write failed: " + path.string());
}

Mat read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw DataError("bad magic in " + path.string() + " (expected CMFV)");
  }
  const std::uint32_t version = read_u32(is, "feature file");
  if (version != kFeatureVersion) {
    throw DataError("unsupported CMFV version " + std::to_string(version) + " in " +
                    path.string());
  }
  const std::uint32_t count = read_u32(is, "feature file");
  const std::uint32_t dim = read_u32(is, "feature file");
  if (count == 0 || dim == 0) {
    throw DataError("empty feature file: " + path.string());
  }
  Mat m(count, dim);
  for (double& x : m.data()) x = read_f64(is, "feature file");
  char extra;
  if (is.read(&extra, 1)) {
    throw DataError("trailing bytes in " + path.string());
  }
  return m;
}

void write_index(const std::filesystem::path& path,
                 std::span<const std::size_t> caption_to_image) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for write: " + path.string());
  os << "caption_id,image_id\n";
  for (std::size_t c = 0; c < caption_to_image.size(); ++c) {
    os << c << ',' << caption_to_image[c] << '\n';
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<std::size_t> read_index(const std::filesystem::path& path,
                                    std::size_t num_captions) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "caption_id,image_id") {
    throw DataError("bad index header in " + path.string() +
                    " (expected 'caption_id,image_id')");
  }
  std::vector<std::size_t> map(num_captions, 0);
  std::vector<bool> seen(num_captions, false);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t caption_id = 0, image_id = 0;
    char comma = 0;
    if (!(ss >> caption_id >> comma >> image_id) || comma != ',') {
      throw DataError("bad index row '" + line + "' in " + path.string());
    }
    if (caption_id >= num_captions) {
      throw DataError("index references caption " + std::to_string(caption_id) +
                      " but only " + std::to_string(num_captions) + " captions exist");
    }
    if (seen[caption_id]) {
      throw DataError("duplicate caption id " + std::to_string(caption_id) +
                      " in index");
    }
    seen[caption_id] = true;
    map[caption_id] = image_id;
    ++rows;
  }
  if (rows != num_captions) {
    throw DataError("index covers " + std::to_string(rows) + " captions, expected " +
                    std::to_string(num_captions));
  }
  return map;
}

// Gram-Schmidt rows of a seeded Gaussian matrix; requires rows <= cols.
Mat random_orthonormal_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int attempt = 0;; ++attempt) {
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        const double proj = dot(m.row(r), m.row(p));
        for (std::size_t c = 0; c < cols; ++c) m(r, c) -= proj * m.row(p)[c];
      }
      const double n = norm(m.row(r));
      if (n > 1e-8) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) /= n;
        break;
      }
      if (attempt > 16) throw NumericalError("orthonormal basis generation failed");
    }
  }
  return m;
}

}  // namespace

void FeatureStore::validate() const {
  if (num_images() == 0 || num_captions() == 0) {
    throw DataError("feature store: empty image or caption set");
  }
  if (caption_to_image.size() != num_captions()) {
    throw DataError("feature store: index size does not match caption count");
  }
  std::vector<bool> described(num_images(), false);
  for (std::size_t c = 0; c < caption_to_image.size(); ++c) {
    if (caption_to_image[c] >= num_images()) {
      throw DataError("feature store: caption " + std::to_string(c) +
                      " references missing image " +
                      std::to_string(caption_to_image[c]));
    }
    described[caption_to_image[c]] = true;
  }
  for (std::size_t i = 0; i < described.size(); ++i) {
    if (!described[i]) {
      throw DataError("feature store: image " + std::to_string(i) + " has no captions");
    }
  }
  if (!all_finite(image_feats) || !all_finite(text_feats)) {
    throw DataError("feature store: non-finite feature values");
  }
}

void SplitSpec::validate(std::size_t num_images) const {
  std::vector<int> owner(num_images, -1);
  auto claim = [&](std::span<const std::size_t> ids, int tag, const char* name) {
    for (std::size_t id : ids) {
      if (id >= num_images) {
        throw DataError(std::string("split: ") + name + " id " + std::to_string(id) +
                        " out of range");
      }
      if (owner[id] != -1) {
        throw DataError(std::string("split: image ") + std::to_string(id) +
                        " appears in more than one subset");
      }
      owner[id] = tag;
    }
  };
  claim(train_ids, 0, "train");
  claim(val_ids, 1, "val");
  claim(test_ids, 2, "test");

  if (!folds.empty()) {
    if (test_ids.empty()) throw DataError("split: folds present but test set empty");
    const std::size_t fold_size = folds.front().size();
    std::size_t total = 0;
    std::vector<bool> in_fold(num_images, false);
    for (const auto& fold : folds) {
      if (fold.size() != fold_size) {
        throw DataError("split: folds must have equal sizes");
      }
      for (std::size_t id : fold) {
        if (id >= num_images || owner[id] != 2) {
          throw DataError("split: fold id " + std::to_string(id) + " not in test set");
        }
        if (in_fold[id]) {
          throw DataError("split: image " + std::to_string(id) + " in two folds");
        }
        in_fold[id] = true;
      }
      total += fold.size();
    }
    if (total != test_ids.size()) {
      throw DataError("split: folds do not cover the test set");
    }
  }
}

SplitSpec make_split(std::size_t num_images, double train_frac, double val_frac,
                     std::uint64_t seed, std::size_t num_folds) {
  if (num_images == 0) throw ConfigError("make_split: no images");
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac >= 1.0) {
    throw ConfigError("make_split: need train_frac > 0, val_frac >= 0, sum < 1");
  }
  std::vector<std::size_t> ids(num_images);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng = Rng(seed).derive(0x5b717);
  rng.shuffle(ids);

  const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(num_images));
  const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(num_images));
  if (n_train == 0 || n_train + n_val >= num_images) {
    throw ConfigError("make_split: fractions leave an empty train or test set");
  }

  SplitSpec split;
  split.train_ids.assign(ids.begin(), ids.begin() + n_train);
  split.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test_ids.assign(ids.begin() + n_train + n_val, ids.end());

  if (num_folds > 0) {
    if (split.test_ids.size() % num_folds != 0) {
      throw ConfigError("make_split: test size " + std::to_string(split.test_ids.size()) +
                        " not divisible into " + std::to_string(num_folds) + " folds");
    }
    const std::size_t fold_size = split.test_ids.size() / num_folds;
    for (std::size_t f = 0; f < num_folds; ++f) {
      split.folds.emplace_back(split.test_ids.begin() + f * fold_size,
                               split.test_ids.begin() + (f + 1) * fold_size);
    }
  }
  split.validate(num_images);
  return split;
}

SyntheticData generate_synthetic(Rng& rng, const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.captions_per_image == 0 || spec.d_in_img == 0 ||
      spec.d_in_txt == 0) {
    throw ConfigError("generate_synthetic: counts and dims must be >= 1");
  }
  if (!(spec.noise_sigma >= 0.0)) {
    throw ConfigError("generate_synthetic: noise_sigma must be >= 0");
  }
  if (spec.identity_maps && spec.d_in_img != spec.d_in_txt) {
    throw ConfigError("generate_synthetic: identity maps need d_in_img == d_in_txt");
  }

  const std::size_t latent = std::min(spec.d_in_img, spec.d_in_txt);

  SyntheticData data;
  data.class_dirs = Mat(spec.num_classes, latent);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto row = data.class_dirs.row(c);
    double n = 0.0;
    do {
      for (auto& x : row) x = rng.normal();
      n = norm(row);
    } while (n < 1e-8);
    for (auto& x : row) x /= n;
  }

  if (spec.identity_maps) {
    data.img_map = identity(latent);
    data.txt_map = identity(latent);
  } else {
    data.img_map = random_orthonormal_rows(rng, latent, spec.d_in_img);
    data.txt_map = random_orthonormal_rows(rng, latent, spec.d_in_txt);
  }

  data.store.image_feats = matmul(data.class_dirs, data.img_map);
  const std::size_t num_captions = spec.num_classes * spec.captions_per_image;
  Mat caption_dirs(num_captions, latent);
  data.store.caption_to_image.resize(num_captions);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t j = 0; j < spec.captions_per_image; ++j) {
      const std::size_t cap = c * spec.captions_per_image + j;
      data.store.caption_to_image[cap] = c;
      auto src = data.class_dirs.row(c);
      auto dst = caption_dirs.row(cap);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  data.store.text_feats = matmul(caption_dirs, data.txt_map);

  if (spec.noise_sigma > 0.0) {
    for (double& x : data.store.image_feats.data()) {
      x += rng.normal(0.0, spec.noise_sigma);
    }
    for (double& x : data.store.text_feats.data()) {
      x += rng.normal(0.0, spec.noise_sigma);
    }
  }
  data.store.validate();
  return data;
}

void save_store(const std::filesystem::path& image_path,
                const std::filesystem::path& text_path,
                const std::filesystem::path& index_path, const FeatureStore& store) {
  store.validate();
  write_features(image_path, store.image_feats);
  write_features(text_path, store.text_feats);
  write_index(index_path, store.caption_to_image);
}

FeatureStore load_store(const std::filesystem::path& image_path,
                        const std::filesystem::path& text_path,
                        const std::filesystem::path& index_path) {
  FeatureStore store;
  store.image_feats = read_features(image_path);
  store.text_feats = read_features(text_path);
  store.caption_to_image = read_index(index_path, store.num_captions());
  store.validate();
  return store;
}

std::vector<FeatureBatch> make_batches(const FeatureStore& store,
                                       std::span<const std::size_t> image_ids,
                                       const BatchPlan& plan, std::size_t epoch) {
  if (plan.batch_size < 2) {
    throw ConfigError("make_batches: batch size must be >= 2");
  }
  std::vector<bool> in_set(store.num_images(), false);
  for (std::size_t id : image_ids) {
    if (id >= store.num_images()) {
      throw DataError("make_batches: image id " + std::to_string(id) + " out of range");
    }
    in_set[id] = true;
  }

  std::vector<std::size_t> captions;
  for (std::size_t c = 0; c < store.num_captions(); ++c) {
    if (in_set[store.caption_to_image[c]]) captions.push_back(c);
  }
  Rng order_rng = Rng(plan.seed).derive(0xba7c4 + epoch);
  order_rng.shuffle(captions);

  std::vector<FeatureBatch> batches;
  for (std::size_t start = 0; start < captions.size(); start += plan.batch_size) {
    const std::size_t count = std::min(plan.batch_size, captions.size() - start);
    if (count < 2) break;  // drop a trailing singleton, losses need a negative
    FeatureBatch b;
    b.image_feats = Mat(count, store.image_feats.cols());
    b.text_feats = Mat(count, store.text_feats.cols());
    b.group_ids.resize(count);
    b.caption_ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cap = captions[start + i];
      const std::size_t img = store.caption_to_image[cap];
      auto src_img = store.image_feats.row(img);
      auto src_txt = store.text_feats.row(cap);
      std::copy(src_img.begin(), src_img.end(), b.image_feats.row(i).begin());
      std::copy(src_txt.begin(), src_txt.end(), b.text_feats.row(i).begin());
      b.group_ids[i] = static_cast<std::int64_t>(img);
      b.caption_ids[i] = cap;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace imc
