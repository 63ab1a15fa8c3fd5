// Copyright 2026 The sparsesep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dictionary learning: LCA inference interleaved with a Hebbian
// (residual x activity) update with momentum, followed by per-atom
// renormalisation.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparsesep/binary_io.hpp"
#include "sparsesep/error.hpp"
#include "sparsesep/lca.hpp"

namespace sparsesep {

struct LearnParams {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 4;
  double epoch_decay = 0.5;  // learning rate multiplier applied after each epoch
  std::uint64_t rng_seed = 0;

  void validate() const {
    require(learning_rate > 0.0, ErrorKind::kPrecondition, "learning_rate must be > 0");
    require(momentum >= 0.0 && momentum < 1.0, ErrorKind::kPrecondition, "momentum must be in [0, 1)");
    require(epochs >= 1, ErrorKind::kPrecondition, "epochs must be >= 1");
    require(epoch_decay > 0.0 && epoch_decay <= 1.0, ErrorKind::kPrecondition, "epoch_decay must be in (0, 1]");
  }
};

struct EpochSummary {
  double mean_error = 0.0;
  double mean_sparsity = 0.0;
};

struct TrainReport {
  std::vector<double> errors;      // ||I - Phi a||^2 / ||I||^2 per presented input, before its update
  std::vector<double> sparsities;  // per presented input
  std::vector<EpochSummary> epochs;
};

inline Dictionary init_dictionary(std::size_t n_features, const PatchGeometry& geometry, std::uint64_t seed,
                                  ImageKind kind = ImageKind::kPhaseRich) {
  require(n_features >= 1, ErrorKind::kShape, "n_features must be >= 1");
  geometry.validate();
  Dictionary dict;
  dict.geometry = geometry;
  dict.kind = kind;
  dict.atoms.resize(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(geometry.patch_dim()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < dict.atoms.rows(); ++i) {
    for (Eigen::Index j = 0; j < dict.atoms.cols(); ++j) dict.atoms(i, j) = normal(rng);
    dict.atoms.row(i).normalize();
  }
  return dict;
}

inline Dictionary init_dictionary(std::size_t n_features, std::size_t channels, std::size_t n_freq_bins,
                                  std::size_t patch_frames, std::size_t stride, std::uint64_t seed,
                                  ImageKind kind = ImageKind::kPhaseRich) {
  return init_dictionary(n_features, PatchGeometry{channels, n_freq_bins, patch_frames, stride}, seed, kind);
}

/// Activity-weighted residual correlation:
/// grad_i = scale * sum_p a[i, p] * residual_patch(p).
/// Only rows with nonzero activity are written; `active` lists them.
inline AtomMatrix residual_gradient(const SparseCode& code, const Tensor3& residual,
                                    std::vector<Eigen::Index>* active = nullptr, double scale = 1.0) {
  const auto& g = code.geometry;
  const Eigen::MatrixXd patches = im2col(residual, g);
  AtomMatrix grad = AtomMatrix::Zero(code.a.rows(), static_cast<Eigen::Index>(g.patch_dim()));
  std::vector<char> touched(static_cast<std::size_t>(code.a.rows()), 0);
  for (Eigen::Index p = 0; p < code.a.cols(); ++p)
    for (Eigen::Index i = 0; i < code.a.rows(); ++i)
      if (const double v = code.a(i, p); v != 0.0) {
        grad.row(i).noalias() += (scale * v) * patches.col(p).transpose();
        touched[static_cast<std::size_t>(i)] = 1;
      }
  if (active) {
    active->clear();
    for (std::size_t i = 0; i < touched.size(); ++i)
      if (touched[i]) active->push_back(static_cast<Eigen::Index>(i));
  }
  return grad;
}

/// One Hebbian step. Momentum and renormalisation act only on atoms that
/// were active in `code`, so silent atoms (and their velocity) are left
/// bit-for-bit unchanged. Returns the number of updated atoms.
inline std::size_t hebbian_update(Dictionary& dict, const Tensor3& image, const SparseCode& code,
                                  double learning_rate, double momentum, AtomMatrix& velocity) {
  if (!(dict.geometry == code.geometry) || static_cast<std::size_t>(code.a.rows()) != dict.n_features())
    fail(ErrorKind::kShape, "hebbian_update: code does not match dictionary");
  if (velocity.size() == 0) velocity = AtomMatrix::Zero(dict.atoms.rows(), dict.atoms.cols());
  if (velocity.rows() != dict.atoms.rows() || velocity.cols() != dict.atoms.cols())
    fail(ErrorKind::kShape, "hebbian_update: velocity shape mismatch");
  const Tensor3 residual = image - reconstruct(dict, code);
  std::vector<Eigen::Index> active;
  const AtomMatrix grad = residual_gradient(code, residual, &active);
  for (Eigen::Index i : active) {
    velocity.row(i) = momentum * velocity.row(i) + grad.row(i);
    dict.atoms.row(i) += learning_rate * velocity.row(i);
    const double norm = dict.atoms.row(i).norm();
    if (norm > 0.0) dict.atoms.row(i) /= norm;
  }
  return active.size();
}

struct TrainResult {
  Dictionary dictionary;
  TrainReport report;
};

/// Sequential SGD over `images`, reshuffled every epoch under
/// learn.rng_seed. The display period is lca.n_steps.
inline TrainResult train_dictionary(std::span<const Tensor3> images, Dictionary initial, const LearnParams& learn,
                                    const LcaParams& lca) {
  learn.validate();
  lca.validate();
  if (images.empty()) fail(ErrorKind::kData, "train_dictionary: no training images");
  TrainResult out{std::move(initial), {}};
  Dictionary& dict = out.dictionary;
  AtomMatrix velocity = AtomMatrix::Zero(dict.atoms.rows(), dict.atoms.cols());
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(learn.rng_seed);
  double lr = learn.learning_rate;
  for (std::size_t epoch = 0; epoch < learn.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochSummary summary;
    for (std::size_t idx : order) {
      const Tensor3& image = images[idx];
      const LcaSolver solver(dict, lca);
      const LcaResult enc = solver.encode(image);
      const double input_sq = image.squared_norm();
      const double err = (image - reconstruct(dict, enc.code)).squared_norm();
      out.report.errors.push_back(input_sq > 0.0 ? err / input_sq : 0.0);
      out.report.sparsities.push_back(sparsity(enc.code));
      summary.mean_error += out.report.errors.back();
      summary.mean_sparsity += out.report.sparsities.back();
      hebbian_update(dict, image, enc.code, lr, learn.momentum, velocity);
    }
    summary.mean_error /= static_cast<double>(images.size());
    summary.mean_sparsity /= static_cast<double>(images.size());
    out.report.epochs.push_back(summary);
    lr *= learn.epoch_decay;
  }
  return out;
}

inline TrainResult train_dictionary(std::span<const SoundImage> images, Dictionary initial, const LearnParams& learn,
                                    const LcaParams& lca) {
  std::vector<Tensor3> data;
  data.reserve(images.size());
  for (const auto& img : images) data.push_back(img.data);
  return train_dictionary(std::span<const Tensor3>(data), std::move(initial), learn, lca);
}

// Atom bank file, shared by coding dictionaries and readouts:
// "SSDI" | u32 version | u32 n_features | u32 channels | u32 n_freq_bins
// | u32 patch_frames | u32 stride | u32 kind | u32 role | u32 flags
// | u64 config_hash | u64 input_hash | f32 atoms (row-major), little-endian.
inline constexpr std::uint32_t kDictionaryFormatVersion = 1;

enum class AtomRole : std::uint32_t { kCoding = 0, kVocalReadout = 1, kAccompanimentReadout = 2 };

struct AtomBankFile {
  Dictionary dictionary;
  AtomRole role = AtomRole::kCoding;
  bool trained = false;
  std::uint64_t config_hash = 0;
  std::uint64_t input_hash = 0;
};

inline std::vector<std::uint8_t> encode_atom_bank(const AtomBankFile& f) {
  const auto& d = f.dictionary;
  ByteWriter w;
  w.put_bytes("SSDI");
  w.put<std::uint32_t>(kDictionaryFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.n_features()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.geometry.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.geometry.n_freq_bins));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.geometry.patch_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.geometry.stride));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.role));
  w.put<std::uint32_t>(f.trained ? 1u : 0u);
  w.put<std::uint64_t>(f.config_hash);
  w.put<std::uint64_t>(f.input_hash);
  for (Eigen::Index i = 0; i < d.atoms.rows(); ++i)
    for (Eigen::Index j = 0; j < d.atoms.cols(); ++j) w.put<float>(static_cast<float>(d.atoms(i, j)));
  return std::move(w.bytes());
}

inline AtomBankFile decode_atom_bank(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteReader r(bytes.data(), bytes.size(), source);
  if (bytes.size() < 4 || r.get_bytes(4) != "SSDI") fail(ErrorKind::kFormat, source + ": bad magic (not a dictionary)");
  if (r.get<std::uint32_t>() != kDictionaryFormatVersion) fail(ErrorKind::kFormat, source + ": unsupported version");
  AtomBankFile f;
  auto& d = f.dictionary;
  const auto n = r.get<std::uint32_t>();
  d.geometry.channels = r.get<std::uint32_t>();
  d.geometry.n_freq_bins = r.get<std::uint32_t>();
  d.geometry.patch_frames = r.get<std::uint32_t>();
  d.geometry.stride = r.get<std::uint32_t>();
  const auto kind = r.get<std::uint32_t>();
  const auto role = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();
  if (kind > 2 || role > 2 || n == 0 || d.geometry.channels == 0 || d.geometry.n_freq_bins == 0 ||
      d.geometry.patch_frames == 0 || d.geometry.stride == 0)
    fail(ErrorKind::kFormat, source + ": corrupt header");
  d.kind = static_cast<ImageKind>(kind);
  f.role = static_cast<AtomRole>(role);
  f.trained = (flags & 1u) != 0;
  f.config_hash = r.get<std::uint64_t>();
  f.input_hash = r.get<std::uint64_t>();
  const std::size_t dim = d.geometry.patch_dim();
  if (r.remaining() != std::size_t{n} * dim * 4) fail(ErrorKind::kFormat, source + ": payload size mismatch");
  d.atoms.resize(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < d.atoms.rows(); ++i)
    for (Eigen::Index j = 0; j < d.atoms.cols(); ++j) d.atoms(i, j) = r.get<float>();
  return f;
}

inline void write_atom_bank(const std::string& path, const AtomBankFile& f) {
  write_file_bytes(path, encode_atom_bank(f));
}

inline AtomBankFile read_atom_bank(const std::string& path) { return decode_atom_bank(read_file_bytes(path), path); }

}  // namespace sparsesep
