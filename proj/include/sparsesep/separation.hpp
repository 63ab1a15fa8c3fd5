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

// Linear readout separation. The mixture's sparse code is decoded through
// two atom banks (vocal and accompaniment) that start as copies of the
// coding dictionary and are fitted to the true stems' images while the code
// stays frozen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/dictionary.hpp"
#include "sparsesep/error.hpp"
#include "sparsesep/lca.hpp"
#include "sparsesep/spectral.hpp"

namespace sparsesep {

struct ReadoutPair {
  PatchGeometry geometry;
  ImageKind kind = ImageKind::kPhaseRich;
  AtomMatrix vocal;
  AtomMatrix accompaniment;
  bool trained = false;
};

inline ReadoutPair init_readouts(const Dictionary& dict) {
  return {dict.geometry, dict.kind, dict.atoms, dict.atoms, false};
}

struct ReadoutParams {
  std::size_t epochs = 40;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t rng_seed = 0;
};

/// One training clip for the readouts: the frozen mixture code and the
/// images the two banks should reproduce from it.
struct ReadoutExample {
  SparseCode code;
  Tensor3 vocal;
  Tensor3 accompaniment;
};

namespace detail {

/// Returns the squared residual before the step.
inline double readout_step(AtomMatrix& weights, AtomMatrix& velocity, const SparseCode& code, const Tensor3& target,
                           double lr, double momentum) {
  const Tensor3 residual = target - reconstruct(weights, code);
  std::vector<Eigen::Index> active;
  const AtomMatrix grad = residual_gradient(code, residual, &active, 1.0 / static_cast<double>(code.a.cols()));
  for (Eigen::Index i : active) {
    velocity.row(i) = momentum * velocity.row(i) + grad.row(i);
    weights.row(i) += lr * velocity.row(i);
  }
  return residual.squared_norm();
}

}  // namespace detail

/// Gradient descent with momentum on (1/2 ||V - Phi_v a||^2 + 1/2 ||N - Phi_n a||^2)
/// / n_positions, one step per example, examples reshuffled every epoch. Readout atoms are
/// not renormalised: they carry source amplitude.
inline ReadoutPair train_readouts(std::span<const ReadoutExample> examples, ReadoutPair init,
                                  const ReadoutParams& params) {
  if (examples.empty()) fail(ErrorKind::kData, "train_readouts: no training examples");
  require(params.learning_rate > 0.0 && params.momentum >= 0.0 && params.momentum < 1.0, ErrorKind::kPrecondition,
          "train_readouts: bad learning rate or momentum");
  for (const auto& ex : examples) {
    if (!(ex.code.geometry == init.geometry) || ex.code.a.rows() != init.vocal.rows())
      fail(ErrorKind::kRepresentation, "train_readouts: code geometry does not match readouts");
    const Tensor3 shape(init.geometry.channels, init.geometry.n_freq_bins, ex.code.n_frames);
    if (!ex.vocal.same_shape(shape) || !ex.accompaniment.same_shape(shape))
      fail(ErrorKind::kRepresentation, "train_readouts: target image shape does not match code");
  }
  ReadoutPair out = std::move(init);
  AtomMatrix vel_v = AtomMatrix::Zero(out.vocal.rows(), out.vocal.cols());
  AtomMatrix vel_n = vel_v;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.rng_seed);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double residual_sq = 0.0, target_sq = 0.0;
    for (std::size_t idx : order) {
      const auto& ex = examples[idx];
      residual_sq += detail::readout_step(out.vocal, vel_v, ex.code, ex.vocal, params.learning_rate, params.momentum);
      residual_sq += detail::readout_step(out.accompaniment, vel_n, ex.code, ex.accompaniment, params.learning_rate,
                                          params.momentum);
      target_sq += ex.vocal.squared_norm() + ex.accompaniment.squared_norm();
    }
    // A residual this far above the targets only arises from an unstable
    // step size; finite-but-huge weights would otherwise pass silently.
    if (!out.vocal.allFinite() || !out.accompaniment.allFinite() || !(residual_sq <= 1e4 * target_sq + 1e-300))
      fail(ErrorKind::kDivergence, "readout training diverged at epoch " + std::to_string(epoch + 1) +
                                       " (lower the readout learning rate)");
  }
  out.trained = params.epochs > 0;
  return out;
}

enum class SeparationPass { kSingle, kDenoised };

struct StemEstimate {
  Waveform vocal;
  Waveform accompaniment;
  std::string clip_id;
  ImageKind kind = ImageKind::kPhaseRich;
  SeparationPass pass = SeparationPass::kSingle;
  double image_scale = 1.0;         // factor applied to images before encoding
  std::size_t clamped_cells = 0;    // negative magnitudes zeroed during inversion
  double sum_mismatch = 0.0;        // ||(V + N) - M|| / ||M|| in image space
};

inline constexpr double kDefaultInputRms = 0.25;

/// Factor that brings the mixture image to `target_rms` before encoding;
/// estimates are divided by it again before inversion.
inline double input_scale(const SoundImage& img, double target_rms = kDefaultInputRms) {
  const double rms = image_rms(img);
  return rms > 0.0 ? target_rms / rms : 1.0;
}

/// Encodes against a fixed dictionary and decodes through fixed readouts.
/// Both must outlive the separator.
class Separator {
 public:
  Separator(const Dictionary& dict, const ReadoutPair& readouts, const LcaParams& lca,
            double input_rms = kDefaultInputRms)
      : solver_(dict, lca), readouts_(&readouts), input_rms_(input_rms) {
    if (!(readouts.geometry == dict.geometry) || readouts.vocal.rows() != dict.atoms.rows() ||
        readouts.accompaniment.rows() != dict.atoms.rows())
      fail(ErrorKind::kShape, "readouts do not match the coding dictionary");
    if (!readouts.trained && readouts.vocal == dict.atoms && readouts.accompaniment == dict.atoms)
      fail(ErrorKind::kUsage, "readouts are untrained copies of the dictionary; run train-readouts first");
  }

  StemEstimate separate(const Waveform& mix, ImageKind kind, const std::string& clip_id = {}) const {
    check_kind(kind);
    const auto spec = stft(mix, StftConfig::for_kind(kind, mix.size()));
    const SoundImage img = to_sound_image(spec, kind);
    StemEstimate est;
    est.clip_id = clip_id;
    est.kind = kind;
    est.image_scale = input_scale(img, input_rms_);
    const SparseCode code = solver_.encode(est.image_scale * img.data).code;
    SoundImage v{kind, img.config, (1.0 / est.image_scale) * reconstruct(readouts_->vocal, code)};
    SoundImage n{kind, img.config, (1.0 / est.image_scale) * reconstruct(readouts_->accompaniment, code)};
    const double mix_norm = std::sqrt(img.data.squared_norm());
    est.sum_mismatch = mix_norm > 0.0 ? std::sqrt(((v.data + n.data) - img.data).squared_norm()) / mix_norm : 0.0;
    auto inv_v = image_to_waveform(v, &spec);
    auto inv_n = image_to_waveform(n, &spec);
    est.vocal = std::move(inv_v.waveform);
    est.accompaniment = std::move(inv_n.waveform);
    est.clamped_cells = inv_v.clamped_cells + inv_n.clamped_cells;
    return est;
  }

  /// Second pass: each estimated stem is re-encoded and decoded through its
  /// own readout only, at the scale used for the first pass.
  StemEstimate denoise(const StemEstimate& est) const {
    if (est.pass == SeparationPass::kDenoised) fail(ErrorKind::kUsage, "stems were already denoised");
    check_kind(est.kind);
    StemEstimate out = est;
    out.pass = SeparationPass::kDenoised;
    out.clamped_cells = 0;
    auto redo = [&](const Waveform& stem, const AtomMatrix& readout) {
      const auto spec = stft(stem, StftConfig::for_kind(est.kind, stem.size()));
      const SoundImage img = to_sound_image(spec, est.kind);
      const SparseCode code = solver_.encode(est.image_scale * img.data).code;
      const SoundImage clean{est.kind, img.config, (1.0 / est.image_scale) * reconstruct(readout, code)};
      auto inv = image_to_waveform(clean, &spec);
      out.clamped_cells += inv.clamped_cells;
      return std::move(inv.waveform);
    };
    out.vocal = redo(est.vocal, readouts_->vocal);
    out.accompaniment = redo(est.accompaniment, readouts_->accompaniment);
    return out;
  }

 private:
  void check_kind(ImageKind kind) const {
    if (kind != readouts_->kind || image_channels(kind) != readouts_->geometry.channels)
      fail(ErrorKind::kRepresentation, std::string("separator was trained for '") + kind_name(readouts_->kind) +
                                           "', got '" + kind_name(kind) + "'");
  }

  LcaSolver solver_;
  const ReadoutPair* readouts_;
  double input_rms_;
};

inline StemEstimate separate(const Waveform& mix, ImageKind kind, const Dictionary& dict, const ReadoutPair& readouts,
                             const LcaParams& lca, const std::string& clip_id = {},
                             double input_rms = kDefaultInputRms) {
  return Separator(dict, readouts, lca, input_rms).separate(mix, kind, clip_id);
}

inline StemEstimate denoise_pass(const StemEstimate& est, const Dictionary& dict, const ReadoutPair& readouts,
                                 const LcaParams& lca, double input_rms = kDefaultInputRms) {
  return Separator(dict, readouts, lca, input_rms).denoise(est);
}

inline ReadoutPair readouts_from_files(const AtomBankFile& vocal, const AtomBankFile& accomp) {
  if (vocal.role != AtomRole::kVocalReadout || accomp.role != AtomRole::kAccompanimentReadout)
    fail(ErrorKind::kFormat, "readout files have the wrong roles");
  if (!(vocal.dictionary.geometry == accomp.dictionary.geometry) || vocal.dictionary.kind != accomp.dictionary.kind)
    fail(ErrorKind::kFormat, "readout files disagree on geometry");
  return {vocal.dictionary.geometry, vocal.dictionary.kind, vocal.dictionary.atoms, accomp.dictionary.atoms,
          vocal.trained && accomp.trained};
}

}  // namespace sparsesep
