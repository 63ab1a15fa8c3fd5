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

// Convolutional sparse inference with Locally Competitive Algorithm dynamics.
//
// A dictionary atom spans every channel and frequency bin of the sound image
// and `patch_frames` consecutive time frames. Atom i placed at position p
// covers frames [p * stride, p * stride + patch_frames). Only positions where
// the whole patch fits are used, so the reconstruction has no boundary terms.
//
// Atom rows are laid out (channel, bin, frame-in-patch) with the frame index
// fastest, matching the im2col columns below.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparsesep/binary_io.hpp"
#include "sparsesep/error.hpp"
#include "sparsesep/spectral.hpp"
#include "sparsesep/tensor.hpp"

namespace sparsesep {

using AtomMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PatchGeometry {
  std::size_t channels = 1;
  std::size_t n_freq_bins = 1;
  std::size_t patch_frames = 1;
  std::size_t stride = 1;

  std::size_t patch_dim() const { return channels * n_freq_bins * patch_frames; }

  std::size_t n_positions(std::size_t n_frames) const {
    return n_frames < patch_frames ? 0 : (n_frames - patch_frames) / stride + 1;
  }

  /// Largest position offset at which two placed atoms still overlap.
  std::size_t max_overlap_shift() const { return (patch_frames - 1) / stride; }

  void validate() const {
    require(channels >= 1 && n_freq_bins >= 1 && patch_frames >= 1 && stride >= 1, ErrorKind::kShape,
            "patch geometry dimensions must be >= 1");
  }

  bool operator==(const PatchGeometry&) const = default;
};

struct Dictionary {
  PatchGeometry geometry;
  ImageKind kind = ImageKind::kPhaseRich;
  AtomMatrix atoms;  // n_features x patch_dim

  std::size_t n_features() const { return static_cast<std::size_t>(atoms.rows()); }

  double max_norm_deviation() const {
    if (atoms.rows() == 0) return 0.0;
    return (atoms.rowwise().norm().array() - 1.0).abs().maxCoeff();
  }
};

struct SparseCode {
  PatchGeometry geometry;
  std::size_t n_frames = 0;  // time frames of the image the code describes
  Eigen::MatrixXd a;         // n_features x n_positions

  std::size_t nonzeros() const { return static_cast<std::size_t>((a.array() != 0.0).count()); }
  double l1() const { return a.cwiseAbs().sum(); }
};

struct LcaParams {
  double lambda = 0.625;
  std::size_t n_steps = 1000;
  double dt_over_tau = 0.05;
  bool record_energy = false;

  enum class Lateral { kAuto, kGram, kCorrelate };
  Lateral lateral = Lateral::kAuto;

  void validate() const {
    require(lambda > 0.0, ErrorKind::kPrecondition, "lambda must be > 0");
    require(n_steps >= 1, ErrorKind::kPrecondition, "n_steps must be >= 1");
    require(dt_over_tau > 0.0 && dt_over_tau <= 1.0, ErrorKind::kPrecondition, "dt_over_tau must be in (0, 1]");
  }
};

inline double soft_threshold(double u, double lambda) {
  if (u > lambda) return u - lambda;
  if (u < -lambda) return u + lambda;
  return 0.0;
}

template <typename Derived>
Eigen::MatrixXd soft_threshold(const Eigen::MatrixBase<Derived>& u, double lambda) {
  return u.unaryExpr([lambda](double x) { return soft_threshold(x, lambda); });
}

inline double sparsity(const SparseCode& code) {
  const auto total = static_cast<double>(code.a.size());
  return total == 0.0 ? 0.0 : static_cast<double>(code.nonzeros()) / total;
}

inline void check_image_geometry(const Tensor3& image, const PatchGeometry& g) {
  if (image.channels != g.channels || image.rows != g.n_freq_bins)
    fail(ErrorKind::kShape, "image is " + std::to_string(image.channels) + "x" + std::to_string(image.rows) +
                                ", dictionary expects " + std::to_string(g.channels) + "x" +
                                std::to_string(g.n_freq_bins));
  if (g.n_positions(image.cols) == 0) fail(ErrorKind::kShape, "image shorter than one patch");
}

/// Patch matrix: column p holds the patch at position p in atom-row layout.
inline Eigen::MatrixXd im2col(const Tensor3& image, const PatchGeometry& g) {
  check_image_geometry(image, g);
  const std::size_t n_pos = g.n_positions(image.cols);
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(g.patch_dim()), static_cast<Eigen::Index>(n_pos));
  const std::size_t cf_count = g.channels * g.n_freq_bins;
  for (std::size_t p = 0; p < n_pos; ++p) {
    double* dst = cols.col(static_cast<Eigen::Index>(p)).data();
    for (std::size_t cf = 0; cf < cf_count; ++cf) {
      const double* src = image.values.data() + cf * image.cols + p * g.stride;
      std::copy(src, src + g.patch_frames, dst + cf * g.patch_frames);
    }
  }
  return cols;
}

/// Correlation of every atom with every patch: b = Phi^T * I.
inline Eigen::MatrixXd correlate(const AtomMatrix& atoms, const PatchGeometry& g, const Tensor3& image) {
  require(static_cast<std::size_t>(atoms.cols()) == g.patch_dim(), ErrorKind::kShape, "atom width != patch_dim");
  return atoms * im2col(image, g);
}

inline void add_atom(Tensor3& image, const PatchGeometry& g, const double* atom, std::size_t position, double scale) {
  const std::size_t cf_count = g.channels * g.n_freq_bins;
  for (std::size_t cf = 0; cf < cf_count; ++cf) {
    double* dst = image.values.data() + cf * image.cols + position * g.stride;
    const double* src = atom + cf * g.patch_frames;
    for (std::size_t k = 0; k < g.patch_frames; ++k) dst[k] += scale * src[k];
  }
}

/// Transpose convolution Phi * a: each nonzero coefficient adds its atom at
/// its position. Works for any atom bank sharing the code's geometry
/// (coding dictionary or readout weights).
inline Tensor3 reconstruct(const AtomMatrix& atoms, const SparseCode& code) {
  const auto& g = code.geometry;
  if (static_cast<std::size_t>(atoms.cols()) != g.patch_dim() || atoms.rows() != code.a.rows())
    fail(ErrorKind::kShape, "reconstruct: atom bank does not match code geometry");
  if (static_cast<std::size_t>(code.a.cols()) != g.n_positions(code.n_frames))
    fail(ErrorKind::kShape, "reconstruct: position count does not match frame count");
  Tensor3 out(g.channels, g.n_freq_bins, code.n_frames);
  for (Eigen::Index p = 0; p < code.a.cols(); ++p)
    for (Eigen::Index i = 0; i < code.a.rows(); ++i)
      if (const double v = code.a(i, p); v != 0.0)
        add_atom(out, g, atoms.row(i).data(), static_cast<std::size_t>(p), v);
  return out;
}

inline Tensor3 reconstruct(const Dictionary& dict, const SparseCode& code) {
  if (!(dict.geometry == code.geometry)) fail(ErrorKind::kShape, "reconstruct: dictionary/code geometry mismatch");
  return reconstruct(dict.atoms, code);
}

/// 1/2 ||I - Phi a||^2 + lambda ||a||_1
inline double energy(const Tensor3& image, const Dictionary& dict, const SparseCode& code, double lambda) {
  if (!image.same_shape(Tensor3(dict.geometry.channels, dict.geometry.n_freq_bins, code.n_frames)))
    fail(ErrorKind::kShape, "energy: image shape does not match code");
  const Tensor3 residual = image - reconstruct(dict, code);
  return 0.5 * residual.squared_norm() + lambda * code.l1();
}

inline double energy(const SoundImage& img, const Dictionary& dict, const SparseCode& code, double lambda) {
  return energy(img.data, dict, code, lambda);
}

/// Convolutional Gram operator. shifts[d + D][:, j] holds the inner products
/// of every atom at position p with atom j placed at position p + d, for
/// |d| <= D = max_overlap_shift().
class GramOperator {
 public:
  GramOperator() = default;

  explicit GramOperator(const Dictionary& dict) : max_shift_(dict.geometry.max_overlap_shift()) {
    const auto& g = dict.geometry;
    const auto n = static_cast<Eigen::Index>(dict.n_features());
    const auto cf_count = static_cast<Eigen::Index>(g.channels * g.n_freq_bins);
    const auto frames = static_cast<Eigen::Index>(g.patch_frames);
    // One (n x channels*bins) slice per frame-in-patch.
    std::vector<Eigen::MatrixXd> slices(g.patch_frames, Eigen::MatrixXd(n, cf_count));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index cf = 0; cf < cf_count; ++cf)
        for (Eigen::Index k = 0; k < frames; ++k) slices[static_cast<std::size_t>(k)](i, cf) = dict.atoms(i, cf * frames + k);

    shifts_.assign(2 * max_shift_ + 1, Eigen::MatrixXd::Zero(n, n));
    for (std::size_t d = 0; d <= max_shift_; ++d) {
      Eigen::MatrixXd& gd = shifts_[max_shift_ + d];
      const std::size_t offset = d * g.stride;
      for (std::size_t k = 0; k + offset < g.patch_frames; ++k)
        gd.noalias() += slices[k + offset] * slices[k].transpose();
      if (d > 0) shifts_[max_shift_ - d] = gd.transpose();
    }
  }

  static std::size_t bytes_required(const Dictionary& dict) {
    const std::size_t n = dict.n_features();
    return n * n * (2 * dict.geometry.max_overlap_shift() + 1) * sizeof(double);
  }

  /// G * a including the diagonal (self) term.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& a) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    const auto n_pos = a.cols();
    const auto dmax = static_cast<Eigen::Index>(max_shift_);
    const auto nnz = (a.array() != 0.0).count();
    if (nnz * 16 > a.size()) {
      // Dense enough that blocked products beat per-coefficient updates.
      for (Eigen::Index d = -dmax; d <= dmax; ++d) {
        const Eigen::Index width = n_pos - std::abs(d);
        if (width <= 0) continue;
        const Eigen::Index dst = d >= 0 ? 0 : -d;
        out.middleCols(dst, width).noalias() +=
            shifts_[static_cast<std::size_t>(d + dmax)] * a.middleCols(dst + d, width);
      }
      return out;
    }
    for (Eigen::Index q = 0; q < n_pos; ++q) {
      const double* col = a.col(q).data();
      for (Eigen::Index j = 0; j < a.rows(); ++j) {
        const double v = col[j];
        if (v == 0.0) continue;
        const Eigen::Index lo = std::max<Eigen::Index>(-dmax, q - n_pos + 1);
        const Eigen::Index hi = std::min<Eigen::Index>(dmax, q);
        for (Eigen::Index d = lo; d <= hi; ++d)
          out.col(q - d).noalias() += v * shifts_[static_cast<std::size_t>(d + dmax)].col(j);
      }
    }
    return out;
  }

  const std::vector<Eigen::MatrixXd>& shifts() const { return shifts_; }

 private:
  std::size_t max_shift_ = 0;
  std::vector<Eigen::MatrixXd> shifts_;
};

struct LcaResult {
  SparseCode code;
  Eigen::MatrixXd potentials;
  std::vector<double> energy_trace;  // energy after 0, 1, ..., n_steps steps
};

/// Holds everything that depends only on the dictionary, so repeated
/// encodes against a fixed dictionary share one Gram operator. The
/// dictionary must outlive the solver and stay unchanged while in use.
class LcaSolver {
 public:
  static constexpr std::size_t kGramBudgetBytes = std::size_t{256} << 20;
  static constexpr double kNormTolerance = 1e-6;

  LcaSolver(const Dictionary& dict, LcaParams params) : dict_(&dict), params_(params) {
    params_.validate();
    dict.geometry.validate();
    require(static_cast<std::size_t>(dict.atoms.cols()) == dict.geometry.patch_dim(), ErrorKind::kShape,
            "dictionary atom width != patch_dim");
    if (dict.max_norm_deviation() > kNormTolerance)
      fail(ErrorKind::kPrecondition, "dictionary atoms are not unit-norm");
    use_gram_ = params_.lateral == LcaParams::Lateral::kGram ||
                (params_.lateral == LcaParams::Lateral::kAuto &&
                 GramOperator::bytes_required(dict) <= kGramBudgetBytes);
    if (use_gram_) gram_ = GramOperator(dict);
  }

  bool uses_gram() const { return use_gram_; }
  const LcaParams& params() const { return params_; }
  const Dictionary& dictionary() const { return *dict_; }

  LcaResult encode(const Tensor3& image) const {
    const auto& dict = *dict_;
    const auto& g = dict.geometry;
    check_image_geometry(image, g);
    const Eigen::MatrixXd b = correlate(dict.atoms, g, image);
    const double lambda = params_.lambda;
    const double dt = params_.dt_over_tau;
    const double input_sq = image.squared_norm();

    LcaResult out;
    out.code.geometry = g;
    out.code.n_frames = image.cols;
    Eigen::MatrixXd& u = out.potentials;
    u = Eigen::MatrixXd::Zero(b.rows(), b.cols());
    Eigen::MatrixXd a = u;
    Eigen::MatrixXd lateral;
    SparseCode scratch{g, image.cols, {}};

    // Computes (G - I) a for the current a and returns ||I - Phi a||^2.
    auto interact = [&]() {
      if (use_gram_) {
        const Eigen::MatrixXd ga = gram_.apply(a);
        lateral = ga - a;
        const double sq = input_sq - 2.0 * a.cwiseProduct(b).sum() + a.cwiseProduct(ga).sum();
        return std::max(sq, 0.0);
      }
      scratch.a = a;
      const Tensor3 residual = image - reconstruct(dict.atoms, scratch);
      lateral = b - correlate(dict.atoms, g, residual) - a;
      return residual.squared_norm();
    };

    if (params_.record_energy) out.energy_trace.reserve(params_.n_steps + 1);
    for (std::size_t step = 0; step < params_.n_steps; ++step) {
      const double residual_sq = interact();
      if (params_.record_energy) out.energy_trace.push_back(0.5 * residual_sq + lambda * a.cwiseAbs().sum());
      u += dt * (b - u - lateral);
      if (!u.allFinite())
        fail(ErrorKind::kDivergence, "LCA state became non-finite at step " + std::to_string(step + 1) +
                                         " (dt_over_tau too large?)");
      a = soft_threshold(u, lambda);
    }
    if (params_.record_energy) {
      const double residual_sq = interact();
      out.energy_trace.push_back(0.5 * residual_sq + lambda * a.cwiseAbs().sum());
    }
    out.code.a = std::move(a);
    return out;
  }

  LcaResult encode(const SoundImage& img) const { return encode(img.data); }

 private:
  const Dictionary* dict_;
  LcaParams params_;
  bool use_gram_ = false;
  GramOperator gram_;
};

inline LcaResult lca_encode(const Tensor3& image, const Dictionary& dict, const LcaParams& params) {
  return LcaSolver(dict, params).encode(image);
}

inline LcaResult lca_encode(const SoundImage& img, const Dictionary& dict, const LcaParams& params) {
  return lca_encode(img.data, dict, params);
}

// Sparse code file: "SSCD" | u32 version | u64 config_hash | u32 n_features
// | u32 n_positions | u32 n_frames | u32 channels | u32 n_freq_bins
// | u32 patch_frames | u32 stride | u64 nnz | nnz x (u32 feature,
// u32 position, f32 value), sorted by position then feature.
inline constexpr std::uint32_t kCodeFormatVersion = 1;

inline std::vector<std::uint8_t> encode_sparse_code(const SparseCode& code, std::uint64_t config_hash = 0) {
  ByteWriter w;
  w.put_bytes("SSCD");
  w.put<std::uint32_t>(kCodeFormatVersion);
  w.put<std::uint64_t>(config_hash);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.a.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.a.cols()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.n_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.geometry.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.geometry.n_freq_bins));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.geometry.patch_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(code.geometry.stride));
  w.put<std::uint64_t>(code.nonzeros());
  for (Eigen::Index p = 0; p < code.a.cols(); ++p)
    for (Eigen::Index i = 0; i < code.a.rows(); ++i)
      if (const double v = code.a(i, p); v != 0.0) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p));
        w.put<float>(static_cast<float>(v));
      }
  return std::move(w.bytes());
}

inline SparseCode decode_sparse_code(const std::vector<std::uint8_t>& bytes, const std::string& source,
                                     std::uint64_t* config_hash = nullptr) {
  ByteReader r(bytes.data(), bytes.size(), source);
  if (r.get_bytes(4) != "SSCD") fail(ErrorKind::kFormat, source + ": bad magic (not a sparse code)");
  if (r.get<std::uint32_t>() != kCodeFormatVersion) fail(ErrorKind::kFormat, source + ": unsupported version");
  const auto hash = r.get<std::uint64_t>();
  if (config_hash) *config_hash = hash;
  const auto n_features = r.get<std::uint32_t>();
  const auto n_positions = r.get<std::uint32_t>();
  SparseCode code;
  code.n_frames = r.get<std::uint32_t>();
  code.geometry.channels = r.get<std::uint32_t>();
  code.geometry.n_freq_bins = r.get<std::uint32_t>();
  code.geometry.patch_frames = r.get<std::uint32_t>();
  code.geometry.stride = r.get<std::uint32_t>();
  if (code.geometry.channels == 0 || code.geometry.n_freq_bins == 0 || code.geometry.patch_frames == 0 ||
      code.geometry.stride == 0 || code.geometry.n_positions(code.n_frames) != n_positions)
    fail(ErrorKind::kFormat, source + ": inconsistent geometry");
  const auto nnz = r.get<std::uint64_t>();
  if (r.remaining() != nnz * 12) fail(ErrorKind::kFormat, source + ": payload size mismatch");
  code.a = Eigen::MatrixXd::Zero(n_features, n_positions);
  std::uint64_t prev = 0;
  for (std::uint64_t k = 0; k < nnz; ++k) {
    const auto i = r.get<std::uint32_t>();
    const auto p = r.get<std::uint32_t>();
    const auto v = r.get<float>();
    if (i >= n_features || p >= n_positions) fail(ErrorKind::kFormat, source + ": triplet out of range");
    const std::uint64_t key = std::uint64_t{p} * n_features + i;
    if (k > 0 && key <= prev) fail(ErrorKind::kFormat, source + ": triplets not sorted by (position, feature)");
    prev = key;
    code.a(i, p) = v;
  }
  return code;
}

inline void write_sparse_code(const std::string& path, const SparseCode& code, std::uint64_t config_hash = 0) {
  write_file_bytes(path, encode_sparse_code(code, config_hash));
}

inline SparseCode read_sparse_code(const std::string& path, std::uint64_t* config_hash = nullptr) {
  return decode_sparse_code(read_file_bytes(path), path, config_hash);
}

}  // namespace sparsesep
