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

// Short-time Fourier analysis and the three "sound image" representations.
//
// Bin layout: an N-point real DFT has N/2 + 1 bins, of which DC and Nyquist
// are purely real. The N/2 retained bins store DC in bin 0's real part and
// Nyquist in bin 0's imaginary part, so N/2 complex values hold exactly the
// N real degrees of freedom of a frame and inversion stays exact.

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/binary_io.hpp"
#include "sparsesep/error.hpp"
#include "sparsesep/tensor.hpp"

namespace sparsesep {

enum class ImageKind : std::uint32_t { kPhaseRich = 0, kMagnitude = 1, kMagnitudeDouble = 2 };

inline const char* kind_name(ImageKind kind) {
  switch (kind) {
    case ImageKind::kPhaseRich: return "phase";
    case ImageKind::kMagnitude: return "nophase";
    case ImageKind::kMagnitudeDouble: return "nophasex2";
  }
  return "?";
}

inline ImageKind kind_from_name(const std::string& name) {
  if (name == "phase") return ImageKind::kPhaseRich;
  if (name == "nophase") return ImageKind::kMagnitude;
  if (name == "nophasex2") return ImageKind::kMagnitudeDouble;
  fail(ErrorKind::kRepresentation, "unknown representation '" + name + "'");
}

inline std::size_t image_channels(ImageKind kind) { return kind == ImageKind::kPhaseRich ? 2 : 1; }
inline std::size_t fft_size_for(ImageKind kind) { return kind == ImageKind::kMagnitudeDouble ? 1024 : 512; }

struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t hop = 256;
  std::size_t n_freq_bins = 256;
  std::size_t n_time_frames = 128;
  std::size_t signal_length = 32000;

  /// 50% overlap, N/2 bins, and enough frames (rounded up to a power of two)
  /// for centred frames to cover the whole signal: 128 frames for 512 points
  /// over 2 s, 64 frames for 1024 points.
  static StftConfig for_fft(std::size_t fft_size, std::size_t signal_length = 32000) {
    StftConfig c;
    c.fft_size = fft_size;
    c.hop = fft_size / 2;
    c.n_freq_bins = fft_size / 2;
    c.signal_length = signal_length;
    const std::size_t needed = 1 + (signal_length + c.hop - 1) / c.hop;
    c.n_time_frames = std::bit_ceil(needed);
    c.validate();
    return c;
  }

  static StftConfig for_kind(ImageKind kind, std::size_t signal_length = 32000) {
    return for_fft(fft_size_for(kind), signal_length);
  }

  std::size_t left_pad() const { return fft_size / 2; }
  std::size_t padded_length() const { return (n_time_frames - 1) * hop + fft_size; }

  void validate() const {
    require(fft_size >= 4 && std::has_single_bit(fft_size), ErrorKind::kShape, "fft_size must be a power of two");
    require(hop * 2 == fft_size, ErrorKind::kShape, "hop must be fft_size / 2");
    require(n_freq_bins * 2 == fft_size, ErrorKind::kShape, "n_freq_bins must be fft_size / 2");
    require(n_time_frames >= 1 && signal_length >= 2, ErrorKind::kShape, "empty STFT geometry");
    require(padded_length() >= signal_length + left_pad(), ErrorKind::kShape, "frames do not cover the signal");
    require(padded_length() - signal_length - left_pad() < signal_length, ErrorKind::kShape,
            "signal too short for reflection padding");
  }

  bool operator==(const StftConfig&) const = default;
};

struct ComplexSpectrogram {
  StftConfig config;
  std::vector<std::complex<double>> values;  // [bin * n_time_frames + frame]

  std::complex<double>& at(std::size_t bin, std::size_t frame) { return values[bin * config.n_time_frames + frame]; }
  const std::complex<double>& at(std::size_t bin, std::size_t frame) const {
    return values[bin * config.n_time_frames + frame];
  }
};

struct SoundImage {
  ImageKind kind = ImageKind::kPhaseRich;
  StftConfig config;
  Tensor3 data;  // channels x n_freq_bins x n_time_frames
};

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

namespace detail {

inline std::size_t reflect_index(std::ptrdiff_t j, std::size_t length) {
  const auto n = static_cast<std::ptrdiff_t>(length);
  while (j < 0 || j >= n) {
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
  }
  return static_cast<std::size_t>(j);
}

}  // namespace detail

inline ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != kSampleRate)
    fail(ErrorKind::kShape, "stft: sample rate " + std::to_string(w.sample_rate) + " != 16000");
  if (w.size() != cfg.signal_length)
    fail(ErrorKind::kShape, "stft: waveform has " + std::to_string(w.size()) + " samples, expected " +
                                std::to_string(cfg.signal_length));

  const std::size_t n = cfg.fft_size;
  const auto window = hann_window(n);
  ComplexSpectrogram out;
  out.config = cfg;
  out.values.assign(cfg.n_freq_bins * cfg.n_time_frames, {});

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec;
  const auto left = static_cast<std::ptrdiff_t>(cfg.left_pad());
  for (std::size_t t = 0; t < cfg.n_time_frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop) - left;
    for (std::size_t i = 0; i < n; ++i)
      frame[i] = window[i] * w.samples[detail::reflect_index(start + static_cast<std::ptrdiff_t>(i), w.size())];
    fft.fwd(spec, frame);
    out.at(0, t) = {spec[0].real(), spec[n / 2].real()};
    for (std::size_t k = 1; k < cfg.n_freq_bins; ++k) out.at(k, t) = spec[k];
  }
  return out;
}

/// Weighted overlap-add inverse: each frame is re-windowed and the sum is
/// divided by the summed squared window, which inverts stft exactly.
inline Waveform istft(const ComplexSpectrogram& s) {
  const auto& cfg = s.config;
  cfg.validate();
  require(s.values.size() == cfg.n_freq_bins * cfg.n_time_frames, ErrorKind::kShape, "istft: value count mismatch");
  const std::size_t n = cfg.fft_size;
  const auto window = hann_window(n);
  std::vector<double> acc(cfg.padded_length(), 0.0), norm(cfg.padded_length(), 0.0);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < cfg.n_time_frames; ++t) {
    spec[0] = {s.at(0, t).real(), 0.0};
    spec[n / 2] = {s.at(0, t).imag(), 0.0};
    for (std::size_t k = 1; k < cfg.n_freq_bins; ++k) spec[k] = s.at(k, t);
    fft.inv(frame, spec, static_cast<Eigen::Index>(n));
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[start + i] += window[i] * frame[i];
      norm[start + i] += window[i] * window[i];
    }
  }
  Waveform out{std::vector<double>(cfg.signal_length), kSampleRate};
  const std::size_t left = cfg.left_pad();
  for (std::size_t i = 0; i < cfg.signal_length; ++i) {
    const double d = norm[left + i];
    out.samples[i] = d > 1e-10 ? acc[left + i] / d : 0.0;
  }
  return out;
}

inline void check_kind_config(ImageKind kind, const StftConfig& cfg) {
  if (cfg.fft_size != fft_size_for(kind))
    fail(ErrorKind::kRepresentation, std::string("representation '") + kind_name(kind) + "' needs fft_size " +
                                         std::to_string(fft_size_for(kind)) + ", got " +
                                         std::to_string(cfg.fft_size));
}

inline SoundImage to_sound_image(const ComplexSpectrogram& s, ImageKind kind) {
  check_kind_config(kind, s.config);
  const auto& cfg = s.config;
  SoundImage img{kind, cfg, Tensor3(image_channels(kind), cfg.n_freq_bins, cfg.n_time_frames)};
  for (std::size_t k = 0; k < cfg.n_freq_bins; ++k) {
    for (std::size_t t = 0; t < cfg.n_time_frames; ++t) {
      const auto z = s.at(k, t);
      if (kind == ImageKind::kPhaseRich) {
        img.data(0, k, t) = z.real();
        img.data(1, k, t) = z.imag();
      } else {
        img.data(0, k, t) = std::abs(z);
      }
    }
  }
  return img;
}

inline SoundImage waveform_to_image(const Waveform& w, ImageKind kind) {
  return to_sound_image(stft(w, StftConfig::for_kind(kind, w.size())), kind);
}

struct Inversion {
  Waveform waveform;
  std::size_t clamped_cells = 0;  // negative magnitudes set to zero
};

inline Inversion image_to_waveform(const SoundImage& img, const ComplexSpectrogram* mixture_phase = nullptr) {
  const auto& cfg = img.config;
  require(img.data.channels == image_channels(img.kind) && img.data.rows == cfg.n_freq_bins &&
              img.data.cols == cfg.n_time_frames,
          ErrorKind::kShape, "image_to_waveform: image shape does not match its config");
  ComplexSpectrogram s{cfg, std::vector<std::complex<double>>(cfg.n_freq_bins * cfg.n_time_frames)};
  Inversion out;
  if (img.kind == ImageKind::kPhaseRich) {
    for (std::size_t k = 0; k < cfg.n_freq_bins; ++k)
      for (std::size_t t = 0; t < cfg.n_time_frames; ++t) s.at(k, t) = {img.data(0, k, t), img.data(1, k, t)};
  } else {
    if (mixture_phase == nullptr)
      fail(ErrorKind::kPhaseRequired, std::string("'") + kind_name(img.kind) + "' image needs a phase source");
    require(mixture_phase->config == cfg, ErrorKind::kShape, "image_to_waveform: phase config mismatch");
    for (std::size_t k = 0; k < cfg.n_freq_bins; ++k) {
      for (std::size_t t = 0; t < cfg.n_time_frames; ++t) {
        double mag = img.data(0, k, t);
        if (mag < 0.0) {
          mag = 0.0;
          ++out.clamped_cells;
        }
        s.at(k, t) = std::polar(mag, std::arg(mixture_phase->at(k, t)));
      }
    }
  }
  out.waveform = istft(s);
  return out;
}

/// Root-mean-square over all image entries.
inline double image_rms(const SoundImage& img) {
  return img.data.size() == 0 ? 0.0 : std::sqrt(img.data.squared_norm() / static_cast<double>(img.data.size()));
}

// Image file: "SSIM" | u32 version | u32 kind | u32 channels | u32 n_freq_bins
// | u32 n_time_frames | u32 fft_size | u32 hop | u32 signal_length
// | u64 config_hash | f32 values (channel-major, row-major), little-endian.
inline constexpr std::uint32_t kImageFormatVersion = 1;

inline std::vector<std::uint8_t> encode_image(const SoundImage& img, std::uint64_t config_hash = 0) {
  ByteWriter w;
  w.put_bytes("SSIM");
  w.put<std::uint32_t>(kImageFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.data.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.config.n_freq_bins));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.config.n_time_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.config.fft_size));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.config.hop));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(img.config.signal_length));
  w.put<std::uint64_t>(config_hash);
  for (double v : img.data.values) w.put<float>(static_cast<float>(v));
  return std::move(w.bytes());
}

inline SoundImage decode_image(const std::vector<std::uint8_t>& bytes, const std::string& source,
                               std::uint64_t* config_hash = nullptr) {
  ByteReader r(bytes.data(), bytes.size(), source);
  if (r.get_bytes(4) != "SSIM") fail(ErrorKind::kFormat, source + ": bad magic (not a sound image)");
  if (r.get<std::uint32_t>() != kImageFormatVersion) fail(ErrorKind::kFormat, source + ": unsupported version");
  const auto kind_raw = r.get<std::uint32_t>();
  if (kind_raw > 2) fail(ErrorKind::kFormat, source + ": bad representation kind");
  SoundImage img;
  img.kind = static_cast<ImageKind>(kind_raw);
  const auto channels = r.get<std::uint32_t>();
  img.config.n_freq_bins = r.get<std::uint32_t>();
  img.config.n_time_frames = r.get<std::uint32_t>();
  img.config.fft_size = r.get<std::uint32_t>();
  img.config.hop = r.get<std::uint32_t>();
  img.config.signal_length = r.get<std::uint32_t>();
  const auto hash = r.get<std::uint64_t>();
  if (config_hash) *config_hash = hash;
  try {
    img.config.validate();
    check_kind_config(img.kind, img.config);
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, source + ": " + e.what());
  }
  if (channels != image_channels(img.kind)) fail(ErrorKind::kFormat, source + ": channel count mismatch");
  img.data = Tensor3(channels, img.config.n_freq_bins, img.config.n_time_frames);
  if (r.remaining() != img.data.size() * 4) fail(ErrorKind::kFormat, source + ": payload size mismatch");
  for (double& v : img.data.values) v = r.get<float>();
  return img;
}

inline void write_image(const std::string& path, const SoundImage& img, std::uint64_t config_hash = 0) {
  write_file_bytes(path, encode_image(img, config_hash));
}

inline SoundImage read_image(const std::string& path, std::uint64_t* config_hash = nullptr) {
  return decode_image(read_file_bytes(path), path, config_hash);
}

}  // namespace sparsesep
