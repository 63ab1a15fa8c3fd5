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

// Synthetic two-stem karaoke clips for tests and demos when the real corpus
// is not at hand: a sung melody (harmonic voice with vibrato, glides and
// vowel formants) over a chord/bass/drum accompaniment. Stereo layout
// matches load_clip_pair: accompaniment left, vocal right.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sparsesep/audio_io.hpp"

namespace sparsesep::synthetic {

namespace detail {

inline double midi_to_hz(double m) { return 440.0 * std::pow(2.0, (m - 69.0) / 12.0); }

// Two-pole resonance gain at frequency f for a formant centred at fc.
inline double formant_gain(double f, double fc, double bw) {
  const double x = (f - fc) / bw;
  return 1.0 / (1.0 + x * x);
}

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

}  // namespace detail

struct SynthOptions {
  double min_seconds = 4.0;
  double max_seconds = 6.0;
  double vocal_peak = 0.6;
  double accompaniment_peak = 0.6;
};

inline std::vector<double> synth_vocal(std::size_t n, std::mt19937_64& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double sr = kSampleRate;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  static constexpr int kScale[] = {0, 2, 4, 5, 7, 9, 11};
  static constexpr double kVowels[][2] = {{730, 1090}, {530, 1840}, {270, 2290}, {570, 840}, {440, 1020}};
  const double tonic = 52.0 + std::floor(uni(rng) * 12.0);  // E3..D#4, male to female range

  std::vector<double> out(n, 0.0);
  std::vector<double> phase(24, 0.0);
  double pos = 0.0;
  double prev_pitch = tonic + 7.0;
  int degree = 4;
  const double vib_rate = 5.0 + uni(rng) * 1.5;
  double vib_phase = 0.0;
  while (pos < static_cast<double>(n)) {
    const double dur = (0.2 + 0.5 * uni(rng)) * sr;
    const bool rest = uni(rng) < 0.15;
    degree = std::clamp(degree + static_cast<int>(std::floor(uni(rng) * 5.0)) - 2, 0, 13);
    const double pitch = tonic + 12.0 * (degree / 7) + kScale[degree % 7];
    const auto& vowel = kVowels[static_cast<std::size_t>(uni(rng) * 5.0) % 5];
    const double vib_depth = 0.15 + 0.3 * uni(rng);
    const double loud = 0.6 + 0.4 * uni(rng);
    const std::size_t start = static_cast<std::size_t>(pos);
    const std::size_t end = std::min(n, static_cast<std::size_t>(pos + dur));
    for (std::size_t i = start; i < end; ++i) {
      const double t = static_cast<double>(i - start) / sr;
      const double len = static_cast<double>(end - start) / sr;
      const double glide = std::min(1.0, t / 0.04);
      vib_phase += kTwoPi * vib_rate / sr;
      const double vib = vib_depth * std::min(1.0, t / 0.15) * std::sin(vib_phase);
      const double m = prev_pitch + (pitch - prev_pitch) * glide + vib;
      const double f0 = detail::midi_to_hz(m);
      double env = std::min(1.0, t / 0.03) * std::min(1.0, (len - t) / 0.05);
      if (rest) env = 0.0;
      double s = 0.0;
      for (std::size_t h = 1; h <= phase.size(); ++h) {
        const double fh = f0 * static_cast<double>(h);
        if (fh > 7000.0) break;
        phase[h - 1] += kTwoPi * fh / sr;
        if (phase[h - 1] > kTwoPi) phase[h - 1] -= kTwoPi;
        const double gain = (detail::formant_gain(fh, vowel[0], 120.0) + 0.7 * detail::formant_gain(fh, vowel[1], 180.0) +
                             0.3 * detail::formant_gain(fh, 2800.0, 300.0) + 0.05) /
                            std::sqrt(static_cast<double>(h));
        s += gain * std::sin(phase[h - 1]);
      }
      out[i] = loud * env * s;
    }
    if (!rest) prev_pitch = pitch;
    pos += dur;
  }
  return out;
}

inline std::vector<double> synth_accompaniment(std::size_t n, std::mt19937_64& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double sr = kSampleRate;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  static constexpr int kProgressions[][4] = {{0, 5, 3, 4}, {0, 3, 4, 4}, {5, 3, 0, 4}, {0, 4, 5, 3}};
  static constexpr int kMajor[] = {0, 2, 4, 5, 7, 9, 11};
  const double key = 43.0 + std::floor(uni(rng) * 12.0);
  const auto& prog = kProgressions[static_cast<std::size_t>(uni(rng) * 4.0) % 4];
  const double beat = sr * (0.4 + 0.2 * uni(rng));
  const double bar = 4.0 * beat;

  std::vector<double> out(n, 0.0);
  auto pluck = [&](std::size_t start, double midi, double amp, double decay, int harmonics) {
    const double f0 = detail::midi_to_hz(midi);
    const std::size_t len = std::min(n - std::min(n, start), static_cast<std::size_t>(decay * 5.0 * sr));
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / sr;
      double s = 0.0;
      for (int h = 1; h <= harmonics; ++h) {
        const double fh = f0 * h;
        if (fh > 7500.0) break;
        s += std::sin(kTwoPi * fh * t) * std::exp(-t * h / decay) / h;
      }
      out[start + i] += amp * std::min(1.0, t / 0.005) * s;
    }
  };
  for (double t0 = 0.0; t0 < static_cast<double>(n); t0 += bar) {
    const int chord = prog[static_cast<std::size_t>(t0 / bar) % 4];
    const double root = key + kMajor[chord % 7];
    const double third = key + kMajor[(chord + 2) % 7] + ((chord + 2) >= 7 ? 12 : 0);
    const double fifth = key + kMajor[(chord + 4) % 7] + ((chord + 4) >= 7 ? 12 : 0);
    for (int b = 0; b < 4; ++b) {
      const auto start = static_cast<std::size_t>(t0 + b * beat);
      if (start >= n) break;
      // Chord stabs an octave above the bass, bass on the root.
      for (double m : {root + 12.0, third + 12.0, fifth + 12.0}) pluck(start, m, 0.25, 0.35, 10);
      pluck(start, root - 12.0 + (b == 2 ? 7.0 : 0.0), 0.5, 0.5, 6);
      // Kick on 1 and 3, hi-hat on every off-beat.
      if (b % 2 == 0) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(0.25 * sr) && start + i < n; ++i) {
          const double t = static_cast<double>(i) / sr;
          const double f = 50.0 + 90.0 * std::exp(-t * 30.0);
          out[start + i] += 0.8 * std::exp(-t * 12.0) * std::sin(kTwoPi * f * t);
        }
      }
      const auto hat = static_cast<std::size_t>(static_cast<double>(start) + beat / 2.0);
      double prev = 0.0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(0.06 * sr) && hat + i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double w = gauss(rng);
        out[hat + i] += 0.15 * std::exp(-t * 60.0) * (w - prev);
        prev = w;
      }
    }
  }
  return out;
}

/// Deterministic under (seed): same seed, same clip.
inline ClipPair synth_clip(const std::string& clip_id, std::uint64_t seed, const SynthOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double seconds = opt.min_seconds + (opt.max_seconds - opt.min_seconds) * uni(rng);
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  ClipPair clip;
  clip.clip_id = clip_id;
  clip.vocal = {synth_vocal(n, rng), kSampleRate};
  clip.accompaniment = {synth_accompaniment(n, rng), kSampleRate};
  detail::normalize_peak(clip.vocal.samples, opt.vocal_peak);
  detail::normalize_peak(clip.accompaniment.samples, opt.accompaniment_peak);
  return clip;
}

inline std::vector<ClipPair> synth_dataset(std::size_t n_clips, std::uint64_t seed, const SynthOptions& opt = {}) {
  std::vector<ClipPair> clips;
  clips.reserve(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%04zu", i + 1);
    clips.push_back(synth_clip(id, seed * 1000003ull + i, opt));
  }
  return clips;
}

}  // namespace sparsesep::synthetic
