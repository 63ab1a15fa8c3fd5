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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sparsesep/error.hpp"
#include "sparsesep/wav.hpp"

namespace sparsesep {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct ClipPair {
  Waveform vocal;
  Waveform accompaniment;
  std::string clip_id;
};

/// Which stereo channel holds the accompaniment. MIR-1K stores the
/// accompaniment on the left and the singing voice on the right.
enum class ChannelOrder { kAccompanimentLeft, kVocalLeft };

inline std::string clip_id_from_path(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

inline ClipPair clip_pair_from_wav(const wav::WavData& data, const std::string& clip_id,
                                   ChannelOrder order = ChannelOrder::kAccompanimentLeft) {
  if (data.channels.size() != 2)
    fail(ErrorKind::kChannelCount,
         clip_id + ": expected 2 channels, got " + std::to_string(data.channels.size()));
  if (data.sample_rate != kSampleRate)
    fail(ErrorKind::kSampleRate, clip_id + ": expected 16000 Hz, got " + std::to_string(data.sample_rate));
  const bool accomp_left = order == ChannelOrder::kAccompanimentLeft;
  ClipPair clip;
  clip.clip_id = clip_id;
  clip.accompaniment = {data.channels[accomp_left ? 0 : 1], data.sample_rate};
  clip.vocal = {data.channels[accomp_left ? 1 : 0], data.sample_rate};
  return clip;
}

inline ClipPair load_clip_pair(const std::string& path, ChannelOrder order = ChannelOrder::kAccompanimentLeft) {
  return clip_pair_from_wav(wav::read(path), clip_id_from_path(path), order);
}

inline void save_clip_pair(const std::string& path, const ClipPair& clip, wav::SampleFormat format,
                           ChannelOrder order = ChannelOrder::kAccompanimentLeft) {
  wav::WavData data;
  data.sample_rate = clip.vocal.sample_rate;
  data.format = format;
  if (order == ChannelOrder::kAccompanimentLeft)
    data.channels = {clip.accompaniment.samples, clip.vocal.samples};
  else
    data.channels = {clip.vocal.samples, clip.accompaniment.samples};
  wav::write(path, data);
}

inline ClipPair truncate(const ClipPair& clip, double duration_seconds) {
  require(clip.vocal.size() == clip.accompaniment.size(), ErrorKind::kShape, clip.clip_id + ": stem lengths differ");
  const auto n = static_cast<std::size_t>(std::llround(duration_seconds * clip.vocal.sample_rate));
  if (clip.vocal.size() < n)
    fail(ErrorKind::kLength, clip.clip_id + ": clip has " + std::to_string(clip.vocal.size()) +
                                 " samples, need " + std::to_string(n));
  ClipPair out = clip;
  out.vocal.samples.resize(n);
  out.accompaniment.samples.resize(n);
  return out;
}

/// Gain applied to each stem when mixing.
inline constexpr double kMixGain = 0.5;

/// Average of the two stems; the common 0.5 gain keeps the mixture inside
/// [-1, 1] and cancels in every ratio-based metric.
inline Waveform mix_equal(const ClipPair& clip) {
  if (clip.vocal.size() != clip.accompaniment.size())
    fail(ErrorKind::kShape, clip.clip_id + ": stem lengths differ");
  if (clip.vocal.sample_rate != clip.accompaniment.sample_rate)
    fail(ErrorKind::kShape, clip.clip_id + ": stem sample rates differ");
  Waveform mix{std::vector<double>(clip.vocal.size()), clip.vocal.sample_rate};
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix.samples[i] = kMixGain * clip.vocal.samples[i] + kMixGain * clip.accompaniment.samples[i];
  return mix;
}

struct DatasetManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t shuffle_seed = 0;
  ChannelOrder channel_order = ChannelOrder::kAccompanimentLeft;
};

inline DatasetManifest make_split(std::vector<std::string> clip_ids, std::size_t n_train, std::uint64_t seed) {
  if (n_train >= clip_ids.size())
    fail(ErrorKind::kSplit, "n_train (" + std::to_string(n_train) + ") must be below the clip count (" +
                                std::to_string(clip_ids.size()) + ")");
  {
    auto sorted = clip_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorKind::kSplit, "duplicate clip ids");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(clip_ids.begin(), clip_ids.end(), rng);
  DatasetManifest m;
  m.shuffle_seed = seed;
  m.train_ids.assign(clip_ids.begin(), clip_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test_ids.assign(clip_ids.begin() + static_cast<std::ptrdiff_t>(n_train), clip_ids.end());
  return m;
}

// Manifest text format:
//   # sparsesep manifest v1
//   # seed=<u64>
//   # n_train=<count>
//   # channel_order=accomp_left|vocal_left
//   <clip_id>\t<train|test>
inline std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "# sparsesep manifest v1\n";
  os << "# seed=" << m.shuffle_seed << "\n";
  os << "# n_train=" << m.train_ids.size() << "\n";
  os << "# channel_order="
     << (m.channel_order == ChannelOrder::kAccompanimentLeft ? "accomp_left" : "vocal_left") << "\n";
  for (const auto& id : m.train_ids) os << id << "\ttrain\n";
  for (const auto& id : m.test_ids) os << id << "\ttest\n";
  return os.str();
}

inline DatasetManifest parse_manifest(const std::string& text, const std::string& source = "manifest") {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  long long declared_train = -1;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(2, eq - 2);
      std::string value = line.substr(eq + 1);
      if (key == "seed") m.shuffle_seed = std::stoull(value);
      else if (key == "n_train") declared_train = std::stoll(value);
      else if (key == "channel_order") {
        if (value == "accomp_left") m.channel_order = ChannelOrder::kAccompanimentLeft;
        else if (value == "vocal_left") m.channel_order = ChannelOrder::kVocalLeft;
        else fail(ErrorKind::kFormat, source + ": bad channel_order '" + value + "'");
      }
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::kFormat, source + ":" + std::to_string(lineno) + ": expected '<clip_id>\\t<split>'");
    std::string id = line.substr(0, tab);
    std::string split = line.substr(tab + 1);
    if (split == "train") m.train_ids.push_back(id);
    else if (split == "test") m.test_ids.push_back(id);
    else fail(ErrorKind::kFormat, source + ":" + std::to_string(lineno) + ": unknown split '" + split + "'");
  }
  if (declared_train >= 0 && static_cast<std::size_t>(declared_train) != m.train_ids.size())
    fail(ErrorKind::kFormat, source + ": n_train header disagrees with train rows");
  return m;
}

inline void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out << format_manifest(m);
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kDependency, "missing manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path);
}

}  // namespace sparsesep
