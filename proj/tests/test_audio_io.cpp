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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/wav.hpp"

namespace sparsesep {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("sparsesep_audio_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::vector<double> ramp(std::size_t n, double scale) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * std::sin(0.01 * static_cast<double>(i));
  return v;
}

wav::WavData stereo(std::size_t frames, int rate = 16000, wav::SampleFormat fmt = wav::SampleFormat::kPcm16) {
  wav::WavData w;
  w.sample_rate = rate;
  w.format = fmt;
  w.channels = {ramp(frames, 0.5), ramp(frames, -0.25)};
  return w;
}

TEST(Wav, Pcm16FullScaleMapsNearOne) {
  TempDir dir;
  wav::WavData w;
  w.sample_rate = 16000;
  w.channels = {{32767.0 / 32768.0, -1.0, 0.0}};
  wav::write(dir.file("fs.wav"), w);
  const auto r = wav::read(dir.file("fs.wav"));
  EXPECT_NEAR(r.channels[0][0], 1.0, 1e-4);
  EXPECT_DOUBLE_EQ(r.channels[0][0], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(r.channels[0][1], -1.0);
}

TEST(Wav, FloatRoundTripIsExactAtFloatPrecisionAndKeepsComment) {
  TempDir dir;
  auto w = stereo(1001, 16000, wav::SampleFormat::kFloat32);
  w.comment = "config_hash=abc";
  wav::write(dir.file("f.wav"), w);
  const auto r = wav::read(dir.file("f.wav"));
  ASSERT_EQ(r.channels.size(), 2u);
  ASSERT_EQ(r.num_frames(), 1001u);
  EXPECT_EQ(r.format, wav::SampleFormat::kFloat32);
  EXPECT_EQ(r.comment, "config_hash=abc");
  for (std::size_t i = 0; i < 1001; ++i) EXPECT_EQ(r.channels[1][i], static_cast<double>(static_cast<float>(w.channels[1][i])));
}

TEST(Wav, RejectsGarbage) {
  const std::vector<std::uint8_t> junk{'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  try {
    wav::decode(junk, "junk");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  EXPECT_THROW(wav::decode({}, "empty"), Error);
}

TEST(LoadClipPair, LeftIsAccompanimentRightIsVocal) {
  TempDir dir;
  auto w = stereo(32000);
  w.channels[0].assign(32000, 0.0);
  wav::write(dir.file("clip_1.wav"), w);
  const auto clip = load_clip_pair(dir.file("clip_1.wav"));
  EXPECT_EQ(clip.clip_id, "clip_1");
  ASSERT_EQ(clip.accompaniment.size(), 32000u);
  ASSERT_EQ(clip.vocal.size(), 32000u);
  for (double v : clip.accompaniment.samples) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < 32000; ++i) EXPECT_NEAR(clip.vocal.samples[i], w.channels[1][i], 1.0 / 32768.0);

  const auto swapped = load_clip_pair(dir.file("clip_1.wav"), ChannelOrder::kVocalLeft);
  for (double v : swapped.vocal.samples) EXPECT_EQ(v, 0.0);
}

TEST(LoadClipPair, ErrorKinds) {
  TempDir dir;
  wav::WavData mono;
  mono.sample_rate = 16000;
  mono.channels = {ramp(100, 0.1)};
  wav::write(dir.file("mono.wav"), mono);
  wav::write(dir.file("rate.wav"), stereo(100, 44100));
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;
  };
  EXPECT_EQ(kind_of([&] { load_clip_pair(dir.file("mono.wav")); }), ErrorKind::kChannelCount);
  EXPECT_EQ(kind_of([&] { load_clip_pair(dir.file("rate.wav")); }), ErrorKind::kSampleRate);
  std::FILE* f = std::fopen(dir.file("bad.wav").c_str(), "wb");
  std::fputs("not a wav file at all", f);
  std::fclose(f);
  EXPECT_EQ(kind_of([&] { load_clip_pair(dir.file("bad.wav")); }), ErrorKind::kFormat);
}

ClipPair clip_of(std::size_t n) {
  return {{ramp(n, 0.3), kSampleRate}, {ramp(n, -0.6), kSampleRate}, "c"};
}

TEST(Truncate, CutsFromStart) {
  const auto four = clip_of(64000);
  const auto two = truncate(four, 2.0);
  EXPECT_EQ(two.vocal.size(), 32000u);
  EXPECT_EQ(two.accompaniment.size(), 32000u);
  for (std::size_t i = 0; i < 32000; ++i) EXPECT_EQ(two.vocal.samples[i], four.vocal.samples[i]);

  const auto exact = clip_of(32000);
  EXPECT_EQ(truncate(exact, 2.0).vocal.samples, exact.vocal.samples);

  try {
    truncate(clip_of(16000), 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLength);
  }
}

TEST(MixEqual, ZeroStemSymmetryAndCancellation) {
  auto c = clip_of(1000);
  c.vocal.samples.assign(1000, 0.0);
  auto m = mix_equal(c);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(m.samples[i], 0.5 * c.accompaniment.samples[i]);

  c.vocal = c.accompaniment;
  m = mix_equal(c);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_DOUBLE_EQ(m.samples[i], c.accompaniment.samples[i]);

  for (std::size_t i = 0; i < 1000; ++i) {
    const double s = std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 16000.0);
    c.vocal.samples[i] = s;
    c.accompaniment.samples[i] = -s;
  }
  for (double v : mix_equal(c).samples) EXPECT_EQ(v, 0.0);

  c.vocal.samples.pop_back();
  try {
    mix_equal(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(MixEqual, IsLinear) {
  const auto c = clip_of(500);
  for (double alpha : {-3.0, 0.0, 0.37, 12.5}) {
    ClipPair scaled = c;
    for (auto& v : scaled.vocal.samples) v *= alpha;
    for (auto& v : scaled.accompaniment.samples) v *= alpha;
    const auto lhs = mix_equal(scaled);
    const auto rhs = mix_equal(c);
    for (std::size_t i = 0; i < 500; ++i) EXPECT_NEAR(lhs.samples[i], alpha * rhs.samples[i], 1e-12);
  }
}

TEST(LoadTruncateMix, PipelineIsBitIdentical) {
  TempDir dir;
  wav::write(dir.file("p.wav"), stereo(40000));
  const auto a = mix_equal(truncate(load_clip_pair(dir.file("p.wav")), 2.0));
  const auto b = mix_equal(truncate(load_clip_pair(dir.file("p.wav")), 2.0));
  EXPECT_EQ(a.samples, b.samples);
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("clip" + std::to_string(i));
  return v;
}

TEST(MakeSplit, PaperProportions) {
  const auto m = make_split(ids(1000), 950, 42);
  EXPECT_EQ(m.train_ids.size(), 950u);
  EXPECT_EQ(m.test_ids.size(), 50u);
}

TEST(MakeSplit, DeterministicAndSeedSensitive) {
  EXPECT_EQ(make_split(ids(10), 8, 0).train_ids, make_split(ids(10), 8, 0).train_ids);
  const auto a = make_split(ids(10), 8, 0);
  const auto b = make_split(ids(10), 8, 1);
  std::vector<std::string> oa = a.train_ids, ob = b.train_ids;
  oa.insert(oa.end(), a.test_ids.begin(), a.test_ids.end());
  ob.insert(ob.end(), b.test_ids.begin(), b.test_ids.end());
  EXPECT_NE(oa, ob);
}

TEST(MakeSplit, DisjointAndCompleteForManySeeds) {
  const auto all = ids(37);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = make_split(all, 30, seed);
    std::set<std::string> train(m.train_ids.begin(), m.train_ids.end());
    std::set<std::string> seen = train;
    for (const auto& id : m.test_ids) {
      EXPECT_EQ(train.count(id), 0u);
      seen.insert(id);
    }
    EXPECT_EQ(seen.size(), all.size());
  }
}

TEST(MakeSplit, RejectsOversizedTrain) {
  try {
    make_split(ids(5), 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSplit);
  }
}

TEST(Manifest, TextRoundTrip) {
  auto m = make_split(ids(20), 15, 7);
  m.channel_order = ChannelOrder::kVocalLeft;
  const auto text = format_manifest(m);
  EXPECT_NE(text.find("# seed=7"), std::string::npos);
  EXPECT_NE(text.find("# n_train=15"), std::string::npos);
  const auto back = parse_manifest(text);
  EXPECT_EQ(back.train_ids, m.train_ids);
  EXPECT_EQ(back.test_ids, m.test_ids);
  EXPECT_EQ(back.shuffle_seed, 7u);
  EXPECT_EQ(back.channel_order, ChannelOrder::kVocalLeft);
  EXPECT_THROW(parse_manifest("a\tvalidation\n"), Error);
  EXPECT_THROW(parse_manifest("# n_train=3\na\ttrain\n"), Error);
}

}  // namespace
}  // namespace sparsesep
