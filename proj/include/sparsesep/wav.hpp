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

// Minimal RIFF/WAVE codec: 16-bit PCM and 32-bit IEEE float, any channel
// count. Unknown chunks are skipped on read.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsesep/binary_io.hpp"
#include "sparsesep/error.hpp"

namespace sparsesep::wav {

enum class SampleFormat { kPcm16, kFloat32 };

struct WavData {
  int sample_rate = 0;
  SampleFormat format = SampleFormat::kPcm16;
  std::vector<std::vector<double>> channels;  // [channel][frame]
  std::string comment;                        // LIST/INFO/ICMT, if present

  std::size_t num_frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

inline WavData decode(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteReader r(bytes.data(), bytes.size(), source);
  if (bytes.size() < 12 || r.get_bytes(4) != "RIFF") fail(ErrorKind::kFormat, source + ": missing RIFF tag");
  r.get<std::uint32_t>();
  if (r.get_bytes(4) != "WAVE") fail(ErrorKind::kFormat, source + ": missing WAVE tag");

  std::optional<std::uint16_t> audio_format;
  std::uint16_t num_channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  WavData out;
  bool have_data = false;

  while (r.remaining() >= 8) {
    const std::string id = r.get_bytes(4);
    const std::uint32_t size = r.get<std::uint32_t>();
    if (size > r.remaining()) fail(ErrorKind::kFormat, source + ": chunk '" + id + "' overruns file");
    const std::size_t padded = size + (size & 1u);
    if (id == "fmt ") {
      if (size < 16) fail(ErrorKind::kFormat, source + ": fmt chunk too small");
      ByteReader f(bytes.data() + r.position(), size, source);
      audio_format = f.get<std::uint16_t>();
      num_channels = f.get<std::uint16_t>();
      rate = f.get<std::uint32_t>();
      f.get<std::uint32_t>();
      block_align = f.get<std::uint16_t>();
      bits = f.get<std::uint16_t>();
      if (*audio_format == 0xFFFE && size >= 40) {
        f.skip(8);  // cbSize, valid bits, channel mask
        audio_format = f.get<std::uint16_t>();
      }
    } else if (id == "data") {
      if (!audio_format) fail(ErrorKind::kFormat, source + ": data chunk before fmt chunk");
      if (num_channels == 0) fail(ErrorKind::kFormat, source + ": zero channels");
      const bool pcm16 = *audio_format == 1 && bits == 16;
      const bool f32 = *audio_format == 3 && bits == 32;
      if (!pcm16 && !f32)
        fail(ErrorKind::kFormat, source + ": unsupported sample format (need 16-bit PCM or 32-bit float)");
      if (block_align != num_channels * (bits / 8)) fail(ErrorKind::kFormat, source + ": inconsistent block align");
      const std::size_t frames = size / block_align;
      out.format = pcm16 ? SampleFormat::kPcm16 : SampleFormat::kFloat32;
      out.channels.assign(num_channels, std::vector<double>(frames));
      ByteReader d(bytes.data() + r.position(), size, source);
      for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < num_channels; ++c) {
          double v = pcm16 ? d.get<std::int16_t>() / 32768.0 : static_cast<double>(d.get<float>());
          if (!std::isfinite(v)) fail(ErrorKind::kFormat, source + ": non-finite sample");
          out.channels[c][i] = v;
        }
      }
      have_data = true;
    } else if (id == "LIST" && size >= 4) {
      ByteReader l(bytes.data() + r.position(), size, source);
      if (l.get_bytes(4) == "INFO") {
        while (l.remaining() >= 8) {
          const std::string sub = l.get_bytes(4);
          const std::uint32_t sub_size = l.get<std::uint32_t>();
          if (sub_size > l.remaining()) break;
          std::string text = l.get_bytes(sub_size);
          if (sub_size & 1u && l.remaining() > 0) l.skip(1);
          if (sub == "ICMT") out.comment = text.substr(0, text.find('\0'));
        }
      }
    }
    r.skip(std::min(padded, r.remaining()));
  }
  if (!have_data) fail(ErrorKind::kFormat, source + ": no data chunk");
  out.sample_rate = static_cast<int>(rate);
  return out;
}

inline WavData read(const std::string& path) { return decode(read_file_bytes(path), path); }

inline std::int16_t to_pcm16(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline std::vector<std::uint8_t> encode(const WavData& wav) {
  require(!wav.channels.empty(), ErrorKind::kShape, "wav encode: no channels");
  const std::size_t frames = wav.num_frames();
  for (const auto& ch : wav.channels)
    require(ch.size() == frames, ErrorKind::kShape, "wav encode: channels differ in length");
  const bool pcm16 = wav.format == SampleFormat::kPcm16;
  const std::uint16_t bytes_per_sample = pcm16 ? 2 : 4;
  const auto nch = static_cast<std::uint16_t>(wav.channels.size());
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * nch * bytes_per_sample);

  ByteWriter info;
  if (!wav.comment.empty()) {
    std::string text = wav.comment;
    text.push_back('\0');
    if (text.size() & 1u) text.push_back('\0');
    info.put_bytes("INFO");
    info.put_bytes("ICMT");
    info.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
    info.put_bytes(text);
  }

  ByteWriter w;
  w.put_bytes("RIFF");
  const std::uint32_t list_size = info.bytes().empty() ? 0 : 8 + static_cast<std::uint32_t>(info.bytes().size());
  w.put<std::uint32_t>(4 + (8 + 16) + list_size + (8 + data_size) + (data_size & 1u));
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(pcm16 ? 1 : 3);
  w.put<std::uint16_t>(nch);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(wav.sample_rate));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(wav.sample_rate) * nch * bytes_per_sample);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(nch * bytes_per_sample));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(bytes_per_sample * 8));
  if (list_size) {
    w.put_bytes("LIST");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(info.bytes().size()));
    w.bytes().insert(w.bytes().end(), info.bytes().begin(), info.bytes().end());
  }
  w.put_bytes("data");
  w.put<std::uint32_t>(data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : wav.channels) {
      if (pcm16)
        w.put<std::int16_t>(to_pcm16(ch[i]));
      else
        w.put<float>(static_cast<float>(ch[i]));
    }
  }
  if (data_size & 1u) w.put<std::uint8_t>(0);
  return std::move(w.bytes());
}

inline void write(const std::string& path, const WavData& wav) { write_file_bytes(path, encode(wav)); }

}  // namespace sparsesep::wav
