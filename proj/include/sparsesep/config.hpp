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

// Run configuration: a flat "key = value" file grouped into [sections].
// Unknown sections or keys are errors. The config hash covers every value
// that can change an output; paths and the worker count are excluded.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/binary_io.hpp"
#include "sparsesep/error.hpp"
#include "sparsesep/experiments.hpp"

namespace sparsesep {

enum class Preset { kDesk, kPaper };

struct RunConfig {
  Preset preset = Preset::kDesk;
  std::string dataset_root = "data";
  std::string manifest;  // empty: <output_dir>/manifest.tsv
  std::string output_dir = "out";
  std::size_t n_train = 0;  // 0: 95% of the clips
  std::uint64_t split_seed = 0;
  ChannelOrder channel_order = ChannelOrder::kAccompanimentLeft;
  std::vector<Condition> conditions{Condition::kPhase, Condition::kNoPhase, Condition::kNoPhaseX2,
                                    Condition::kDenoised};
  PipelineParams pipeline = PipelineParams::desk();
  SweepOptions sweep;
  ImageKind sweep_kind = ImageKind::kPhaseRich;
  std::size_t sweep_clips = 8;  // training clips used by the sweep; 0: all

  static RunConfig for_preset(Preset p) {
    RunConfig c;
    c.preset = p;
    c.pipeline = p == Preset::kPaper ? PipelineParams::paper() : PipelineParams::desk();
    if (p == Preset::kPaper) c.sweep_clips = 0;
    return c;
  }

  std::string manifest_path() const { return manifest.empty() ? output_dir + "/manifest.tsv" : manifest; }

  std::size_t train_count(std::size_t n_clips) const {
    if (n_train) return n_train;
    return static_cast<std::size_t>(std::llround(0.95 * static_cast<double>(n_clips)));
  }

  /// Models and separation outputs needed for the requested conditions.
  std::vector<ImageKind> kinds() const {
    std::vector<ImageKind> out;
    for (Condition c : conditions) {
      const ImageKind k = condition_kind(c);
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) fail(ErrorKind::kConfig, key + ": not a number: '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    fail(ErrorKind::kConfig, key + ": not a non-negative integer: '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    fail(ErrorKind::kConfig, key + ": out of range: '" + v + "'");
  }
}

struct ConfigKey {
  const char* name;  // "section.key"
  bool hashed;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline ConfigKey uint_key(const char* name, std::function<std::uint64_t&(RunConfig&)> ref, bool hashed = true) {
  return {name, hashed, [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_uint(name, v); },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

inline ConfigKey count_key(const char* name, std::function<std::size_t&(RunConfig&)> ref, bool hashed = true) {
  return {name, hashed,
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = static_cast<std::size_t>(parse_uint(name, v)); },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

inline ConfigKey real_key(const char* name, std::function<double&(RunConfig&)> ref) {
  return {name, true, [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_double(name, v); },
          [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
}

inline ConfigKey path_key(const char* name, std::function<std::string&(RunConfig&)> ref) {
  return {name, false, [ref](RunConfig& c, const std::string& v) { ref(c) = v; },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

inline const char* lateral_name(LcaParams::Lateral l) {
  switch (l) {
    case LcaParams::Lateral::kGram: return "gram";
    case LcaParams::Lateral::kCorrelate: return "correlate";
    default: return "auto";
  }
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"run.preset", true,
                 [](RunConfig&, const std::string& v) {
                   if (v != "desk" && v != "paper") fail(ErrorKind::kConfig, "run.preset must be desk or paper");
                 },
                 [](const RunConfig& c) { return std::string(c.preset == Preset::kPaper ? "paper" : "desk"); }});
    k.push_back({"run.conditions", true,
                 [](RunConfig& c, const std::string& v) {
                   c.conditions.clear();
                   for (const auto& name : split_list(v)) {
                     Condition cond;
                     try {
                       cond = condition_from_name(name);
                     } catch (const Error&) {
                       fail(ErrorKind::kConfig, "run.conditions: unknown condition '" + name + "'");
                     }
                     if (std::find(c.conditions.begin(), c.conditions.end(), cond) == c.conditions.end())
                       c.conditions.push_back(cond);
                   }
                   if (c.conditions.empty()) fail(ErrorKind::kConfig, "run.conditions is empty");
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (Condition cond : c.conditions) s += (s.empty() ? "" : ",") + std::string(condition_name(cond));
                   return s;
                 }});
    k.push_back(uint_key("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.pipeline.seed; }));
    k.push_back(count_key("run.workers", [](RunConfig& c) -> std::size_t& { return c.pipeline.workers; }, false));
    k.push_back(real_key("run.input_rms", [](RunConfig& c) -> double& { return c.pipeline.input_rms; }));

    k.push_back(path_key("data.dataset_root", [](RunConfig& c) -> std::string& { return c.dataset_root; }));
    k.push_back(path_key("data.manifest", [](RunConfig& c) -> std::string& { return c.manifest; }));
    k.push_back(path_key("data.output_dir", [](RunConfig& c) -> std::string& { return c.output_dir; }));
    k.push_back(count_key("data.n_train", [](RunConfig& c) -> std::size_t& { return c.n_train; }));
    k.push_back(uint_key("data.split_seed", [](RunConfig& c) -> std::uint64_t& { return c.split_seed; }));
    k.push_back(real_key("data.clip_seconds", [](RunConfig& c) -> double& { return c.pipeline.clip_seconds; }));
    k.push_back({"data.channel_order", true,
                 [](RunConfig& c, const std::string& v) {
                   if (v == "accomp_left") c.channel_order = ChannelOrder::kAccompanimentLeft;
                   else if (v == "vocal_left") c.channel_order = ChannelOrder::kVocalLeft;
                   else fail(ErrorKind::kConfig, "data.channel_order must be accomp_left or vocal_left");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.channel_order == ChannelOrder::kVocalLeft ? "vocal_left" : "accomp_left");
                 }});

    k.push_back(real_key("lca.lambda", [](RunConfig& c) -> double& { return c.pipeline.lca.lambda; }));
    k.push_back(count_key("lca.n_steps", [](RunConfig& c) -> std::size_t& { return c.pipeline.lca.n_steps; }));
    k.push_back(real_key("lca.dt_over_tau", [](RunConfig& c) -> double& { return c.pipeline.lca.dt_over_tau; }));
    // The lateral path changes only rounding, never the dynamics, but it is
    // hashed anyway so byte-identical outputs imply identical configs.
    k.push_back({"lca.lateral", true,
                 [](RunConfig& c, const std::string& v) {
                   if (v == "auto") c.pipeline.lca.lateral = LcaParams::Lateral::kAuto;
                   else if (v == "gram") c.pipeline.lca.lateral = LcaParams::Lateral::kGram;
                   else if (v == "correlate") c.pipeline.lca.lateral = LcaParams::Lateral::kCorrelate;
                   else fail(ErrorKind::kConfig, "lca.lateral must be auto, gram or correlate");
                 },
                 [](const RunConfig& c) { return std::string(lateral_name(c.pipeline.lca.lateral)); }});

    k.push_back(count_key("dictionary.n_features", [](RunConfig& c) -> std::size_t& { return c.pipeline.n_features; }));
    k.push_back(count_key("dictionary.stride", [](RunConfig& c) -> std::size_t& { return c.pipeline.stride; }));
    k.push_back(real_key("dictionary.patch_ms", [](RunConfig& c) -> double& { return c.pipeline.patch_ms; }));
    k.push_back(real_key("dictionary.learning_rate", [](RunConfig& c) -> double& { return c.pipeline.learn.learning_rate; }));
    k.push_back(real_key("dictionary.momentum", [](RunConfig& c) -> double& { return c.pipeline.learn.momentum; }));
    k.push_back(count_key("dictionary.epochs", [](RunConfig& c) -> std::size_t& { return c.pipeline.learn.epochs; }));
    k.push_back(real_key("dictionary.epoch_decay", [](RunConfig& c) -> double& { return c.pipeline.learn.epoch_decay; }));

    k.push_back(count_key("readout.epochs", [](RunConfig& c) -> std::size_t& { return c.pipeline.readout.epochs; }));
    k.push_back(real_key("readout.learning_rate", [](RunConfig& c) -> double& { return c.pipeline.readout.learning_rate; }));
    k.push_back(real_key("readout.momentum", [](RunConfig& c) -> double& { return c.pipeline.readout.momentum; }));

    k.push_back({"sweep.lambdas", true,
                 [](RunConfig& c, const std::string& v) {
                   c.sweep.lambdas.clear();
                   for (const auto& item : split_list(v)) c.sweep.lambdas.push_back(parse_double("sweep.lambdas", item));
                   if (c.sweep.lambdas.empty()) fail(ErrorKind::kConfig, "sweep.lambdas is empty");
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (double l : c.sweep.lambdas) s += (s.empty() ? "" : ",") + fmt_double(l);
                   return s;
                 }});
    k.push_back(real_key("sweep.noise_fraction", [](RunConfig& c) -> double& { return c.sweep.noise_fraction; }));
    k.push_back(count_key("sweep.epochs", [](RunConfig& c) -> std::size_t& { return c.sweep.epochs; }));
    k.push_back(uint_key("sweep.noise_seed", [](RunConfig& c) -> std::uint64_t& { return c.sweep.noise_seed; }));
    k.push_back(count_key("sweep.clips", [](RunConfig& c) -> std::size_t& { return c.sweep_clips; }));
    k.push_back({"sweep.representation", true,
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.sweep_kind = kind_from_name(v);
                   } catch (const Error&) {
                     fail(ErrorKind::kConfig, "sweep.representation must be phase, nophase or nophasex2");
                   }
                 },
                 [](const RunConfig& c) { return std::string(kind_name(c.sweep_kind)); }});
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (name == k.name) return &k;
  return nullptr;
}

}  // namespace detail

/// Semantic checks that do not depend on the data.
inline void validate(const RunConfig& c) {
  try {
    c.pipeline.lca.validate();
    c.pipeline.learn.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  require(c.pipeline.n_features >= 1, ErrorKind::kConfig, "dictionary.n_features must be >= 1");
  require(c.pipeline.stride >= 1, ErrorKind::kConfig, "dictionary.stride must be >= 1");
  require(c.pipeline.patch_ms > 0.0, ErrorKind::kConfig, "dictionary.patch_ms must be > 0");
  require(c.pipeline.clip_seconds > 0.0, ErrorKind::kConfig, "data.clip_seconds must be > 0");
  require(c.pipeline.input_rms > 0.0, ErrorKind::kConfig, "run.input_rms must be > 0");
  require(c.pipeline.readout.learning_rate > 0.0, ErrorKind::kConfig, "readout.learning_rate must be > 0");
  require(c.pipeline.readout.momentum >= 0.0 && c.pipeline.readout.momentum < 1.0, ErrorKind::kConfig,
          "readout.momentum must be in [0, 1)");
  require(c.sweep.noise_fraction >= 0.0, ErrorKind::kConfig, "sweep.noise_fraction must be >= 0");
  require(c.sweep.epochs >= 1, ErrorKind::kConfig, "sweep.epochs must be >= 1");
  for (double l : c.sweep.lambdas) require(l > 0.0, ErrorKind::kConfig, "sweep.lambdas must be positive");
}

/// Parses config text. The preset is applied first, so every other key
/// overrides it regardless of where it appears.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::kConfig, where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      static const char* kSections[] = {"run", "data", "lca", "dictionary", "readout", "sweep"};
      if (std::find_if(std::begin(kSections), std::end(kSections), [&](const char* s) { return section == s; }) ==
          std::end(kSections))
        fail(ErrorKind::kConfig, where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, where + ": expected key = value");
    if (section.empty()) fail(ErrorKind::kConfig, where + ": key outside of a section");
    const std::string key = section + "." + detail::trim(line.substr(0, eq));
    if (!detail::find_key(key)) fail(ErrorKind::kConfig, where + ": unknown key '" + key + "'");
    if (seen[key]++) fail(ErrorKind::kConfig, where + ": duplicate key '" + key + "'");
    entries.emplace_back(key, detail::trim(line.substr(eq + 1)));
  }
  Preset preset = Preset::kDesk;
  for (const auto& [k, v] : entries) {
    if (k != "run.preset") continue;
    if (v == "paper") preset = Preset::kPaper;
    else if (v != "desk") fail(ErrorKind::kConfig, source + ": run.preset must be desk or paper");
  }
  RunConfig c = RunConfig::for_preset(preset);
  for (const auto& [k, v] : entries) detail::find_key(k)->set(c, v);
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::kConfig, "cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

/// Every key with its effective value, sorted, one "section.key = value"
/// per line. Parsing this text reproduces the config.
inline std::string canonical_config(const RunConfig& c, bool hashed_only = false) {
  std::vector<std::string> lines;
  for (const auto& k : detail::config_keys())
    if (!hashed_only || k.hashed) lines.push_back(std::string(k.name) + " = " + k.get(c));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

/// Writes the canonical form back in sectioned layout.
inline std::string format_config(const RunConfig& c) {
  std::map<std::string, std::vector<std::string>> by_section;
  for (const auto& k : detail::config_keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    by_section[name.substr(0, dot)].push_back(name.substr(dot + 1) + " = " + k.get(c));
  }
  std::string out;
  for (const auto& [section, lines] : by_section) {
    out += "[" + section + "]\n";
    for (const auto& l : lines) out += l + "\n";
    out += "\n";
  }
  return out;
}

inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a(canonical_config(c, true)); }

}  // namespace sparsesep
