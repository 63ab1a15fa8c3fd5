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

// End-to-end orchestration: threshold sweep and the per-condition
// train -> readout -> separate (-> denoise) -> score runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/bss_eval.hpp"
#include "sparsesep/dictionary.hpp"
#include "sparsesep/lca.hpp"
#include "sparsesep/separation.hpp"
#include "sparsesep/spectral.hpp"

namespace sparsesep {

enum class Condition { kPhase, kNoPhase, kNoPhaseX2, kDenoised };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::kPhase: return "Phase";
    case Condition::kNoPhase: return "NoPhase";
    case Condition::kNoPhaseX2: return "NoPhaseX2";
    case Condition::kDenoised: return "Denoised";
  }
  return "?";
}

inline Condition condition_from_name(const std::string& name) {
  for (auto c : {Condition::kPhase, Condition::kNoPhase, Condition::kNoPhaseX2, Condition::kDenoised})
    if (name == condition_name(c)) return c;
  fail(ErrorKind::kConfig, "unknown condition '" + name + "' (Phase, NoPhase, NoPhaseX2, Denoised)");
}

inline ImageKind condition_kind(Condition c) {
  switch (c) {
    case Condition::kNoPhase: return ImageKind::kMagnitude;
    case Condition::kNoPhaseX2: return ImageKind::kMagnitudeDouble;
    default: return ImageKind::kPhaseRich;
  }
}

struct PipelineParams {
  LcaParams lca;
  LearnParams learn;
  ReadoutParams readout;
  std::size_t n_features = 512;
  std::size_t stride = 2;
  double patch_ms = 128.0;  // temporal extent of an atom
  double clip_seconds = 2.0;
  double input_rms = kDefaultInputRms;  // RMS of every mixture image fed to the encoder
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  /// Small enough for CI: 512 atoms, one dictionary epoch, 200 LCA steps.
  static PipelineParams desk() {
    PipelineParams p;
    p.lca.n_steps = 200;
    p.learn.epochs = 1;
    return p;
  }

  /// 8192 atoms, four dictionary epochs, 1000-step display period, 40
  /// readout epochs.
  static PipelineParams paper() {
    PipelineParams p;
    p.n_features = 8192;
    p.lca.n_steps = 1000;
    p.learn.epochs = 4;
    return p;
  }

  std::size_t patch_frames(ImageKind kind) const {
    const auto cfg = StftConfig::for_kind(kind, signal_length());
    const double hop_ms = 1000.0 * static_cast<double>(cfg.hop) / kSampleRate;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(patch_ms / hop_ms)));
  }

  PatchGeometry geometry(ImageKind kind) const {
    const auto cfg = StftConfig::for_kind(kind, signal_length());
    return {image_channels(kind), cfg.n_freq_bins, patch_frames(kind), stride};
  }

  std::size_t signal_length() const { return static_cast<std::size_t>(std::llround(clip_seconds * kSampleRate)); }
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// A truncated clip with its equal mixture.
struct ClipData {
  std::string id;
  Waveform mixture;
  Waveform vocal;
  Waveform accompaniment;
};

inline ClipData make_clip_data(const ClipPair& clip, double seconds) {
  ClipPair cut = truncate(clip, seconds);
  ClipData d;
  d.id = cut.clip_id;
  d.mixture = mix_equal(cut);
  d.vocal = std::move(cut.vocal);
  d.accompaniment = std::move(cut.accompaniment);
  return d;
}

/// Mixture image and the two stems as they appear inside it (times the mix
/// gain), all multiplied by the factor that brings the mixture image to the
/// target RMS.
struct ScaledImages {
  Tensor3 mixture;
  Tensor3 vocal;
  Tensor3 accompaniment;
  double scale = 1.0;
};

inline ScaledImages scaled_images(const SoundImage& mix, const SoundImage& vocal, const SoundImage& accomp,
                                  double input_rms) {
  ScaledImages s;
  s.scale = input_scale(mix, input_rms);
  s.mixture = s.scale * mix.data;
  s.vocal = (s.scale * kMixGain) * vocal.data;
  s.accompaniment = (s.scale * kMixGain) * accomp.data;
  return s;
}

inline ScaledImages scaled_images(const ClipData& clip, ImageKind kind, double input_rms) {
  return scaled_images(waveform_to_image(clip.mixture, kind), waveform_to_image(clip.vocal, kind),
                       waveform_to_image(clip.accompaniment, kind), input_rms);
}

struct TrainedModel {
  ImageKind kind = ImageKind::kPhaseRich;
  Dictionary dictionary;
  ReadoutPair readouts;
  TrainReport report;
};

inline Dictionary train_coding_dictionary(std::span<const Tensor3> mixtures, ImageKind kind,
                                          const PipelineParams& params, TrainReport* report = nullptr) {
  LearnParams learn = params.learn;
  learn.rng_seed = params.seed;
  auto init = init_dictionary(params.n_features, params.geometry(kind), params.seed, kind);
  auto trained = train_dictionary(mixtures, std::move(init), learn, params.lca);
  if (report) *report = std::move(trained.report);
  return std::move(trained.dictionary);
}

inline ReadoutPair fit_readouts(std::span<const ScaledImages> train, const Dictionary& dict,
                                const PipelineParams& params) {
  const LcaSolver solver(dict, params.lca);
  std::vector<ReadoutExample> examples(train.size());
  parallel_for(train.size(), params.workers, [&](std::size_t i) {
    examples[i] = {solver.encode(train[i].mixture).code, train[i].vocal, train[i].accompaniment};
  });
  ReadoutParams rp = params.readout;
  rp.rng_seed = params.seed;
  return train_readouts(examples, init_readouts(dict), rp);
}

inline TrainedModel train_model(std::span<const ClipData> train, ImageKind kind, const PipelineParams& params) {
  std::vector<ScaledImages> images(train.size());
  parallel_for(train.size(), params.workers, [&](std::size_t i) { images[i] = scaled_images(train[i], kind, params.input_rms); });
  std::vector<Tensor3> mixtures;
  for (const auto& s : images) mixtures.push_back(s.mixture);
  TrainedModel model;
  model.kind = kind;
  model.dictionary = train_coding_dictionary(mixtures, kind, params, &model.report);
  model.readouts = fit_readouts(images, model.dictionary, params);
  return model;
}

struct ConditionResult {
  Condition condition = Condition::kPhase;
  std::vector<ClipScores> clips;
  AggregateScores aggregate;
  std::string provenance;
  std::vector<StemEstimate> stems;
};

inline std::vector<ClipScores> score_stems(std::span<const ClipData> test, std::span<const StemEstimate> stems,
                                           std::size_t workers) {
  std::vector<ClipScores> scores(test.size());
  parallel_for(test.size(), workers, [&](std::size_t i) {
    scores[i] = score_clip(test[i].id, stems[i].vocal, stems[i].accompaniment, test[i].vocal, test[i].accompaniment,
                           test[i].mixture);
  });
  return scores;
}

inline std::vector<StemEstimate> separate_all(std::span<const ClipData> test, const TrainedModel& model,
                                              const PipelineParams& params) {
  const Separator sep(model.dictionary, model.readouts, params.lca, params.input_rms);
  std::vector<StemEstimate> stems(test.size());
  parallel_for(test.size(), params.workers,
               [&](std::size_t i) { stems[i] = sep.separate(test[i].mixture, model.kind, test[i].id); });
  return stems;
}

inline std::vector<StemEstimate> denoise_all(std::span<const StemEstimate> stems, const TrainedModel& model,
                                             const PipelineParams& params) {
  const Separator sep(model.dictionary, model.readouts, params.lca, params.input_rms);
  std::vector<StemEstimate> out(stems.size());
  parallel_for(stems.size(), params.workers, [&](std::size_t i) { out[i] = sep.denoise(stems[i]); });
  return out;
}

/// Runs the requested conditions. Denoised re-uses the Phase model and
/// consumes exactly the Phase condition's stems.
inline std::vector<ConditionResult> run_conditions(std::span<const Condition> conditions,
                                                   std::span<const ClipData> train, std::span<const ClipData> test,
                                                   const PipelineParams& params) {
  if (train.empty() || test.empty()) fail(ErrorKind::kData, "run_conditions: empty train or test set");
  std::vector<ConditionResult> results;
  std::optional<TrainedModel> phase_model;
  std::optional<std::vector<StemEstimate>> phase_stems;
  auto need_phase = [&] {
    if (!phase_model) {
      phase_model = train_model(train, ImageKind::kPhaseRich, params);
      phase_stems = separate_all(test, *phase_model, params);
    }
  };
  for (Condition c : conditions) {
    ConditionResult r;
    r.condition = c;
    if (c == Condition::kPhase || c == Condition::kDenoised) {
      need_phase();
      if (c == Condition::kPhase) {
        r.stems = *phase_stems;
        r.provenance = "model=phase";
      } else {
        r.stems = denoise_all(*phase_stems, *phase_model, params);
        r.provenance = "model=phase input=Phase stems";
      }
    } else {
      const TrainedModel model = train_model(train, condition_kind(c), params);
      r.stems = separate_all(test, model, params);
      r.provenance = std::string("model=") + kind_name(model.kind);
    }
    r.clips = score_stems(test, r.stems, params.workers);
    r.aggregate = aggregate(r.clips);
    results.push_back(std::move(r));
  }
  return results;
}

inline ConditionResult run_condition(Condition condition, std::span<const ClipData> train,
                                     std::span<const ClipData> test, const PipelineParams& params) {
  const Condition one[] = {condition};
  return std::move(run_conditions(one, train, test, params).front());
}

struct SweepPoint {
  double lambda = 0.0;
  double mean_sparsity = 0.0;
  double denoise_error = 0.0;  // mean ||clean - reconstruction|| / ||clean||
};

struct SweepOptions {
  std::vector<double> lambdas{0.3, 0.4, 0.5, 0.625, 0.75, 1.0};
  double noise_fraction = 0.1;  // noise std as a fraction of each clean image's RMS
  std::size_t epochs = 2;
  std::uint64_t noise_seed = 17;
};

/// Encodes noisy copies of `clean` with `dict` at one threshold and measures
/// how well the reconstruction recovers the clean image.
inline SweepPoint denoise_point(std::span<const Tensor3> clean, const Dictionary& dict, const LcaParams& lca,
                                const SweepOptions& opt, std::size_t workers) {
  const LcaSolver solver(dict, lca);
  std::vector<double> err(clean.size()), spars(clean.size());
  parallel_for(clean.size(), workers, [&](std::size_t i) {
    const Tensor3& x = clean[i];
    Tensor3 noisy = x;
    const double sigma = opt.noise_fraction * std::sqrt(x.squared_norm() / static_cast<double>(x.size()));
    std::mt19937_64 rng(opt.noise_seed + i);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : noisy.values) v += sigma * normal(rng);
    const SparseCode code = solver.encode(noisy).code;
    const double norm = std::sqrt(x.squared_norm());
    err[i] = norm > 0.0 ? std::sqrt((x - reconstruct(dict, code)).squared_norm()) / norm : 0.0;
    spars[i] = sparsity(code);
  });
  SweepPoint p;
  p.lambda = lca.lambda;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    p.denoise_error += err[i] / static_cast<double>(clean.size());
    p.mean_sparsity += spars[i] / static_cast<double>(clean.size());
  }
  return p;
}

/// Threshold sweep. With `fixed` set every threshold reuses that dictionary;
/// otherwise a dictionary is trained for opt.epochs at each threshold.
inline std::vector<SweepPoint> threshold_sweep(std::span<const Tensor3> clean, ImageKind kind,
                                               const PipelineParams& params, const SweepOptions& opt,
                                               const Dictionary* fixed = nullptr) {
  if (opt.lambdas.empty()) fail(ErrorKind::kConfig, "threshold_sweep: empty lambda grid");
  for (double l : opt.lambdas) require(l > 0.0, ErrorKind::kConfig, "threshold_sweep: lambdas must be positive");
  if (clean.empty()) fail(ErrorKind::kData, "threshold_sweep: no images");
  std::vector<SweepPoint> points;
  for (double lambda : opt.lambdas) {
    PipelineParams p = params;
    p.lca.lambda = lambda;
    p.learn.epochs = opt.epochs;
    if (fixed) {
      points.push_back(denoise_point(clean, *fixed, p.lca, opt, params.workers));
    } else {
      const Dictionary dict = train_coding_dictionary(clean, kind, p);
      points.push_back(denoise_point(clean, dict, p.lca, opt, params.workers));
    }
  }
  return points;
}

inline std::string fmt_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string format_sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "lambda,mean_sparsity,denoise_error\n";
  for (const auto& p : points)
    out += fmt_number(p.lambda) + "," + fmt_number(p.mean_sparsity) + "," + fmt_number(p.denoise_error) + "\n";
  return out;
}

inline constexpr const char* kAggregateRowId = "GLOBAL";

inline std::string format_scores_csv(std::span<const ConditionResult> results) {
  std::string out = "condition,clip_id,sdr_v,sir_v,sar_v,nsdr_v,sdr_a,sir_a,sar_a,nsdr_a\n";
  auto row = [&](const std::string& cond, const std::string& id, const SourceMetrics& v, const SourceMetrics& a) {
    out += cond + "," + id;
    for (double x : {v.sdr, v.sir, v.sar, v.nsdr, a.sdr, a.sir, a.sar, a.nsdr}) out += "," + fmt_number(x);
    out += "\n";
  };
  for (const auto& r : results) {
    for (const auto& c : r.clips) row(condition_name(r.condition), c.clip_id, c.vocal, c.accompaniment);
    const auto& g = r.aggregate;
    row(condition_name(r.condition), kAggregateRowId, {g.vocal.sdr.mean, g.vocal.sir.mean, g.vocal.sar.mean, g.vocal.nsdr.mean},
        {g.accompaniment.sdr.mean, g.accompaniment.sir.mean, g.accompaniment.sar.mean, g.accompaniment.nsdr.mean});
  }
  return out;
}

/// key=value lines: condition, source, metric, value, spread.
inline std::string format_aggregates(std::span<const ConditionResult> results) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& [source, agg] : {std::pair<const char*, const SourceAggregate*>{"vocal", &r.aggregate.vocal},
                                      {"accompaniment", &r.aggregate.accompaniment}}) {
      for (const auto& [metric, m] : {std::pair<const char*, const MetricSummary*>{"GNSDR", &agg->nsdr},
                                      {"GSIR", &agg->sir},
                                      {"GSAR", &agg->sar},
                                      {"GSDR", &agg->sdr}}) {
        out += std::string("condition=") + condition_name(r.condition) + " source=" + source + " metric=" + metric +
               " value=" + fmt_number(m->mean) + " spread=" + fmt_number(m->spread) + "\n";
      }
    }
  }
  return out;
}

/// Table layout: one row per condition, vocal-stem GSIR / GSAR / GNSDR as
/// mean +- spread.
inline std::string format_table(std::span<const ConditionResult> results) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %-18s %-18s %-18s\n", "Run", "GSIR", "GSAR", "GNSDR");
  os << line;
  for (const auto& r : results) {
    auto cell = [](const MetricSummary& m) {
      char c[40];
      std::snprintf(c, sizeof(c), "%.2f +- %.2f", m.mean, m.spread);
      return std::string(c);
    };
    std::snprintf(line, sizeof(line), "%-10s %-18s %-18s %-18s\n", condition_name(r.condition),
                  cell(r.aggregate.vocal.sir).c_str(), cell(r.aggregate.vocal.sar).c_str(),
                  cell(r.aggregate.vocal.nsdr).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace sparsesep
