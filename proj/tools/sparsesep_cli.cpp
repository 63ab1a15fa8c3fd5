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

// sparsesep: command-line driver for the separation pipeline.
//
// Every stage reads the artifacts of the previous ones from the output
// directory and stamps what it writes with the config hash.
//
// Exit codes: 0 success, 1 internal error, 2 data error, 3 usage error or
// refused overwrite.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/bss_eval.hpp"
#include "sparsesep/config.hpp"
#include "sparsesep/dictionary.hpp"
#include "sparsesep/experiments.hpp"
#include "sparsesep/separation.hpp"
#include "sparsesep/spectral.hpp"
#include "sparsesep/synthetic.hpp"
#include "sparsesep/wav.hpp"

namespace fs = std::filesystem;
using namespace sparsesep;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return 3;
    case ErrorKind::kFormat:
    case ErrorKind::kChannelCount:
    case ErrorKind::kSampleRate:
    case ErrorKind::kLength:
    case ErrorKind::kSplit:
    case ErrorKind::kRepresentation:
    case ErrorKind::kPhaseRequired:
    case ErrorKind::kData:
    case ErrorKind::kDependency:
    case ErrorKind::kDegenerateSource:
    case ErrorKind::kIo:
      return 2;
    default:
      return 1;
  }
}

void log(const std::string& msg) { std::fprintf(stderr, "sparsesep: %s\n", msg.c_str()); }

struct Context {
  RunConfig cfg;
  std::uint64_t hash = 0;
  bool force = false;

  fs::path out() const { return cfg.output_dir; }
  fs::path manifest_path() const { return cfg.manifest_path(); }
  fs::path mixture_path(const std::string& id) const { return out() / "mixtures" / (id + ".wav"); }
  fs::path image_path(ImageKind k, const std::string& id) const {
    return out() / "images" / kind_name(k) / (id + ".ssim");
  }
  fs::path dict_path(ImageKind k) const { return out() / "models" / (std::string(kind_name(k)) + ".dict.ssdi"); }
  fs::path readout_path(ImageKind k, bool vocal) const {
    return out() / "models" / (std::string(kind_name(k)) + (vocal ? ".vocal.ssdi" : ".accomp.ssdi"));
  }
  fs::path stem_path(const std::string& id, bool vocal, ImageKind k, SeparationPass pass) const {
    const Condition c = k == ImageKind::kMagnitude         ? Condition::kNoPhase
                        : k == ImageKind::kMagnitudeDouble ? Condition::kNoPhaseX2
                                                           : Condition::kPhase;
    return out() / "stems" /
           (id + (vocal ? ".vocal." : ".accomp.") + condition_name(c) +
            (pass == SeparationPass::kDenoised ? ".denoised.wav" : ".single.wav"));
  }
  fs::path clip_path(const std::string& id) const { return fs::path(cfg.dataset_root) / (id + ".wav"); }

  std::string provenance(std::uint64_t input_hash) const {
    return "config_hash=" + hex64(hash) + " seed=" + std::to_string(cfg.pipeline.seed) +
           " input_hash=" + hex64(input_hash);
  }
};

/// Refuses to replace an existing artifact unless --force was given.
void guard_output(const Context& ctx, const fs::path& p) {
  if (fs::exists(p) && !ctx.force)
    fail(ErrorKind::kUsage, p.string() + " already exists; pass --force to overwrite");
  fs::create_directories(p.parent_path());
}

void require_artifact(const fs::path& p, const std::string& what, const std::string& stage) {
  if (!fs::exists(p)) fail(ErrorKind::kDependency, "missing " + what + " " + p.string() + " (run '" + stage + "' first)");
}

void check_hash(const Context& ctx, const fs::path& p, std::uint64_t found) {
  if (found != ctx.hash)
    fail(ErrorKind::kData, p.string() + " was produced under config hash " + hex64(found) +
                               " but the current config hashes to " + hex64(ctx.hash) +
                               "; refusing to mix artifacts from different configs");
}

std::uint64_t hash_from_comment(const std::string& comment) {
  const auto pos = comment.find("config_hash=");
  if (pos == std::string::npos) return 0;
  try {
    return std::stoull(comment.substr(pos + 12, 16), nullptr, 16);
  } catch (const std::exception&) {
    return 0;
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write " + p.string());
  f << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

DatasetManifest load_manifest(const Context& ctx) {
  const auto p = ctx.manifest_path();
  require_artifact(p, "manifest", "prepare");
  const std::string text = read_text(p);
  const auto pos = text.find("# config_hash=");
  check_hash(ctx, p, pos == std::string::npos ? 0 : hash_from_comment(text.substr(pos + 2)));
  return parse_manifest(text, p.string());
}

void write_mono(const fs::path& p, const Waveform& w, wav::SampleFormat fmt, const std::string& comment) {
  wav::WavData d;
  d.sample_rate = w.sample_rate;
  d.format = fmt;
  d.channels = {w.samples};
  d.comment = comment;
  wav::write(p.string(), d);
}

Waveform read_mono(const Context& ctx, const fs::path& p) {
  const auto d = wav::read(p.string());
  check_hash(ctx, p, hash_from_comment(d.comment));
  if (d.channels.size() != 1) fail(ErrorKind::kChannelCount, p.string() + ": expected a mono file");
  return {d.channels[0], d.sample_rate};
}

std::vector<ClipData> load_clips(const Context& ctx, const std::vector<std::string>& ids,
                                 ChannelOrder order) {
  std::vector<ClipData> clips(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), ctx.cfg.pipeline.workers, [&](std::size_t i) {
    try {
      clips[i] = make_clip_data(load_clip_pair(ctx.clip_path(ids[i]).string(), order), ctx.cfg.pipeline.clip_seconds);
    } catch (const Error& e) {
      errors[i] = ids[i] + ": " + e.what();
    }
  });
  std::string all;
  for (const auto& e : errors)
    if (!e.empty()) all += "\n  " + e;
  if (!all.empty()) fail(ErrorKind::kData, "could not load clips:" + all);
  return clips;
}

std::vector<ImageKind> image_kinds(const RunConfig& cfg) {
  auto kinds = cfg.kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.sweep_kind) == kinds.end()) kinds.push_back(cfg.sweep_kind);
  return kinds;
}

// ---------------------------------------------------------------------------

void cmd_prepare(const Context& ctx) {
  const fs::path root = ctx.cfg.dataset_root;
  if (!fs::is_directory(root)) fail(ErrorKind::kData, "dataset directory " + root.string() + " does not exist");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".wav") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) fail(ErrorKind::kData, "no .wav clips in " + root.string());
  guard_output(ctx, ctx.manifest_path());

  const auto clips = load_clips(ctx, ids, ctx.cfg.channel_order);
  auto manifest = make_split(ids, ctx.cfg.train_count(ids.size()), ctx.cfg.split_seed);
  manifest.channel_order = ctx.cfg.channel_order;

  const auto kinds = image_kinds(ctx.cfg);
  std::vector<std::string> errors(clips.size());
  parallel_for(clips.size(), ctx.cfg.pipeline.workers, [&](std::size_t i) {
    try {
      const auto& c = clips[i];
      const auto mix_path = ctx.mixture_path(c.id);
      fs::create_directories(mix_path.parent_path());
      const std::string prov = ctx.provenance(fnv1a(read_file_bytes(ctx.clip_path(c.id).string())));
      write_mono(mix_path, c.mixture, wav::SampleFormat::kFloat32, prov);
      for (ImageKind k : kinds) {
        const auto p = ctx.image_path(k, c.id);
        fs::create_directories(p.parent_path());
        write_image(p.string(), waveform_to_image(c.mixture, k), ctx.hash);
      }
    } catch (const Error& e) {
      errors[i] = clips[i].id + ": " + e.what();
    }
  });
  std::string all;
  for (const auto& e : errors)
    if (!e.empty()) all += "\n  " + e;
  if (!all.empty()) fail(ErrorKind::kData, "could not prepare clips:" + all);

  write_text(ctx.manifest_path(), format_manifest(manifest) + "# config_hash=" + hex64(ctx.hash) + "\n");
  write_text(ctx.out() / "config.resolved.ini", format_config(ctx.cfg));
  log("prepared " + std::to_string(ids.size()) + " clips (" + std::to_string(manifest.train_ids.size()) + " train, " +
      std::to_string(manifest.test_ids.size()) + " test)");
}

std::vector<Tensor3> scaled_mixture_images(const Context& ctx, ImageKind kind, const std::vector<std::string>& ids,
                                           std::uint64_t* input_hash) {
  std::vector<Tensor3> out(ids.size());
  std::vector<std::uint64_t> hashes(ids.size());
  parallel_for(ids.size(), ctx.cfg.pipeline.workers, [&](std::size_t i) {
    const auto p = ctx.image_path(kind, ids[i]);
    require_artifact(p, "sound image", "prepare");
    const auto bytes = read_file_bytes(p.string());
    std::uint64_t h = 0;
    const SoundImage img = decode_image(bytes, p.string(), &h);
    check_hash(ctx, p, h);
    out[i] = input_scale(img, ctx.cfg.pipeline.input_rms) * img.data;
    hashes[i] = fnv1a(bytes);
  });
  if (input_hash) {
    std::uint64_t h = fnv1a(std::string_view(kind_name(kind)));
    for (auto x : hashes) h = fnv1a(hex64(x), h);
    *input_hash = h;
  }
  return out;
}

void cmd_sweep(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  const auto out = ctx.out() / "sweep.csv";
  guard_output(ctx, out);
  std::vector<std::string> ids = manifest.train_ids;
  if (ctx.cfg.sweep_clips && ids.size() > ctx.cfg.sweep_clips) ids.resize(ctx.cfg.sweep_clips);
  const auto images = scaled_mixture_images(ctx, ctx.cfg.sweep_kind, ids, nullptr);
  const auto points = threshold_sweep(images, ctx.cfg.sweep_kind, ctx.cfg.pipeline, ctx.cfg.sweep);
  write_text(out, format_sweep_csv(points));
  log("wrote " + out.string());
}

void write_bank(const Context& ctx, const fs::path& p, const Dictionary& d, AtomRole role, bool trained,
                std::uint64_t input_hash) {
  AtomBankFile f;
  f.dictionary = d;
  f.role = role;
  f.trained = trained;
  f.config_hash = ctx.hash;
  f.input_hash = input_hash;
  write_atom_bank(p.string(), f);
}

AtomBankFile read_bank(const Context& ctx, const fs::path& p, AtomRole role, const std::string& stage) {
  require_artifact(p, "atom bank", stage);
  auto f = read_atom_bank(p.string());
  check_hash(ctx, p, f.config_hash);
  if (f.role != role) fail(ErrorKind::kFormat, p.string() + ": unexpected atom bank role");
  return f;
}

void cmd_train(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  for (ImageKind kind : ctx.cfg.kinds()) {
    const auto out = ctx.dict_path(kind);
    guard_output(ctx, out);
    std::uint64_t input_hash = 0;
    const auto images = scaled_mixture_images(ctx, kind, manifest.train_ids, &input_hash);
    TrainReport report;
    const Dictionary dict = train_coding_dictionary(images, kind, ctx.cfg.pipeline, &report);
    write_bank(ctx, out, dict, AtomRole::kCoding, true, input_hash);
    std::string csv = "epoch,mean_error,mean_sparsity\n";
    for (std::size_t e = 0; e < report.epochs.size(); ++e)
      csv += std::to_string(e + 1) + "," + fmt_number(report.epochs[e].mean_error) + "," +
             fmt_number(report.epochs[e].mean_sparsity) + "\n";
    write_text(ctx.out() / "models" / (std::string(kind_name(kind)) + ".train.csv"), csv);
    log("trained " + std::string(kind_name(kind)) + " dictionary -> " + out.string());
  }
}

void cmd_train_readouts(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  std::vector<ClipData> clips;
  for (ImageKind kind : ctx.cfg.kinds()) {
    const auto dict_file = read_bank(ctx, ctx.dict_path(kind), AtomRole::kCoding, "train");
    const auto out_v = ctx.readout_path(kind, true), out_a = ctx.readout_path(kind, false);
    guard_output(ctx, out_v);
    guard_output(ctx, out_a);
    if (clips.empty()) clips = load_clips(ctx, manifest.train_ids, manifest.channel_order);
    std::vector<ScaledImages> images(clips.size());
    parallel_for(clips.size(), ctx.cfg.pipeline.workers,
                 [&](std::size_t i) { images[i] = scaled_images(clips[i], kind, ctx.cfg.pipeline.input_rms); });
    const ReadoutPair r = fit_readouts(images, dict_file.dictionary, ctx.cfg.pipeline);
    const std::uint64_t input_hash = fnv1a(hex64(dict_file.input_hash), fnv1a(std::string_view("readouts")));
    write_bank(ctx, out_v, {r.geometry, r.kind, r.vocal}, AtomRole::kVocalReadout, r.trained, input_hash);
    write_bank(ctx, out_a, {r.geometry, r.kind, r.accompaniment}, AtomRole::kAccompanimentReadout, r.trained,
               input_hash);
    log("trained " + std::string(kind_name(kind)) + " readouts");
  }
}

struct LoadedModel {
  Dictionary dictionary;
  ReadoutPair readouts;
  std::uint64_t input_hash = 0;
};

LoadedModel load_model(const Context& ctx, ImageKind kind) {
  LoadedModel m;
  const auto d = read_bank(ctx, ctx.dict_path(kind), AtomRole::kCoding, "train");
  const auto v = read_bank(ctx, ctx.readout_path(kind, true), AtomRole::kVocalReadout, "train-readouts");
  const auto a = read_bank(ctx, ctx.readout_path(kind, false), AtomRole::kAccompanimentReadout, "train-readouts");
  m.dictionary = d.dictionary;
  m.readouts = readouts_from_files(v, a);
  m.input_hash = v.input_hash;
  return m;
}

void cmd_separate(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  for (ImageKind kind : ctx.cfg.kinds()) {
    const LoadedModel model = load_model(ctx, kind);
    for (const auto& id : manifest.test_ids) {
      guard_output(ctx, ctx.stem_path(id, true, kind, SeparationPass::kSingle));
      guard_output(ctx, ctx.stem_path(id, false, kind, SeparationPass::kSingle));
    }
    const Separator sep(model.dictionary, model.readouts, ctx.cfg.pipeline.lca, ctx.cfg.pipeline.input_rms);
    const auto& ids = manifest.test_ids;
    parallel_for(ids.size(), ctx.cfg.pipeline.workers, [&](std::size_t i) {
      const auto mix_path = ctx.mixture_path(ids[i]);
      require_artifact(mix_path, "mixture", "prepare");
      const StemEstimate est = sep.separate(read_mono(ctx, mix_path), kind, ids[i]);
      const std::string prov = ctx.provenance(model.input_hash);
      write_mono(ctx.stem_path(ids[i], true, kind, est.pass), est.vocal, wav::SampleFormat::kPcm16, prov);
      write_mono(ctx.stem_path(ids[i], false, kind, est.pass), est.accompaniment, wav::SampleFormat::kPcm16, prov);
    });
    log("separated " + std::to_string(ids.size()) + " clips with the " + kind_name(kind) + " model");
  }
}

void cmd_denoise(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  const ImageKind kind = ImageKind::kPhaseRich;
  const LoadedModel model = load_model(ctx, kind);
  const auto& ids = manifest.test_ids;
  for (const auto& id : ids) {
    require_artifact(ctx.stem_path(id, true, kind, SeparationPass::kSingle), "Phase stem", "separate");
    require_artifact(ctx.stem_path(id, false, kind, SeparationPass::kSingle), "Phase stem", "separate");
    guard_output(ctx, ctx.stem_path(id, true, kind, SeparationPass::kDenoised));
    guard_output(ctx, ctx.stem_path(id, false, kind, SeparationPass::kDenoised));
  }
  const Separator sep(model.dictionary, model.readouts, ctx.cfg.pipeline.lca, ctx.cfg.pipeline.input_rms);
  parallel_for(ids.size(), ctx.cfg.pipeline.workers, [&](std::size_t i) {
    StemEstimate est;
    est.clip_id = ids[i];
    est.kind = kind;
    est.vocal = read_mono(ctx, ctx.stem_path(ids[i], true, kind, SeparationPass::kSingle));
    est.accompaniment = read_mono(ctx, ctx.stem_path(ids[i], false, kind, SeparationPass::kSingle));
    const Waveform mix = read_mono(ctx, ctx.mixture_path(ids[i]));
    est.image_scale = input_scale(waveform_to_image(mix, kind), ctx.cfg.pipeline.input_rms);
    const StemEstimate out = sep.denoise(est);
    const std::string prov = ctx.provenance(model.input_hash);
    write_mono(ctx.stem_path(ids[i], true, kind, out.pass), out.vocal, wav::SampleFormat::kPcm16, prov);
    write_mono(ctx.stem_path(ids[i], false, kind, out.pass), out.accompaniment, wav::SampleFormat::kPcm16, prov);
  });
  log("denoised " + std::to_string(ids.size()) + " Phase stems");
}

void cmd_eval(const Context& ctx) {
  const auto manifest = load_manifest(ctx);
  const auto scores_path = ctx.out() / "scores.csv";
  const auto agg_path = ctx.out() / "aggregates.txt";
  guard_output(ctx, scores_path);
  guard_output(ctx, agg_path);
  const auto truth = load_clips(ctx, manifest.test_ids, manifest.channel_order);
  std::vector<ConditionResult> results;
  for (Condition c : ctx.cfg.conditions) {
    const ImageKind kind = condition_kind(c);
    const SeparationPass pass = c == Condition::kDenoised ? SeparationPass::kDenoised : SeparationPass::kSingle;
    const std::string stage = pass == SeparationPass::kDenoised ? "denoise" : "separate";
    ConditionResult r;
    r.condition = c;
    r.stems.resize(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto pv = ctx.stem_path(truth[i].id, true, kind, pass);
      const auto pa = ctx.stem_path(truth[i].id, false, kind, pass);
      require_artifact(pv, "stem", stage);
      require_artifact(pa, "stem", stage);
      r.stems[i].vocal = read_mono(ctx, pv);
      r.stems[i].accompaniment = read_mono(ctx, pa);
    }
    r.clips = score_stems(truth, r.stems, ctx.cfg.pipeline.workers);
    r.aggregate = aggregate(r.clips);
    results.push_back(std::move(r));
  }
  write_text(scores_path, format_scores_csv(results));
  write_text(agg_path, "# config_hash=" + hex64(ctx.hash) + "\n" + format_aggregates(results));
  log("wrote " + scores_path.string() + " and " + agg_path.string());
}

void cmd_report(const Context& ctx) {
  const auto agg_path = ctx.out() / "aggregates.txt";
  require_artifact(agg_path, "aggregates", "eval");
  const std::string text = read_text(agg_path);
  check_hash(ctx, agg_path, hash_from_comment(text));
  std::map<std::string, std::string> fields;
  std::vector<ConditionResult> results;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    fields.clear();
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail(ErrorKind::kFormat, agg_path.string() + ": malformed line '" + line + "'");
      fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char* key : {"condition", "source", "metric", "value", "spread"})
      if (!fields.count(key)) fail(ErrorKind::kFormat, agg_path.string() + ": line lacks '" + key + "'");
    const Condition c = condition_from_name(fields["condition"]);
    auto it = std::find_if(results.begin(), results.end(), [&](const auto& r) { return r.condition == c; });
    if (it == results.end()) {
      results.push_back({});
      results.back().condition = c;
      it = std::prev(results.end());
    }
    SourceAggregate& src = fields["source"] == "vocal" ? it->aggregate.vocal : it->aggregate.accompaniment;
    const std::string& m = fields["metric"];
    MetricSummary* target = m == "GSIR" ? &src.sir : m == "GSAR" ? &src.sar : m == "GNSDR" ? &src.nsdr : &src.sdr;
    target->mean = std::stod(fields["value"]);
    target->spread = std::stod(fields["spread"]);
  }
  const std::string table = format_table(results);
  const auto out = ctx.out() / "table.txt";
  guard_output(ctx, out);
  write_text(out, table);
  std::cout << table;
}

void cmd_synth(const std::string& out_dir, std::size_t count, std::uint64_t seed, double min_s, double max_s,
               bool force) {
  if (count == 0) fail(ErrorKind::kUsage, "synth: --count must be >= 1");
  if (!(min_s > 0.0 && max_s >= min_s)) fail(ErrorKind::kUsage, "synth: need 0 < --min-seconds <= --max-seconds");
  fs::create_directories(out_dir);
  synthetic::SynthOptions opt;
  opt.min_seconds = min_s;
  opt.max_seconds = max_s;
  const auto clips = synthetic::synth_dataset(count, seed, opt);
  for (const auto& c : clips) {
    const fs::path p = fs::path(out_dir) / (c.clip_id + ".wav");
    if (fs::exists(p) && !force) fail(ErrorKind::kUsage, p.string() + " already exists; pass --force to overwrite");
    save_clip_pair(p.string(), c, wav::SampleFormat::kPcm16);
  }
  log("wrote " + std::to_string(clips.size()) + " synthetic clips to " + out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singing-voice separation with convolutional sparse coding"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  bool force = false;
  std::size_t workers = 0;
  app.add_option("--config", config_path, "Run configuration file (defaults to the desk preset)");
  app.add_flag("--force", force, "Overwrite existing artifacts");
  app.add_option("--workers", workers, "Per-clip worker threads (overrides run.workers)");

  struct Stage {
    const char* name;
    const char* help;
    void (*fn)(const Context&);
  };
  const Stage stages[] = {
      {"prepare", "Split the dataset and write mixtures and sound images", cmd_prepare},
      {"sweep", "Threshold sweep: sparsity and denoising error per lambda", cmd_sweep},
      {"train", "Learn the coding dictionaries", cmd_train},
      {"train-readouts", "Fit vocal and accompaniment readouts", cmd_train_readouts},
      {"separate", "Separate the test mixtures", cmd_separate},
      {"denoise", "Second pass over the Phase stems", cmd_denoise},
      {"eval", "Score stems with BSS-eval", cmd_eval},
      {"report", "Print the results table", cmd_report},
  };
  std::vector<std::pair<CLI::App*, const Stage*>> subs;
  for (const auto& s : stages) subs.emplace_back(app.add_subcommand(s.name, s.help), &s);
  CLI::App* run = app.add_subcommand("run", "All stages in order");

  std::string synth_out;
  std::size_t synth_count = 20;
  std::uint64_t synth_seed = 1;
  double synth_min = 4.0, synth_max = 6.0;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic two-stem dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of clips");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--min-seconds", synth_min, "Shortest clip");
  synth->add_option("--max-seconds", synth_max, "Longest clip");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (*synth) {
      cmd_synth(synth_out, synth_count, synth_seed, synth_min, synth_max, force);
      return 0;
    }
    Context ctx;
    ctx.cfg = config_path.empty() ? RunConfig::for_preset(Preset::kDesk) : load_config(config_path);
    if (workers) ctx.cfg.pipeline.workers = workers;
    ctx.hash = config_hash(ctx.cfg);
    ctx.force = force;
    if (*run) {
      for (const auto& s : stages) {
        if (std::string(s.name) == "sweep") continue;
        if (std::string(s.name) == "denoise" &&
            std::find(ctx.cfg.conditions.begin(), ctx.cfg.conditions.end(), Condition::kDenoised) ==
                ctx.cfg.conditions.end())
          continue;
        s.fn(ctx);
      }
      return 0;
    }
    for (const auto& [sub, stage] : subs)
      if (*sub) stage->fn(ctx);
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "sparsesep: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sparsesep: internal error: %s\n", e.what());
    return 1;
  }
}
