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

#include <algorithm>
#include <atomic>
#include <stdexcept>

#include <gtest/gtest.h>

#include "sparsesep/experiments.hpp"
#include "sparsesep/synthetic.hpp"

namespace sparsesep {
namespace {

PipelineParams tiny_params() {
  PipelineParams p = PipelineParams::desk();
  p.n_features = 16;
  p.lca.n_steps = 30;
  p.readout.epochs = 3;
  return p;
}

std::vector<ClipData> tiny_clips(std::size_t n, std::uint64_t seed) {
  synthetic::SynthOptions opt;
  opt.min_seconds = 2.0;
  opt.max_seconds = 2.5;
  std::vector<ClipData> out;
  for (const auto& c : synthetic::synth_dataset(n, seed, opt)) out.push_back(make_clip_data(c, 2.0));
  return out;
}

TEST(Conditions, NamesRoundTrip) {
  for (auto c : {Condition::kPhase, Condition::kNoPhase, Condition::kNoPhaseX2, Condition::kDenoised})
    EXPECT_EQ(condition_from_name(condition_name(c)), c);
  EXPECT_EQ(condition_kind(Condition::kDenoised), ImageKind::kPhaseRich);
  EXPECT_EQ(condition_kind(Condition::kNoPhaseX2), ImageKind::kMagnitudeDouble);
  EXPECT_THROW(condition_from_name("phase"), Error);
}

TEST(PipelineParams, PatchFramesCover128Ms) {
  const auto p = PipelineParams::paper();
  EXPECT_EQ(p.patch_frames(ImageKind::kPhaseRich), 8u);
  EXPECT_EQ(p.patch_frames(ImageKind::kMagnitudeDouble), 4u);
  EXPECT_EQ(p.n_features, 8192u);
  EXPECT_EQ(p.lca.n_steps, 1000u);
  EXPECT_EQ(p.learn.epochs, 4u);
  EXPECT_EQ(p.readout.epochs, 40u);
  EXPECT_EQ(p.geometry(ImageKind::kPhaseRich).n_positions(128), 61u);
  EXPECT_EQ(p.geometry(ImageKind::kMagnitudeDouble).n_positions(64), 31u);
}

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Sweep, SparsityFallsWithLambdaOnAFixedDictionary) {
  const auto clips = tiny_clips(3, 1);
  const auto params = tiny_params();
  std::vector<Tensor3> clean;
  for (const auto& c : clips) clean.push_back(scaled_images(c, ImageKind::kMagnitude, params.input_rms).mixture);
  const Dictionary dict = train_coding_dictionary(clean, ImageKind::kMagnitude, params);
  SweepOptions opt;
  opt.lambdas.push_back(1e6);
  const auto points = threshold_sweep(clean, ImageKind::kMagnitude, params, opt, &dict);
  ASSERT_EQ(points.size(), 7u);
  for (std::size_t i = 1; i < points.size(); ++i) EXPECT_LE(points[i].mean_sparsity, points[i - 1].mean_sparsity);
  EXPECT_EQ(points.back().mean_sparsity, 0.0);
  EXPECT_DOUBLE_EQ(points.back().denoise_error, 1.0);

  const auto csv = format_sweep_csv(points);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,mean_sparsity,denoise_error");
}

TEST(Sweep, RejectsEmptyGrid) {
  SweepOptions opt;
  opt.lambdas.clear();
  const std::vector<Tensor3> none;
  try {
    threshold_sweep(none, ImageKind::kMagnitude, tiny_params(), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new std::vector<ClipData>(tiny_clips(4, 2));
    test_ = new std::vector<ClipData>(tiny_clips(2, 3));
    const Condition all[] = {Condition::kPhase, Condition::kNoPhase, Condition::kNoPhaseX2, Condition::kDenoised};
    results_ = new std::vector<ConditionResult>(run_conditions(all, *train_, *test_, tiny_params()));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete test_;
    delete results_;
  }
  static std::vector<ClipData>* train_;
  static std::vector<ClipData>* test_;
  static std::vector<ConditionResult>* results_;
};

std::vector<ClipData>* TinyRun::train_ = nullptr;
std::vector<ClipData>* TinyRun::test_ = nullptr;
std::vector<ConditionResult>* TinyRun::results_ = nullptr;

TEST_F(TinyRun, ScoresCsvHasOneGlobalRowPerCondition) {
  const auto csv = format_scores_csv(*results_);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "condition,clip_id,sdr_v,sir_v,sar_v,nsdr_v,sdr_a,sir_a,sar_a,nsdr_a");
  std::size_t globals = 0, pos = 0;
  while ((pos = csv.find(",GLOBAL,", pos)) != std::string::npos) {
    ++globals;
    ++pos;
  }
  EXPECT_EQ(globals, 4u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 3);
}

TEST_F(TinyRun, DenoisedConsumesPhaseStems) {
  const auto& phase = (*results_)[0];
  const auto& den = (*results_)[3];
  ASSERT_EQ(den.condition, Condition::kDenoised);
  EXPECT_NE(den.provenance.find("input=Phase"), std::string::npos);
  for (std::size_t i = 0; i < phase.stems.size(); ++i) {
    EXPECT_EQ(phase.stems[i].pass, SeparationPass::kSingle);
    EXPECT_EQ(den.stems[i].pass, SeparationPass::kDenoised);
    EXPECT_EQ(den.stems[i].image_scale, phase.stems[i].image_scale);
  }
}

TEST_F(TinyRun, StemsKeepClipLength) {
  for (const auto& r : *results_)
    for (const auto& s : r.stems) {
      EXPECT_EQ(s.vocal.size(), 32000u);
      EXPECT_EQ(s.accompaniment.size(), 32000u);
    }
}

TEST_F(TinyRun, RerunIsByteIdentical) {
  const Condition all[] = {Condition::kPhase, Condition::kNoPhase, Condition::kNoPhaseX2, Condition::kDenoised};
  const auto again = run_conditions(all, *train_, *test_, tiny_params());
  EXPECT_EQ(format_scores_csv(again), format_scores_csv(*results_));
  EXPECT_EQ(format_aggregates(again), format_aggregates(*results_));
}

TEST_F(TinyRun, TableHasTheResultColumns) {
  const auto table = format_table(*results_);
  const auto header = table.substr(0, table.find('\n'));
  EXPECT_NE(header.find("GSIR"), std::string::npos);
  EXPECT_NE(header.find("GSAR"), std::string::npos);
  EXPECT_NE(header.find("GNSDR"), std::string::npos);
  EXPECT_NE(table.find("Denoised"), std::string::npos);
  const auto agg = format_aggregates(*results_);
  EXPECT_NE(agg.find("condition=Phase source=vocal metric=GSAR value="), std::string::npos);
}

TEST(RunConditions, EmptySplitsAreDataErrors) {
  const std::vector<ClipData> none;
  const auto some = tiny_clips(1, 4);
  try {
    run_condition(Condition::kPhase, none, some, tiny_params());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

}  // namespace
}  // namespace sparsesep
