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

// Projection-based separation metrics with time-invariant gains: the
// estimate is split into its projection on the target source, the rest of
// its projection on the span of all sources, and the remainder.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparsesep/audio_io.hpp"
#include "sparsesep/error.hpp"

namespace sparsesep {

inline constexpr double kDbCap = 200.0;
inline constexpr double kPinvTolerance = 1e-10;

struct Decomposition {
  Eigen::VectorXd s_target;
  Eigen::VectorXd e_interf;
  Eigen::VectorXd e_artif;
};

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace detail

inline Decomposition decompose(std::span<const double> estimate, std::span<const std::vector<double>> sources,
                               std::size_t target_index) {
  require(!sources.empty(), ErrorKind::kShape, "decompose: no sources");
  require(target_index < sources.size(), ErrorKind::kShape, "decompose: target index out of range");
  const auto len = static_cast<Eigen::Index>(estimate.size());
  for (const auto& s : sources)
    require(s.size() == estimate.size(), ErrorKind::kShape, "decompose: sources and estimate differ in length");
  const Eigen::Map<const Eigen::VectorXd> est(estimate.data(), len);
  const auto target = detail::as_vector(sources[target_index]);
  const double target_energy = target.squaredNorm();
  if (!(target_energy > 0.0)) fail(ErrorKind::kDegenerateSource, "decompose: target source has zero energy");

  Decomposition d;
  d.s_target = (target.dot(est) / target_energy) * target;

  const auto k = static_cast<Eigen::Index>(sources.size());
  Eigen::MatrixXd gram(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto si = detail::as_vector(sources[static_cast<std::size_t>(i)]);
    rhs(i) = si.dot(est);
    for (Eigen::Index j = 0; j <= i; ++j)
      gram(i, j) = gram(j, i) = si.dot(detail::as_vector(sources[static_cast<std::size_t>(j)]));
  }
  // Pseudo-inverse of the source Gram matrix, tolerant of collinear sources.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i)
    if (eig.eigenvalues()(i) > kPinvTolerance * top) inv(i) = 1.0 / eig.eigenvalues()(i);
  const Eigen::VectorXd coef = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * rhs;

  Eigen::VectorXd projection = Eigen::VectorXd::Zero(len);
  for (Eigen::Index i = 0; i < k; ++i) projection += coef(i) * detail::as_vector(sources[static_cast<std::size_t>(i)]);
  d.e_interf = projection - d.s_target;
  d.e_artif = est - projection;
  return d;
}

inline Decomposition decompose(const Waveform& estimate, std::span<const Waveform> sources, std::size_t target_index) {
  std::vector<std::vector<double>> s;
  s.reserve(sources.size());
  for (const auto& w : sources) s.push_back(w.samples);
  return decompose(std::span<const double>(estimate.samples), std::span<const std::vector<double>>(s), target_index);
}

/// 10 log10(num / den) clamped to [-200, 200]; a zero numerator wins over a
/// zero denominator.
inline double capped_db(double num, double den) {
  if (!(num > 0.0)) return -kDbCap;
  if (!(den > 0.0)) return kDbCap;
  return std::clamp(10.0 * std::log10(num / den), -kDbCap, kDbCap);
}

struct Ratios {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

inline Ratios sdr_sir_sar(const Decomposition& d) {
  Ratios r;
  const double target = d.s_target.squaredNorm();
  r.sdr = capped_db(target, (d.e_interf + d.e_artif).squaredNorm());
  r.sir = capped_db(target, d.e_interf.squaredNorm());
  r.sar = capped_db((d.s_target + d.e_interf).squaredNorm(), d.e_artif.squaredNorm());
  return r;
}

/// SDR improvement of `estimate` over the unprocessed mixture.
inline double nsdr(std::span<const double> estimate, std::span<const std::vector<double>> sources,
                   std::size_t target_index, std::span<const double> mixture) {
  require(mixture.size() == estimate.size(), ErrorKind::kShape, "nsdr: mixture length differs");
  const double est_sdr = sdr_sir_sar(decompose(estimate, sources, target_index)).sdr;
  const double mix_sdr = sdr_sir_sar(decompose(mixture, sources, target_index)).sdr;
  return est_sdr - mix_sdr;
}

struct SourceMetrics {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  double nsdr = 0.0;
};

struct ClipScores {
  std::string clip_id;
  std::size_t length = 0;  // samples, used as aggregation weight
  SourceMetrics vocal;
  SourceMetrics accompaniment;
};

inline SourceMetrics score_source(std::span<const double> estimate, std::span<const std::vector<double>> sources,
                                  std::size_t target_index, std::span<const double> mixture) {
  const Ratios r = sdr_sir_sar(decompose(estimate, sources, target_index));
  const double mix_sdr = sdr_sir_sar(decompose(mixture, sources, target_index)).sdr;
  return {r.sdr, r.sir, r.sar, r.sdr - mix_sdr};
}

/// Scores both stems against the true (vocal, accompaniment) pair.
inline ClipScores score_clip(const std::string& clip_id, const Waveform& est_vocal, const Waveform& est_accomp,
                             const Waveform& true_vocal, const Waveform& true_accomp, const Waveform& mixture) {
  const std::vector<std::vector<double>> sources{true_vocal.samples, true_accomp.samples};
  ClipScores c;
  c.clip_id = clip_id;
  c.length = mixture.size();
  c.vocal = score_source(est_vocal.samples, sources, 0, mixture.samples);
  c.accompaniment = score_source(est_accomp.samples, sources, 1, mixture.samples);
  return c;
}

struct MetricSummary {
  double mean = 0.0;    // length-weighted
  double spread = 0.0;  // unweighted population standard deviation
};

struct SourceAggregate {
  MetricSummary sdr, sir, sar, nsdr;  // nsdr.mean is GNSDR, sir.mean GSIR, sar.mean GSAR
};

struct AggregateScores {
  SourceAggregate vocal;
  SourceAggregate accompaniment;
};

inline MetricSummary summarize(std::span<const double> values, std::span<const double> weights) {
  require(values.size() == weights.size(), ErrorKind::kAggregation, "summarize: value/weight count mismatch");
  require(!values.empty(), ErrorKind::kAggregation, "cannot aggregate an empty score list");
  double wsum = 0.0, wx = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(weights[i] > 0.0, ErrorKind::kAggregation, "aggregation weights must be positive");
    wsum += weights[i];
    wx += weights[i] * values[i];
    sum += values[i];
  }
  const double plain_mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - plain_mean) * (v - plain_mean);
  return {wx / wsum, std::sqrt(var / static_cast<double>(values.size()))};
}

inline AggregateScores aggregate(std::span<const ClipScores> clips) {
  if (clips.empty()) fail(ErrorKind::kAggregation, "cannot aggregate an empty score list");
  std::vector<double> w;
  for (const auto& c : clips) w.push_back(static_cast<double>(c.length));
  auto pick = [&](auto member_fn) {
    std::vector<double> v;
    for (const auto& c : clips) v.push_back(member_fn(c));
    return summarize(v, w);
  };
  AggregateScores a;
  a.vocal.sdr = pick([](const ClipScores& c) { return c.vocal.sdr; });
  a.vocal.sir = pick([](const ClipScores& c) { return c.vocal.sir; });
  a.vocal.sar = pick([](const ClipScores& c) { return c.vocal.sar; });
  a.vocal.nsdr = pick([](const ClipScores& c) { return c.vocal.nsdr; });
  a.accompaniment.sdr = pick([](const ClipScores& c) { return c.accompaniment.sdr; });
  a.accompaniment.sir = pick([](const ClipScores& c) { return c.accompaniment.sir; });
  a.accompaniment.sar = pick([](const ClipScores& c) { return c.accompaniment.sar; });
  a.accompaniment.nsdr = pick([](const ClipScores& c) { return c.accompaniment.nsdr; });
  return a;
}

}  // namespace sparsesep
