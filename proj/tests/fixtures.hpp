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

// Synthetic problems with a known answer, shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sparsesep/dictionary.hpp"
#include "sparsesep/lca.hpp"

namespace sparsesep::fixture {

struct PlantedProblem {
  Dictionary planted;
  std::vector<Tensor3> images;
};

/// Images built from non-overlapping placements (stride == patch_frames)
/// of a random unit-norm dictionary: at every position `per_position`
/// distinct atoms with non-negative weights, plus Gaussian noise at
/// `noise` times the clean RMS.
inline PlantedProblem planted_problem(std::size_t n_atoms, const PatchGeometry& g, std::size_t n_images,
                                      std::size_t n_positions, std::size_t per_position, double noise,
                                      std::uint64_t seed) {
  PlantedProblem p;
  p.planted = init_dictionary(n_atoms, g, seed, ImageKind::kMagnitude);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t frames = (n_positions - 1) * g.stride + g.patch_frames;
  std::vector<std::size_t> ids(n_atoms);
  for (std::size_t n = 0; n < n_images; ++n) {
    SparseCode code{g, frames, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_atoms),
                                                     static_cast<Eigen::Index>(n_positions))};
    for (std::size_t pos = 0; pos < n_positions; ++pos) {
      for (std::size_t i = 0; i < n_atoms; ++i) ids[i] = i;
      std::shuffle(ids.begin(), ids.end(), rng);
      for (std::size_t k = 0; k < per_position; ++k)
        code.a(static_cast<Eigen::Index>(ids[k]), static_cast<Eigen::Index>(pos)) = amp(rng);
    }
    Tensor3 img = reconstruct(p.planted, code);
    const double rms = std::sqrt(img.squared_norm() / static_cast<double>(img.size()));
    for (double& v : img.values) v += noise * rms * gauss(rng);
    p.images.push_back(std::move(img));
  }
  return p;
}

/// Fraction of planted atoms whose best match among `learned` has
/// |correlation| above `threshold`. Atoms are unit norm, so correlation is
/// the inner product.
inline double recovered_fraction(const Dictionary& planted, const Dictionary& learned, double threshold) {
  const Eigen::MatrixXd corr = planted.atoms * learned.atoms.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < corr.rows(); ++i)
    if (corr.row(i).cwiseAbs().maxCoeff() > threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(corr.rows());
}

}  // namespace sparsesep::fixture
