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

// Reference computations that the library results are checked against.
// Each one takes a deliberately different route from the implementation
// (explicit matrices, scalar loops, closed forms) and must stay that way.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "sparsesep/lca.hpp"

namespace sparsesep::oracle {

/// Explicit synthesis matrix: column (p * n_features + i) is atom i placed
/// at position p in an otherwise zero image, flattened.
inline Eigen::MatrixXd synthesis_matrix(const Dictionary& dict, std::size_t n_frames) {
  const auto& g = dict.geometry;
  const std::size_t n_pos = g.n_positions(n_frames);
  const std::size_t n = dict.n_features();
  const std::size_t dim = g.channels * g.n_freq_bins * n_frames;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n * n_pos));
  for (std::size_t p = 0; p < n_pos; ++p)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t f = 0; f < g.n_freq_bins; ++f)
          for (std::size_t k = 0; k < g.patch_frames; ++k) {
            const std::size_t row = (c * g.n_freq_bins + f) * n_frames + p * g.stride + k;
            const std::size_t col_in_atom = (c * g.n_freq_bins + f) * g.patch_frames + k;
            phi(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(p * n + i)) =
                dict.atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_in_atom));
          }
  return phi;
}

inline Eigen::VectorXd flatten_code(const SparseCode& code) {
  Eigen::VectorXd v(code.a.size());
  for (Eigen::Index p = 0; p < code.a.cols(); ++p)
    for (Eigen::Index i = 0; i < code.a.rows(); ++i) v(p * code.a.rows() + i) = code.a(i, p);
  return v;
}

inline Eigen::VectorXd flatten_image(const Tensor3& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

/// Energy by scalar summation over the explicit synthesis matrix.
inline double naive_energy(const Tensor3& image, const Dictionary& dict, const SparseCode& code, double lambda) {
  const Eigen::MatrixXd phi = synthesis_matrix(dict, code.n_frames);
  const Eigen::VectorXd a = flatten_code(code);
  const Eigen::VectorXd y = flatten_image(image);
  double sq = 0.0;
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    double recon = 0.0;
    for (Eigen::Index c = 0; c < phi.cols(); ++c) recon += phi(r, c) * a(c);
    sq += (y(r) - recon) * (y(r) - recon);
  }
  double l1 = 0.0;
  for (Eigen::Index c = 0; c < a.size(); ++c) l1 += std::abs(a(c));
  return 0.5 * sq + lambda * l1;
}

/// Cyclic coordinate descent on 1/2 ||y - Phi a||^2 + lambda ||a||_1, run
/// until no coordinate moves by more than `tol`.
inline Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda,
                                                double tol = 1e-10, int max_sweeps = 1000000) {
  const Eigen::Index n = phi.cols();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd residual = y;
  const Eigen::VectorXd col_sq = phi.colwise().squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double rho = phi.col(j).dot(residual) + col_sq(j) * a(j);
      double next = 0.0;
      if (rho > lambda) next = (rho - lambda) / col_sq(j);
      else if (rho < -lambda) next = (rho + lambda) / col_sq(j);
      const double delta = next - a(j);
      if (delta != 0.0) {
        residual -= delta * phi.col(j);
        a(j) = next;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    if (max_delta < tol) break;
  }
  return a;
}

inline double lasso_energy(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, const Eigen::VectorXd& a,
                           double lambda) {
  return 0.5 * (y - phi * a).squaredNorm() + lambda * a.lpNorm<1>();
}

/// Solves the k x k system by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_small(std::vector<std::vector<double>> m, std::vector<double> rhs) {
  const std::size_t k = rhs.size();
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < k; ++c) m[r][c] -= f * m[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(k);
  for (std::size_t i = k; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t c = i + 1; c < k; ++c) s -= m[i][c] * x[c];
    x[i] = s / m[i][i];
  }
  return x;
}

struct BssReference {
  double sdr, sir, sar;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// SDR/SIR/SAR through explicit normal equations on the source Gram matrix.
/// Assumes linearly independent sources and no capped cases.
inline BssReference bss_normal_equations(const std::vector<double>& est, const std::vector<std::vector<double>>& src,
                                         std::size_t target) {
  const std::size_t k = src.size(), n = est.size();
  std::vector<std::vector<double>> gram(k, std::vector<double>(k));
  std::vector<double> rhs(k);
  for (std::size_t i = 0; i < k; ++i) {
    rhs[i] = dot(src[i], est);
    for (std::size_t j = 0; j < k; ++j) gram[i][j] = dot(src[i], src[j]);
  }
  const auto coef = solve_small(gram, rhs);
  const double alpha = rhs[target] / gram[target][target];
  double st = 0.0, ei = 0.0, ea = 0.0, dist = 0.0, proj_sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double proj = 0.0;
    for (std::size_t i = 0; i < k; ++i) proj += coef[i] * src[i][t];
    const double s_t = alpha * src[target][t];
    st += s_t * s_t;
    ei += (proj - s_t) * (proj - s_t);
    ea += (est[t] - proj) * (est[t] - proj);
    dist += (est[t] - s_t) * (est[t] - s_t);
    proj_sq += proj * proj;
  }
  return {10.0 * std::log10(st / dist), 10.0 * std::log10(st / ei), 10.0 * std::log10(proj_sq / ea)};
}

}  // namespace sparsesep::oracle
