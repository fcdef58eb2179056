// SPDX-License-Identifier: Apache-2.0
//
// dopcap - capacity bounds for Doppler-impaired OFDM channels
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dopcap {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed user input: configs, profiles, CLI arguments.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A constructed object failed its post-construction invariant check.
class ConstructionError : public Error {
  public:
    using Error::Error;
};

inline void require_square(const CMatrix& A, const char* what) {
    if (A.rows() != A.cols())
        throw DimensionError(std::string(what) + " must be square");
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                             ", got " + std::to_string(got));
}

namespace linalg {

inline CMatrix hermitian_part(const CMatrix& A) { return 0.5 * (A + A.adjoint()); }

inline double real_trace(const CMatrix& A) { return A.trace().real(); }

/// log det of a Hermitian positive definite matrix. Cholesky first; if roundoff
/// breaks positivity, fall back to an eigendecomposition with eigenvalues
/// clamped at 1e-12.
inline double logdet_hpd(const CMatrix& A) {
    Eigen::LLT<CMatrix> llt(A);
    if (llt.info() == Eigen::Success) {
        const auto& L = llt.matrixLLT();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i)
            acc += std::log(L(i, i).real());
        return 2.0 * acc;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(A), Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        acc += std::log(std::max(es.eigenvalues()(i), 1e-12));
    return acc;
}

inline RVector hermitian_eigenvalues(const CMatrix& A) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(A), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double lambda_max(const CMatrix& A) { return hermitian_eigenvalues(A).maxCoeff(); }
inline double lambda_min(const CMatrix& A) { return hermitian_eigenvalues(A).minCoeff(); }

/// Euclidean projection onto {v >= 0, sum(v) <= cap}.
inline RVector project_capped_simplex(const RVector& v, double cap) {
    RVector clamped = v.cwiseMax(0.0);
    if (clamped.sum() <= cap)
        return clamped;
    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double t = (running - cap) / static_cast<double>(k + 1);
        if (sorted[k] - t > 0.0)
            theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Projection of a Hermitian matrix onto {Q >= 0, tr Q <= cap}.
inline CMatrix project_trace_psd(const CMatrix& Q, double cap) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(Q));
    const RVector lam = project_capped_simplex(es.eigenvalues(), cap);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

/// L with L L^H = Q for a Hermitian PSD Q (singular Q allowed).
inline CMatrix psd_factor(const CMatrix& Q) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(Q));
    const RVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

/// Orthonormal basis (N x (N-1)) of the orthogonal complement of a nonzero vector.
inline CMatrix orthonormal_complement(const CVector& u) {
    const Eigen::Index n = u.size();
    Eigen::HouseholderQR<CMatrix> qr{CMatrix(u)};
    CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
    return q.rightCols(n - 1);
}

inline RVector singular_values(const CMatrix& A) {
    Eigen::BDCSVD<CMatrix> svd(A);
    return svd.singularValues();
}

/// Solve A X = B for Hermitian positive definite A.
inline CMatrix hpd_solve(const CMatrix& A, const CMatrix& B) {
    Eigen::LLT<CMatrix> llt(A);
    if (llt.info() == Eigen::Success)
        return llt.solve(B);
    return A.ldlt().solve(B);
}

inline CMatrix hpd_inverse(const CMatrix& A) {
    return hpd_solve(A, CMatrix::Identity(A.rows(), A.cols()));
}

} // namespace linalg
} // namespace dopcap
