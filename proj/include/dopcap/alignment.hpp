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

#include "dopcap/channel_core.hpp"
#include "dopcap/linalg.hpp"
#include "dopcap/mc_engine.hpp"

#include <string>
#include <vector>

namespace dopcap {

struct AlignmentOptions {
    /// Singular values below rank_tol * sigma_max * N count as zero.
    double rank_tol = 1e-10;
    /// Acceptance threshold on sigma_N([FV GV]) / sigma_1.
    double check_tol = 1e-8;
};

/// Precoder V (N x (N-1), orthonormal columns) with rank[FV GV] <= N-1, the
/// left annihilator w of both FV and GV, and orthonormal bases of
/// span(FV, GV) and its complement.
struct AlignmentPrecoder {
    CMatrix V;
    CVector w;
    CMatrix U;
    CMatrix U_perp;
    Eigen::Index d_perp = 0;
    /// Which construction was used: 1 (F singular), 2 (G singular), 3 (pencil).
    int construction = 0;
    /// Pencil root t* (construction 3 only).
    cplx t_star{0.0, 0.0};
    /// sigma_N([FV GV]) / sigma_1.
    double rank_residual = 0.0;
    double unitarity_residual = 0.0;
};

namespace detail {

inline CMatrix concat_images(const CMatrix& F, const CMatrix& G, const CMatrix& V) {
    CMatrix C(F.rows(), 2 * V.cols());
    C << F * V, G * V;
    return C;
}

inline double rank_residual(const CMatrix& F, const CMatrix& G, const CMatrix& V) {
    const RVector sv = linalg::singular_values(concat_images(F, G, V));
    if (sv.size() == 0 || sv(0) == 0.0)
        return 0.0;
    const Eigen::Index n = F.rows();
    return n - 1 < sv.size() ? sv(n - 1) / sv(0) : 0.0;
}

inline CVector smallest_left_singular_vector(const CMatrix& A) {
    Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeFullU);
    return svd.matrixU().col(A.rows() - 1);
}

/// V spanning the orthogonal complement of u, or an arbitrary semi-unitary
/// matrix when u vanishes.
inline CMatrix complement_or_any(const CVector& u, double scale, const CVector& fallback) {
    if (u.norm() <= 1e-13 * std::max(scale, 1e-300))
        return linalg::orthonormal_complement(fallback);
    return linalg::orthonormal_complement(u);
}

/// Dominant direction of the (nearly colinear) pair F^H w, G^H w.
inline CVector common_direction(const CVector& a, const CVector& b) {
    CMatrix pair(a.size(), 2);
    pair << a, b;
    Eigen::JacobiSVD<CMatrix> svd(pair, Eigen::ComputeThinU);
    return svd.matrixU().col(0);
}

} // namespace detail

struct SubspaceBases {
    CMatrix U;
    CMatrix U_perp;
    Eigen::Index d_perp = 0;
};

/// Orthonormal bases of span(FV, GV) and of its orthogonal complement.
inline SubspaceBases subspace_bases(const CMatrix& F, const CMatrix& G, const CMatrix& V, double rank_tol = 1e-10) {
    const Eigen::Index n = F.rows();
    const CMatrix C = detail::concat_images(F, G, V);
    Eigen::JacobiSVD<CMatrix> svd(C, Eigen::ComputeFullU);
    const RVector sv = svd.singularValues();
    const double thr = rank_tol * (sv.size() ? sv(0) : 0.0) * static_cast<double>(n);
    Eigen::Index r = 0;
    while (r < sv.size() && sv(0) > 0.0 && sv(r) > thr)
        ++r;
    return {svd.matrixU().leftCols(r), svd.matrixU().rightCols(n - r), n - r};
}

inline AlignmentPrecoder build_precoder(const CMatrix& F, const CMatrix& G, const AlignmentOptions& opts = {}) {
    require_square(F, "F");
    require_square(G, "G");
    require_dim(G.rows(), F.rows(), "G");
    const Eigen::Index n = F.rows();
    if (n < 2)
        throw ConfigError("build_precoder: N must be at least 2");
    const double nd = static_cast<double>(n);
    const RVector svF = linalg::singular_values(F);
    const RVector svG = linalg::singular_values(G);
    const double scale = F.norm() + G.norm();

    auto rank_deficient = [&](const RVector& sv) {
        return sv(0) == 0.0 || sv(n - 1) < opts.rank_tol * nd * sv(0);
    };

    AlignmentPrecoder pre;
    if (rank_deficient(svF)) {
        pre.construction = 1;
        pre.w = detail::smallest_left_singular_vector(F);
        pre.V = detail::complement_or_any(G.adjoint() * pre.w, scale, pre.w);
        pre.rank_residual = detail::rank_residual(F, G, pre.V);
    } else if (rank_deficient(svG)) {
        pre.construction = 2;
        pre.w = detail::smallest_left_singular_vector(G);
        pre.V = detail::complement_or_any(F.adjoint() * pre.w, scale, pre.w);
        pre.rank_residual = detail::rank_residual(F, G, pre.V);
    } else {
        // det(F + tG) = 0 exactly when -t is an eigenvalue of G^{-1} F. Roots
        // are tried in order of magnitude; the residual check picks the winner.
        pre.construction = 3;
        const CMatrix pencil = -G.partialPivLu().solve(F);
        Eigen::ComplexEigenSolver<CMatrix> es(pencil, false);
        std::vector<cplx> roots(es.eigenvalues().data(), es.eigenvalues().data() + n);
        std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
        double best = std::numeric_limits<double>::infinity();
        for (cplx t : roots) {
            const CVector w = detail::smallest_left_singular_vector(F + t * G);
            const CMatrix V = linalg::orthonormal_complement(
                detail::common_direction(F.adjoint() * w, G.adjoint() * w));
            const double res = detail::rank_residual(F, G, V);
            if (res < best) {
                best = res;
                pre.w = w;
                pre.V = V;
                pre.t_star = t;
                pre.rank_residual = res;
            }
            if (res < opts.check_tol)
                break;
        }
    }
    pre.unitarity_residual = (pre.V.adjoint() * pre.V - CMatrix::Identity(n - 1, n - 1)).norm();
    if (pre.unitarity_residual > 1e-9 || pre.rank_residual >= opts.check_tol) {
        throw ConstructionError("build_precoder: invariant check failed (unitarity residual " +
                                std::to_string(pre.unitarity_residual) + ", rank residual " +
                                std::to_string(pre.rank_residual) + ")");
    }

    auto bases = subspace_bases(F, G, pre.V, opts.rank_tol);
    pre.U = std::move(bases.U);
    pre.U_perp = std::move(bases.U_perp);
    pre.d_perp = bases.d_perp;
    return pre;
}

struct PilotDirection {
    CVector v_p;
    /// False when U_perp^H G = 0: s cannot be seen through the pilot.
    bool observable = true;
};

/// Unit v maximizing ||U_perp^H G v||.
inline PilotDirection choose_pilot_direction(const CMatrix& G, const CMatrix& U_perp) {
    if (U_perp.cols() < 1)
        throw ConfigError("choose_pilot_direction: empty orthogonal complement");
    const CMatrix M = U_perp.adjoint() * G;
    Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeFullV);
    PilotDirection out;
    if (svd.singularValues()(0) <= 1e-14 * std::max(1.0, G.norm())) {
        out.v_p = CVector::Unit(G.cols(), 0);
        out.observable = false;
        return out;
    }
    out.v_p = svd.matrixV().col(0);
    return out;
}

struct SEstimate {
    cplx s_hat;
    double error_var = 0.0;
};

/// MMSE estimate of s from y_perp = s g_perp + z, s ~ CN(0, sigma2).
inline SEstimate estimate_s(const CVector& y_perp, const CVector& g_perp, double sigma2) {
    require_dim(y_perp.size(), g_perp.size(), "y_perp");
    if (sigma2 < 0.0)
        throw ConfigError("estimate_s: negative sigma2");
    if (sigma2 == 0.0)
        return {cplx{0.0, 0.0}, 0.0};
    const double denom = g_perp.squaredNorm() + 1.0 / sigma2;
    return {g_perp.dot(y_perp) / denom, 1.0 / denom};
}

inline double s_error_variance(double g_perp_norm2, double sigma2) {
    return sigma2 == 0.0 ? 0.0 : 1.0 / (g_perp_norm2 + 1.0 / sigma2);
}

enum class SchemeMode { pilot, superposition };

inline std::string_view to_string(SchemeMode m) { return m == SchemeMode::pilot ? "pilot" : "superposition"; }

/// Two-layer transmit configuration: x = v_p w_p + V w_d.
struct SchemeConfig {
    SchemeMode mode = SchemeMode::pilot;
    /// Fraction of P on the coarse layer.
    double power_split = 0.1;
    double total_power = 0.0;
    CMatrix Q_d;
    CVector v_p;

    double pilot_power() const { return power_split * total_power; }

    /// Q_d = (P_d / (N-1)) I on the refined layer.
    static SchemeConfig isotropic(SchemeMode mode, double rho, double P, const CVector& v_p) {
        if (!(rho >= 0.0 && rho <= 1.0))
            throw ConfigError("power split must lie in [0, 1]");
        const Eigen::Index m = v_p.size() - 1;
        SchemeConfig c;
        c.mode = mode;
        c.power_split = rho;
        c.total_power = P;
        c.Q_d = CMatrix::Identity(m, m) * ((1.0 - rho) * P / static_cast<double>(m));
        c.v_p = v_p;
        return c;
    }

    void validate(double tol = 1e-9) const {
        if (std::abs(v_p.norm() - 1.0) > tol)
            throw ConfigError("SchemeConfig: v_p must have unit norm");
        if (linalg::real_trace(Q_d) + pilot_power() > total_power + tol * std::max(1.0, total_power))
            throw ConfigError("SchemeConfig: power budget exceeded");
        if (Q_d.rows() > 0 && linalg::lambda_min(Q_d) < -tol * std::max(1.0, Q_d.norm()))
            throw ConfigError("SchemeConfig: Q_d must be PSD");
    }
};

struct RefinedCovariances {
    CMatrix C_e;
    CMatrix R;
};

/// Conditional LMMSE error covariance of w_d given (s_hat, x_p), and the
/// residual disturbance covariance R on the aligned subspace.
inline RefinedCovariances refined_error_cov(const StructuredChannel& ch, const AlignmentPrecoder& pre, cplx s_hat,
                                            const CVector& x_p, const CMatrix& Q_d, double sigma_es2) {
    ch.validate();
    require_dim(x_p.size(), ch.dim(), "x_p");
    require_dim(Q_d.rows(), pre.V.cols(), "Q_d");
    const CMatrix& U = pre.U;
    const CMatrix K = U.adjoint() * (ch.F + s_hat * ch.G) * pre.V;
    const CMatrix GU = ch.G.adjoint() * U;
    const CMatrix inner = x_p * x_p.adjoint() + pre.V * Q_d * pre.V.adjoint();
    RefinedCovariances out;
    out.R = linalg::hermitian_part(CMatrix::Identity(U.cols(), U.cols()) + sigma_es2 * GU.adjoint() * inner * GU);
    const CMatrix QKh = Q_d * K.adjoint();
    const CMatrix Cyy = linalg::hermitian_part(K * QKh + out.R);
    out.C_e = linalg::hermitian_part(Q_d - QKh * linalg::hpd_solve(Cyy, QKh.adjoint()));
    return out;
}

namespace detail {

/// Pieces of the refined-layer rate that do not depend on the sample.
class RefinedRateModel {
  public:
    RefinedRateModel(const StructuredChannel& ch, const AlignmentPrecoder& pre, const SchemeConfig& scheme)
        : sigma2_(ch.sigma2) {
        const CMatrix& U = pre.U;
        const CMatrix L = linalg::psd_factor(scheme.Q_d);
        const CMatrix A = U.adjoint() * ch.F * pre.V * L;
        const CMatrix B = U.adjoint() * ch.G * pre.V * L;
        aa_ = A * A.adjoint();
        ba_ = B * A.adjoint();
        bb_ = B * B.adjoint();
        const CMatrix UG = U.adjoint() * ch.G;
        const CMatrix UGV = UG * pre.V;
        data_leak_ = UGV * scheme.Q_d * UGV.adjoint();
        pilot_leak_ = UG * scheme.v_p;
        b_perp_norm2_ = (pre.U_perp.adjoint() * ch.G * scheme.v_p).squaredNorm();
        r_ = U.cols();
    }

    double sigma_es2(double pilot_amp2) const { return s_error_variance(pilot_amp2 * b_perp_norm2_, sigma2_); }

    CMatrix R(double pilot_amp2, double es2) const {
        return CMatrix::Identity(r_, r_) + es2 * (pilot_amp2 * pilot_leak_ * pilot_leak_.adjoint() + data_leak_);
    }

    /// log det(I + Q_d K^H R^{-1} K) with K = U^H (F + s_hat G) V.
    double value(const CMatrix& R, double logdet_R, cplx s_hat) const {
        CMatrix m = R + aa_;
        m.noalias() += s_hat * ba_;
        m.noalias() += std::conj(s_hat) * ba_.adjoint();
        m.noalias() += std::norm(s_hat) * bb_;
        return linalg::logdet_hpd(m) - logdet_R;
    }

  private:
    double sigma2_;
    CMatrix aa_, ba_, bb_, data_leak_;
    CVector pilot_leak_;
    double b_perp_norm2_ = 0.0;
    Eigen::Index r_ = 0;
};

} // namespace detail

/// Refined-layer rate: E over (x_p, s_hat) of log det(I + Q_d K^H R^{-1} K).
/// In pilot mode x_p is deterministic; in superposition mode w_p ~ CN(0, P_p)
/// is drawn per sample and the estimation error variance recomputed.
inline Estimate rate_refined(const StructuredChannel& ch, const AlignmentPrecoder& pre, const SchemeConfig& scheme,
                             const MCConfig& mc = {}) {
    ch.validate();
    scheme.validate();
    require_dim(scheme.v_p.size(), ch.dim(), "v_p");
    if (scheme.Q_d.norm() == 0.0)
        return exact_estimate(0.0);
    const detail::RefinedRateModel model(ch, pre, scheme);
    const double pp = scheme.pilot_power();
    if (scheme.mode == SchemeMode::pilot || ch.sigma2 == 0.0) {
        const double es2 = model.sigma_es2(pp);
        const CMatrix R = model.R(pp, es2);
        const double ldR = linalg::logdet_hpd(R);
        const double shat_var = std::max(ch.sigma2 - es2, 0.0);
        return expect_complex_gaussian([&](cplx s_hat) { return model.value(R, ldR, s_hat); }, shat_var, mc);
    }
    return expect(
        [&](SampleRng& rng) {
            const double amp2 = std::norm(rng.complex_normal(pp));
            const double es2 = model.sigma_es2(amp2);
            const CMatrix R = model.R(amp2, es2);
            const cplx s_hat = rng.complex_normal(std::max(ch.sigma2 - es2, 0.0));
            return model.value(R, linalg::logdet_hpd(R), s_hat);
        },
        mc);
}

struct CoarseOptions {
    std::size_t inner_samples = 1000;
};

/// Coarse-layer rate I(w_p; U_perp^H y). Pilot mode carries no information.
/// Superposition mode (w_p ~ CN(0, P_p)) estimates h(y_perp) with a Gaussian
/// mixture over a shared set of inner draws of w_p; the conditional entropy
/// is closed form.
inline Estimate rate_coarse(const StructuredChannel& ch, const AlignmentPrecoder& pre, const SchemeConfig& scheme,
                            const MCConfig& mc = {}, const CoarseOptions& opts = {}) {
    ch.validate();
    scheme.validate();
    if (scheme.mode == SchemeMode::pilot)
        return exact_estimate(0.0);
    if (opts.inner_samples < 1000)
        throw ConfigError("rate_coarse: the mixture entropy estimator needs at least 1000 inner samples");
    const double pp = scheme.pilot_power();
    if (pp == 0.0)
        return exact_estimate(0.0);
    const CVector a = pre.U_perp.adjoint() * ch.F * scheme.v_p;
    const CVector b = pre.U_perp.adjoint() * ch.G * scheme.v_p;
    const double d = static_cast<double>(a.size());
    const double b2 = b.squaredNorm();
    const double s2 = ch.sigma2;

    std::vector<cplx> inner(opts.inner_samples);
    for (std::size_t m = 0; m < inner.size(); ++m) {
        SampleRng rng(mix64(mc.seed ^ 0xc0a75eULL), m);
        inner[m] = rng.complex_normal(pp);
    }
    const double log_m = std::log(static_cast<double>(inner.size()));

    // log CN(y; a w, I + sigma2 |w|^2 b b^H)
    auto log_density = [&](const CVector& y, cplx w) {
        const CVector r = y - a * w;
        const double tau = s2 * std::norm(w);
        const double det = 1.0 + tau * b2;
        const double quad = r.squaredNorm() - tau * std::norm(b.dot(r)) / det;
        return -d * std::log(pi) - std::log(det) - quad;
    };

    return expect(
        [&](SampleRng& rng) {
            const cplx w = rng.complex_normal(pp);
            const cplx s = s2 > 0.0 ? rng.complex_normal(s2) : cplx{0.0, 0.0};
            const CVector y = (a + s * b) * w + rng.complex_normal_vector(a.size(), 1.0);
            double mx = -std::numeric_limits<double>::infinity();
            std::vector<double> terms(inner.size());
            for (std::size_t m = 0; m < inner.size(); ++m) {
                terms[m] = log_density(y, inner[m]);
                mx = std::max(mx, terms[m]);
            }
            double acc = 0.0;
            for (double t : terms)
                acc += std::exp(t - mx);
            const double log_py = mx + std::log(acc) - log_m;
            const double h_cond = d * std::log(pi * std::numbers::e) + std::log1p(s2 * std::norm(w) * b2);
            return -log_py - h_cond;
        },
        mc);
}

/// R_SA = R_p + R_d.
inline Estimate rate_sa(const StructuredChannel& ch, const AlignmentPrecoder& pre, const SchemeConfig& scheme,
                        const MCConfig& mc = {}, const CoarseOptions& coarse = {}) {
    MCConfig coarse_mc = mc;
    coarse_mc.seed = mix64(mc.seed + 1);
    return combine_sum(rate_refined(ch, pre, scheme, mc), rate_coarse(ch, pre, scheme, coarse_mc, coarse));
}

struct SchemeSearchOptions {
    SchemeMode mode = SchemeMode::pilot;
    std::vector<double> rho_grid{0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
    /// Samples per grid point; the winner is re-evaluated with the full config.
    std::size_t search_samples = 2000;
    CoarseOptions coarse{};
};

struct SchemeSearchResult {
    SchemeConfig best;
    Estimate rate;
    std::vector<std::pair<double, Estimate>> grid;
    bool pilot_observable = true;
};

/// Grid search over the power split with isotropic Q_d and the pilot direction
/// from choose_pilot_direction. Grid points share random numbers.
inline SchemeSearchResult optimize_scheme(const StructuredChannel& ch, const AlignmentPrecoder& pre, double P,
                                          const MCConfig& mc = {}, const SchemeSearchOptions& opts = {}) {
    ch.validate();
    if (!(P >= 0.0))
        throw ConfigError("optimize_scheme: power must be nonnegative");
    if (opts.rho_grid.empty())
        throw ConfigError("optimize_scheme: empty power-split grid");
    const PilotDirection dir = choose_pilot_direction(ch.G, pre.U_perp);
    MCConfig search = mc;
    search.n_samples = std::min(mc.n_samples, std::max<std::size_t>(opts.search_samples, 1));
    SchemeSearchResult out;
    out.pilot_observable = dir.observable;
    double best = -std::numeric_limits<double>::infinity();
    for (double rho : opts.rho_grid) {
        const SchemeConfig cfg = SchemeConfig::isotropic(opts.mode, rho, P, dir.v_p);
        const Estimate e = rate_sa(ch, pre, cfg, search, opts.coarse);
        out.grid.emplace_back(rho, e);
        if (e.mean > best) {
            best = e.mean;
            out.best = cfg;
        }
    }
    out.rate = rate_sa(ch, pre, out.best, mc, opts.coarse);
    return out;
}

} // namespace dopcap
