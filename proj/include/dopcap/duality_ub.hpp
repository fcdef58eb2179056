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

#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace dopcap {

enum class UpperBoundName { ub_logdet, ub_general, ub_dof };

inline std::string_view to_string(UpperBoundName n) {
    switch (n) {
    case UpperBoundName::ub_logdet:
        return "ub_logdet";
    case UpperBoundName::ub_general:
        return "ub_general";
    case UpperBoundName::ub_dof:
        return "ub_dof";
    }
    return "?";
}

/// Parameters of the output density used by the duality bound. delta is
/// always 0 here.
struct DualityParams {
    double alpha = 1.0;
    CMatrix S;
    double delta = 0.0;
    double r = 0.0;
    double beta = 0.0;
};

/// How the supremum over the input ball is evaluated.
enum class SupMode {
    /// Closed form when (alpha, S) admits one, otherwise the safe envelope.
    certified,
    /// (N - alpha) log(tr S + r^2 lambda_max(F^H S F + sigma2 G^H S G)).
    envelope,
    /// Multi-start local maximization. May under-estimate the supremum.
    numerical,
};

struct UpperBoundResult {
    double rate_nats = 0.0;
    UpperBoundName bound_name = UpperBoundName::ub_logdet;
    std::optional<DualityParams> params;
    InputCovariance q_used;
    std::string q_description;
    /// True iff every inner maximization was over-estimated.
    bool certified = false;
    /// Frank-Wolfe gap added to the primal value (ub_logdet only).
    double gap = 0.0;
    int iterations = 0;
};

/// gamma(S, x) = tr S + x^H (F^H S F + sigma2 G^H S G) x = E[||y||_S^2 | x].
inline double gamma_term(const CMatrix& S, const StructuredChannel& ch, const CVector& x) {
    ch.validate();
    require_dim(S.rows(), ch.dim(), "S");
    require_dim(x.size(), ch.dim(), "x");
    const CVector fx = ch.F * x;
    const CVector gx = ch.G * x;
    return linalg::real_trace(S) + fx.dot(S * fx).real() + ch.sigma2 * gx.dot(S * gx).real();
}

/// beta = (1/alpha) tr(S (I + F Q F^H + sigma2 G Q G^H)).
inline double beta_term(const CMatrix& S, const StructuredChannel& ch, const InputCovariance& q, double alpha) {
    if (!(alpha > 0.0))
        throw ConfigError("beta_term: alpha must be positive");
    require_dim(S.rows(), ch.dim(), "S");
    return linalg::real_trace(S * output_cov(ch, q)) / alpha;
}

namespace detail {

inline CMatrix weighted_gram(const StructuredChannel& ch, const CMatrix& S) {
    return linalg::hermitian_part(ch.F.adjoint() * S * ch.F + ch.sigma2 * ch.G.adjoint() * S * ch.G);
}

inline bool full_rank(const CMatrix& A, double tol = 1e-10) {
    const RVector sv = linalg::singular_values(A);
    return sv.size() > 0 && sv(0) > 0.0 && sv(sv.size() - 1) > tol * sv(0) * static_cast<double>(A.rows());
}

/// Largest generalized eigenvalue of (A, B), B positive definite.
inline double generalized_lambda_max(const CMatrix& A, const CMatrix& B) {
    Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> es(linalg::hermitian_part(A), linalg::hermitian_part(B),
                                                         Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw Error("generalized eigenproblem failed");
    return es.eigenvalues().maxCoeff();
}

/// log of (N - alpha) gamma(S,x)^{...} / (1 + sigma2 ||Gx||^2) at x.
inline double sup_objective(const StructuredChannel& ch, const CMatrix& S, double alpha, const CVector& x) {
    const double n = static_cast<double>(ch.dim());
    return (n - alpha) * std::log(gamma_term(S, ch, x)) - std::log1p(ch.sigma2 * (ch.G * x).squaredNorm());
}

/// Multi-start projected gradient ascent on the ball ||x|| <= r.
inline double sup_numerical(const StructuredChannel& ch, const CMatrix& S, double alpha, double r,
                            int starts = 32, std::uint64_t seed = 4242) {
    const double n = static_cast<double>(ch.dim());
    const CMatrix M = weighted_gram(ch, S);
    const CMatrix GhG = ch.G.adjoint() * ch.G;
    double best = sup_objective(ch, S, alpha, CVector::Zero(ch.dim()));
    auto project = [r](CVector v) {
        const double nv = v.norm();
        if (nv > r)
            v *= r / nv;
        return v;
    };
    for (int k = 0; k < starts; ++k) {
        SampleRng rng(seed, static_cast<std::uint64_t>(k));
        CVector x = rng.complex_normal_vector(ch.dim());
        x = project(x * (r * rng.uniform() / std::max(x.norm(), 1e-300)));
        double f = sup_objective(ch, S, alpha, x);
        double step = r * r;
        for (int it = 0; it < 500 && step > 1e-14 * r * r; ++it) {
            const double gam = gamma_term(S, ch, x);
            const double den = 1.0 + ch.sigma2 * (ch.G * x).squaredNorm();
            const CVector grad = (n - alpha) / gam * (M * x) - ch.sigma2 / den * (GhG * x);
            const CVector cand = project(x + step * grad);
            const double fc = sup_objective(ch, S, alpha, cand);
            if (fc > f) {
                x = cand;
                f = fc;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        best = std::max(best, f);
    }
    return best;
}

struct SupTerm {
    double value = 0.0;
    bool certified = true;
    std::string how;
};

inline SupTerm sup_term(const StructuredChannel& ch, const CMatrix& S, double alpha, double r, SupMode mode) {
    const double n = static_cast<double>(ch.dim());
    const CMatrix M = weighted_gram(ch, S);
    if (mode == SupMode::numerical)
        return {sup_numerical(ch, S, alpha, r), false, "numerical"};
    if (mode == SupMode::certified) {
        if (alpha == n)
            return {0.0, true, "closed_form_alpha_n"};
        // alpha = N-1: the ratio (tr S + x^H M x) / (1 + sigma2 ||Gx||^2) is a
        // mediant, bounded by max{tr S, lambda_max(M, sigma2 G^H G)} for all x.
        if (std::abs(alpha - (n - 1.0)) < 1e-12 && ch.sigma2 > 0.0 && full_rank(ch.G)) {
            const double lam = generalized_lambda_max(M, ch.sigma2 * ch.G.adjoint() * ch.G);
            return {std::log(std::max(linalg::real_trace(S), lam)), true, "closed_form_alpha_n_minus_1"};
        }
    }
    if (!(r > 0.0))
        throw ConfigError("sup envelope needs a positive input radius r");
    return {(n - alpha) * std::log(linalg::real_trace(S) + r * r * linalg::lambda_max(M)), true, "envelope"};
}

inline void check_duality_args(const StructuredChannel& ch, double alpha, const CMatrix& S) {
    ch.validate();
    const double n = static_cast<double>(ch.dim());
    if (!(alpha > 0.0 && alpha <= n))
        throw ConfigError("duality bound: alpha must lie in (0, N]");
    require_square(S, "S");
    require_dim(S.rows(), ch.dim(), "S");
    if (linalg::lambda_min(S) <= 0.0)
        throw ConfigError("duality bound: S must be positive definite");
}

inline double duality_value(double n, double alpha, double beta, const CMatrix& S, double sup) {
    return alpha * std::log(beta) + std::lgamma(alpha) - std::lgamma(n) + alpha - n - linalg::logdet_hpd(S) + sup;
}

} // namespace detail

struct DualityOptions {
    SupMode mode = SupMode::certified;
    bool require_certified = true;
};

/// Duality bound for fixed (alpha, S), maximized over Q. beta is linear in Q,
/// so the maximizing Q puts all power on the top eigenvector of
/// F^H S F + sigma2 G^H S G.
inline UpperBoundResult ub_general(const StructuredChannel& ch, double P, double alpha, const CMatrix& S, double r,
                                   const DualityOptions& opts = {}) {
    detail::check_duality_args(ch, alpha, S);
    if (opts.mode == SupMode::numerical && opts.require_certified)
        throw ConfigError("ub_general: numerical sup mode cannot produce a certified bound");
    const CMatrix M = detail::weighted_gram(ch, S);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(M);
    const Eigen::Index top = ch.dim() - 1;
    const double beta = (linalg::real_trace(S) + P * std::max(es.eigenvalues()(top), 0.0)) / alpha;
    const auto sup = detail::sup_term(ch, S, alpha, r, opts.mode);
    UpperBoundResult out;
    out.bound_name = UpperBoundName::ub_general;
    out.rate_nats = detail::duality_value(static_cast<double>(ch.dim()), alpha, beta, S, sup.value);
    out.params = DualityParams{alpha, S, 0.0, r, beta};
    const CVector v = es.eigenvectors().col(top);
    out.q_used = InputCovariance{P * v * v.adjoint()};
    out.q_description = "beta_max;sup=" + sup.how + ";r=" + std::to_string(r);
    out.certified = sup.certified;
    return out;
}

/// R_UB(alpha, S, Q) at a given Q. This is one term of the max over Q, not a
/// bound on its own unless Q is the maximizer.
inline UpperBoundResult ub_general_at(const StructuredChannel& ch, const InputCovariance& q, double alpha,
                                      const CMatrix& S, double r, const DualityOptions& opts = {}) {
    detail::check_duality_args(ch, alpha, S);
    if (opts.mode == SupMode::numerical && opts.require_certified)
        throw ConfigError("ub_general_at: numerical sup mode cannot produce a certified bound");
    const double beta = beta_term(S, ch, q, alpha);
    const auto sup = detail::sup_term(ch, S, alpha, r, opts.mode);
    UpperBoundResult out;
    out.bound_name = UpperBoundName::ub_general;
    out.rate_nats = detail::duality_value(static_cast<double>(ch.dim()), alpha, beta, S, sup.value);
    out.params = DualityParams{alpha, S, 0.0, r, beta};
    out.q_used = q;
    out.q_description = "given;sup=" + sup.how;
    out.certified = sup.certified;
    return out;
}

/// S = det(Sigma_y)^{1/N} Sigma_y^{-1}, the choice that turns the duality
/// bound into log det Sigma_y.
inline CMatrix logdet_matched_S(const StructuredChannel& ch, const InputCovariance& q) {
    const CMatrix sigma_y = linalg::hermitian_part(output_cov(ch, q));
    const double n = static_cast<double>(ch.dim());
    return std::exp(linalg::logdet_hpd(sigma_y) / n) * linalg::hpd_inverse(sigma_y);
}

struct LogdetOptions {
    int max_iterations = 3000;
    double rel_gap = 1e-6;
};

/// Water-filling over the eigenvalues of F^H F (exact when sigma2 = 0).
inline CMatrix waterfill(const CMatrix& gram, double P) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(linalg::hermitian_part(gram));
    const RVector mu = es.eigenvalues();
    const Eigen::Index n = mu.size();
    RVector p = RVector::Zero(n);
    // Active set: the k strongest modes.
    for (Eigen::Index k = n; k >= 1; --k) {
        double inv_sum = 0.0;
        bool ok = true;
        for (Eigen::Index i = n - k; i < n; ++i) {
            if (mu(i) <= 0.0) {
                ok = false;
                break;
            }
            inv_sum += 1.0 / mu(i);
        }
        if (!ok)
            continue;
        const double level = (P + inv_sum) / static_cast<double>(k);
        if (level - 1.0 / mu(n - k) >= 0.0) {
            for (Eigen::Index i = n - k; i < n; ++i)
                p(i) = level - 1.0 / mu(i);
            break;
        }
    }
    return es.eigenvectors() * p.asDiagonal() * es.eigenvectors().adjoint();
}

/// max over {Q >= 0, tr Q <= P} of log det(I + F Q F^H + sigma2 G Q G^H).
/// The objective is concave; the reported rate is the primal value plus the
/// Frank-Wolfe gap P lambda_max(grad)^+ - tr(grad Q), which upper-bounds the
/// maximum whether or not the iteration has converged.
inline UpperBoundResult ub_logdet(const StructuredChannel& ch, double P, const LogdetOptions& opts = {}) {
    ch.validate();
    if (!(P >= 0.0))
        throw ConfigError("ub_logdet: power must be nonnegative");
    const auto n = ch.dim();

    auto value = [&](const CMatrix& Q) { return linalg::logdet_hpd(linalg::hermitian_part(output_cov(ch, {Q}))); };
    auto gradient = [&](const CMatrix& Q) {
        const CMatrix inv = linalg::hpd_inverse(linalg::hermitian_part(output_cov(ch, {Q})));
        return linalg::hermitian_part(ch.F.adjoint() * inv * ch.F + ch.sigma2 * ch.G.adjoint() * inv * ch.G);
    };
    auto fw_gap = [&](const CMatrix& Q, const CMatrix& g) {
        return std::max(0.0, P * std::max(linalg::lambda_max(g), 0.0) - linalg::real_trace(g * Q));
    };

    CMatrix Q = waterfill(ch.F.adjoint() * ch.F, P);
    if (ch.sigma2 > 0.0) {
        const CMatrix alt = waterfill(ch.F.adjoint() * ch.F + ch.sigma2 * ch.G.adjoint() * ch.G, P);
        if (value(alt) > value(Q))
            Q = alt;
        const CMatrix iso = InputCovariance::isotropic(n, P).Q;
        if (value(iso) > value(Q))
            Q = iso;
    }
    double f = value(Q);
    CMatrix g = gradient(Q);
    double gap = fw_gap(Q, g);
    double step = P / std::max(g.norm(), 1e-12);
    int it = 0;
    for (; it < opts.max_iterations && P > 0.0; ++it) {
        if (gap <= opts.rel_gap * std::max(1.0, std::abs(f)))
            break;
        const CMatrix cand = linalg::project_trace_psd(Q + step * g, P);
        const double fc = value(cand);
        const CMatrix d = cand - Q;
        // Sufficient-increase test for a step of length `step`.
        if (fc >= f + linalg::real_trace(g * d) - d.squaredNorm() / (2.0 * step)) {
            Q = cand;
            f = fc;
            g = gradient(Q);
            gap = fw_gap(Q, g);
            step *= 1.5;
        } else {
            step *= 0.5;
            if (step < 1e-18 * std::max(1.0, P))
                break;
        }
    }
    UpperBoundResult out;
    out.bound_name = UpperBoundName::ub_logdet;
    out.rate_nats = f + gap;
    out.gap = gap;
    out.iterations = it;
    out.q_used = InputCovariance{linalg::hermitian_part(Q)};
    out.q_description = "logdet_opt";
    out.certified = true;
    return out;
}

/// High-SNR bound with alpha = N-1, S = I, evaluated at the beta-maximizing Q.
/// Requires sigma2 > 0 and a full-rank G.
inline UpperBoundResult ub_dof(const StructuredChannel& ch, double P) {
    ch.validate();
    const auto n = ch.dim();
    if (n < 2)
        throw ConfigError("ub_dof: needs N >= 2");
    if (!(ch.sigma2 > 0.0))
        throw ConfigError("ub_dof: needs sigma2 > 0");
    if (!detail::full_rank(ch.G))
        throw ConfigError("ub_dof: G is numerically singular; use ub_general with the envelope sup mode");
    const double nd = static_cast<double>(n);
    const CMatrix I = CMatrix::Identity(n, n);
    const CMatrix M = detail::weighted_gram(ch, I);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(M);
    const double mean_gamma = nd + P * std::max(es.eigenvalues()(n - 1), 0.0);
    const CMatrix GhG = ch.sigma2 * ch.G.adjoint() * ch.G;
    const double lam = detail::generalized_lambda_max(ch.F.adjoint() * ch.F + GhG, GhG);
    UpperBoundResult out;
    out.bound_name = UpperBoundName::ub_dof;
    out.rate_nats = (nd - 1.0) * std::log(mean_gamma / (nd - 1.0)) + std::log(1.0 / (nd - 1.0)) - 1.0 +
                    std::log(std::max(nd, lam));
    out.params = DualityParams{nd - 1.0, I, 0.0, std::numeric_limits<double>::infinity(), mean_gamma / (nd - 1.0)};
    const CVector v = es.eigenvectors().col(n - 1);
    out.q_used = InputCovariance{P * v * v.adjoint()};
    out.q_description = "beta_max;alpha=N-1;S=I";
    out.certified = true;
    return out;
}

struct GeneralSearchOptions {
    /// Also scan alpha in {1, ..., N} with S = I and the envelope sup.
    bool alpha_grid = false;
    /// Input radius for envelope evaluations; <= 0 means 10 sqrt(P).
    double r = 0.0;
};

/// Smallest certified bound among the closed-form instances (log-det and
/// alpha = N-1) and, optionally, an alpha grid in envelope mode.
inline UpperBoundResult ub_general_search(const StructuredChannel& ch, double P, const GeneralSearchOptions& opts = {}) {
    UpperBoundResult best = ub_logdet(ch, P);
    best.bound_name = UpperBoundName::ub_general;
    best.q_description = "mode=logdet";
    try {
        UpperBoundResult dof = ub_dof(ch, P);
        if (dof.rate_nats < best.rate_nats) {
            best = dof;
            best.bound_name = UpperBoundName::ub_general;
            best.q_description = "mode=alpha_n_minus_1";
        }
    } catch (const ConfigError&) {
        // not applicable (sigma2 = 0 or singular G)
    }
    if (opts.alpha_grid) {
        const double r = opts.r > 0.0 ? opts.r : 10.0 * std::sqrt(P);
        const CMatrix I = CMatrix::Identity(ch.dim(), ch.dim());
        for (Eigen::Index a = 1; a <= ch.dim(); ++a) {
            UpperBoundResult cand = ub_general(ch, P, static_cast<double>(a), I, r, {SupMode::envelope, true});
            if (cand.rate_nats < best.rate_nats)
                best = cand;
        }
    }
    return best;
}

struct SmallSigmaBracket {
    /// C_G(P), the coherent capacity of F.
    double coherent_capacity = 0.0;
    /// c_LB: C >= C_G - c_LB sigma^2 to leading order.
    double lower_gap_coeff = 0.0;
    /// f(P): C <= C_G + f(P) sigma^2 to leading order.
    double upper_gap_coeff = 0.0;
    /// Exact sigma^2 coefficient of R_G(Q*) - C_G, for diagnostics.
    double second_order_coeff = 0.0;
    InputCovariance q_star;
};

inline SmallSigmaBracket small_sigma_bracket(const StructuredChannel& ch, double P) {
    ch.validate();
    const StructuredChannel coherent = ch.with_sigma2(0.0);
    const UpperBoundResult cg = ub_logdet(coherent, P);
    const CMatrix& Q = cg.q_used.Q;
    const auto n = ch.dim();
    const CMatrix sigma0 = linalg::hermitian_part(CMatrix::Identity(n, n) + ch.F * Q * ch.F.adjoint());
    const CMatrix inv0 = linalg::hpd_inverse(sigma0);
    const CMatrix GQG = ch.G * Q * ch.G.adjoint();
    const CMatrix A = ch.F * Q * ch.G.adjoint();
    const double t1 = linalg::real_trace(inv0 * GQG);
    const double t2 = (inv0 * A.adjoint()).squaredNorm();
    const double t3 = linalg::real_trace(GQG);
    SmallSigmaBracket out;
    out.coherent_capacity = cg.rate_nats;
    out.q_star = cg.q_used;
    out.lower_gap_coeff = std::abs(t1 - t2 - t3);
    out.upper_gap_coeff = P * std::max(linalg::lambda_max(ch.G.adjoint() * inv0 * ch.G), 0.0);
    out.second_order_coeff = t1 - linalg::real_trace(inv0 * A * inv0 * A.adjoint()) - t3;
    return out;
}

} // namespace dopcap
