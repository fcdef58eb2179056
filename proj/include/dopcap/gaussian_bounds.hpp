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

#include <string_view>

namespace dopcap {

enum class LowerBoundName { gaussian_optimal, gaussian_linear };

inline std::string_view to_string(LowerBoundName n) {
    return n == LowerBoundName::gaussian_optimal ? "gaussian_optimal" : "gaussian_linear";
}

struct LowerBoundResult {
    double rate_nats = 0.0;
    double std_err = 0.0;
    LowerBoundName bound_name = LowerBoundName::gaussian_linear;
    InputCovariance q_used;
    std::size_t n_samples = 0;
};

/// Interference-plus-noise covariance seen by a linear receiver:
/// R_0 = I + sigma2 G Q G^H.
inline CMatrix r0_matrix(const StructuredChannel& ch, const InputCovariance& q) {
    ch.validate();
    require_input(ch, q);
    return CMatrix::Identity(ch.dim(), ch.dim()) + ch.sigma2 * ch.G * q.Q * ch.G.adjoint();
}

enum class LmmseForm {
    /// Q - Q F^H (F Q F^H + R_0)^{-1} F Q; valid for singular Q.
    inverse_free,
    /// (Q^{-1} + F^H R_0^{-1} F)^{-1}; throws for singular Q.
    information,
};

/// Error covariance of the LMMSE estimate of x from y.
inline CMatrix lmmse_error_cov(const StructuredChannel& ch, const InputCovariance& q,
                               LmmseForm form = LmmseForm::inverse_free) {
    const CMatrix R0 = r0_matrix(ch, q);
    const CMatrix& Q = q.Q;
    if (form == LmmseForm::information) {
        Eigen::LLT<CMatrix> llt(linalg::hermitian_part(Q));
        if (llt.info() != Eigen::Success || linalg::lambda_min(Q) <= 1e-14 * std::max(1.0, Q.norm()))
            throw ConfigError("lmmse_error_cov: information form needs a positive definite Q");
        const CMatrix Qinv = llt.solve(CMatrix::Identity(Q.rows(), Q.cols()));
        const CMatrix J = Qinv + ch.F.adjoint() * linalg::hpd_solve(R0, ch.F);
        return linalg::hermitian_part(linalg::hpd_inverse(linalg::hermitian_part(J)));
    }
    const CMatrix QFh = Q * ch.F.adjoint();
    const CMatrix Qy = ch.F * QFh + R0;
    return linalg::hermitian_part(Q - QFh * linalg::hpd_solve(linalg::hermitian_part(Qy), QFh.adjoint()));
}

/// GMI of Gaussian signalling with an LMMSE/nearest-neighbour receiver:
/// log det(I + Q F^H R_0^{-1} F) = log det(R_0 + F Q F^H) - log det R_0.
inline LowerBoundResult rate_gaussian_linear(const StructuredChannel& ch, const InputCovariance& q) {
    const CMatrix R0 = r0_matrix(ch, q);
    const CMatrix total = R0 + ch.F * q.Q * ch.F.adjoint();
    LowerBoundResult out;
    out.rate_nats = linalg::logdet_hpd(linalg::hermitian_part(total)) - linalg::logdet_hpd(R0);
    out.bound_name = LowerBoundName::gaussian_linear;
    out.q_used = q;
    return out;
}

inline double jensen_penalty(const StructuredChannel& ch, const InputCovariance& q) {
    return std::log1p(ch.sigma2 * linalg::real_trace(ch.G * q.Q * ch.G.adjoint()));
}

/// Gaussian signalling with optimal decoding:
/// E_s[log det(I + (F+sG) Q (F+sG)^H)] - log(1 + sigma2 tr(G Q G^H)),
/// expectation by Monte Carlo.
inline LowerBoundResult rate_gaussian_optimal(const StructuredChannel& ch, const InputCovariance& q,
                                              const MCConfig& mc = {}) {
    ch.validate();
    require_input(ch, q);
    LowerBoundResult out;
    out.bound_name = LowerBoundName::gaussian_optimal;
    out.q_used = q;
    const ConditionalCovariance cov(ch, q);
    if (ch.sigma2 == 0.0 || ch.G.norm() == 0.0) {
        out.rate_nats = cov.logdet_at(cplx{0.0, 0.0});
        return out;
    }
    if (mc.n_samples < 1000)
        throw ConfigError("rate_gaussian_optimal needs at least 1000 Monte Carlo samples");
    const Estimate e = expect_complex_gaussian([&](cplx s) { return cov.logdet_at(s); }, ch.sigma2, mc);
    out.rate_nats = e.mean - jensen_penalty(ch, q);
    out.std_err = e.std_err;
    out.n_samples = e.n_samples;
    return out;
}

/// Same bound with the expectation over s computed by a product Gauss-Hermite
/// rule; deterministic, intended for small N.
inline LowerBoundResult rate_gaussian_optimal_quadrature(const StructuredChannel& ch, const InputCovariance& q,
                                                         std::size_t nodes = 48) {
    ch.validate();
    require_input(ch, q);
    const ConditionalCovariance cov(ch, q);
    LowerBoundResult out;
    out.bound_name = LowerBoundName::gaussian_optimal;
    out.q_used = q;
    if (ch.sigma2 == 0.0) {
        out.rate_nats = cov.logdet_at(cplx{0.0, 0.0});
        return out;
    }
    out.rate_nats = gauss_hermite_2d([&](cplx s) { return cov.logdet_at(s); }, ch.sigma2, nodes) -
                    jensen_penalty(ch, q);
    return out;
}

enum class QxObjective { linear, optimal };

struct QxOptions {
    int max_iterations = 200;
    double rel_tol = 1e-6;
    /// Common random numbers for the optimal-decoding objective and its gradient.
    MCConfig gradient_mc{256, 977, 64, 1};
};

struct QxResult {
    InputCovariance q;
    double objective = 0.0;
    double isotropic_objective = 0.0;
    int iterations = 0;
    /// False when the iteration cap was hit; q is still feasible.
    bool converged = false;
};

namespace detail {

/// Objective value and gradient (with respect to Q) of either lower bound.
class QxProblem {
  public:
    QxProblem(const StructuredChannel& ch, QxObjective objective, const MCConfig& crn)
        : ch_(ch), objective_(objective) {
        if (objective_ == QxObjective::optimal && ch.sigma2 > 0.0) {
            for (std::size_t i = 0; i < crn.n_samples; ++i) {
                SampleRng rng(crn.seed, i);
                draws_.push_back(rng.complex_normal(ch.sigma2));
            }
        }
    }

    double value(const CMatrix& Q) const { return evaluate(Q, nullptr); }
    double value_and_gradient(const CMatrix& Q, CMatrix& grad) const { return evaluate(Q, &grad); }

  private:
    double evaluate(const CMatrix& Q, CMatrix* grad) const {
        const auto n = ch_.dim();
        const CMatrix I = CMatrix::Identity(n, n);
        const CMatrix GQG = ch_.sigma2 * ch_.G * Q * ch_.G.adjoint();
        if (objective_ == QxObjective::linear) {
            const CMatrix R0 = I + GQG;
            const CMatrix total = linalg::hermitian_part(R0 + ch_.F * Q * ch_.F.adjoint());
            const double v = linalg::logdet_hpd(total) - linalg::logdet_hpd(R0);
            if (grad) {
                const CMatrix Ti = linalg::hpd_inverse(total);
                const CMatrix Ri = linalg::hpd_inverse(linalg::hermitian_part(R0));
                *grad = linalg::hermitian_part(ch_.F.adjoint() * Ti * ch_.F +
                                               ch_.sigma2 * ch_.G.adjoint() * (Ti - Ri) * ch_.G);
            }
            return v;
        }
        const double penalty_arg = 1.0 + linalg::real_trace(GQG);
        std::vector<cplx> zero{cplx{0.0, 0.0}};
        const auto& draws = draws_.empty() ? zero : draws_;
        double acc = 0.0;
        if (grad)
            *grad = CMatrix::Zero(n, n);
        for (cplx s : draws) {
            const CMatrix H = ch_.F + s * ch_.G;
            const CMatrix sigma = linalg::hermitian_part(I + H * Q * H.adjoint());
            acc += linalg::logdet_hpd(sigma);
            if (grad)
                *grad += H.adjoint() * linalg::hpd_solve(sigma, H);
        }
        const double m = static_cast<double>(draws.size());
        if (grad) {
            *grad /= m;
            *grad -= (ch_.sigma2 / penalty_arg) * ch_.G.adjoint() * ch_.G;
            *grad = linalg::hermitian_part(*grad);
        }
        return acc / m - std::log(penalty_arg);
    }

    const StructuredChannel& ch_;
    QxObjective objective_;
    std::vector<cplx> draws_;
};

} // namespace detail

/// Projected gradient ascent over {Q >= 0, tr Q <= P}, started from the
/// isotropic covariance. Only improving steps are accepted, so the result is
/// never worse than isotropic signalling (on the optimizer's own objective).
inline QxResult optimize_qx(const StructuredChannel& ch, double P, QxObjective objective,
                            const QxOptions& opts = {}) {
    ch.validate();
    if (!(P >= 0.0))
        throw ConfigError("optimize_qx: power must be nonnegative");
    const auto n = ch.dim();
    QxResult out;
    if (P == 0.0) {
        out.q = InputCovariance::zero(n);
        out.converged = true;
        return out;
    }
    const detail::QxProblem problem(ch, objective, opts.gradient_mc);
    CMatrix Q = InputCovariance::isotropic(n, P).Q;
    CMatrix grad;
    double f = problem.value_and_gradient(Q, grad);
    out.isotropic_objective = f;
    double step = P / std::max(grad.norm(), 1e-12);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const CMatrix candidate = linalg::project_trace_psd(Q + step * grad, P);
        const double fc = problem.value(candidate);
        if (fc > f) {
            const double gain = fc - f;
            Q = candidate;
            f = problem.value_and_gradient(Q, grad);
            step *= 1.5;
            if (gain <= opts.rel_tol * std::max(1.0, std::abs(f))) {
                out.converged = true;
                break;
            }
        } else {
            step *= 0.5;
            if (step * grad.norm() < 1e-12 * P) {
                out.converged = true;
                break;
            }
        }
    }
    out.q = InputCovariance{linalg::hermitian_part(Q)};
    out.objective = f;
    out.iterations = it;
    return out;
}

} // namespace dopcap
