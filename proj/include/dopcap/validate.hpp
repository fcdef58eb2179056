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

#include "dopcap/alignment.hpp"
#include "dopcap/channel_core.hpp"
#include "dopcap/duality_ub.hpp"
#include "dopcap/gaussian_bounds.hpp"
#include "dopcap/ofdm_doppler.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace dopcap {

struct ValidationCheck {
    std::string name;
    bool passed = false;
    double residual = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
};

inline void print_report(std::ostream& os, const ValidationReport& report) {
    for (const auto& c : report.checks) {
        os << (c.passed ? "PASS " : "FAIL ") << c.name << "  residual=" << c.residual << "  threshold=" << c.threshold;
        if (!c.detail.empty())
            os << "  (" << c.detail << ")";
        os << '\n';
    }
}

struct ValidationOptions {
    std::uint64_t seed = 7;
    /// Negative control: use G^T in place of G in the finite-difference check.
    bool inject_transposed_g = false;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    require_dim(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(x.size()), "fit_line");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

namespace detail {

inline ValidationCheck make_check(std::string name, double residual, double threshold, std::string detail = {}) {
    return {std::move(name), residual <= threshold, residual, threshold, std::move(detail)};
}

inline ValidationCheck check_zero_doppler_identity() {
    double worst = 0.0;
    for (std::size_t n : {4u, 16u, 64u}) {
        const auto cfg = OFDMConfig::ntn(n, 5);
        worst = std::max(worst, (ici_matrix(cfg, 0.0) - CMatrix::Identity(n, n)).norm());
    }
    return make_check("ici_zero_doppler_identity", worst, 1e-12);
}

inline ValidationCheck check_finite_difference(const ValidationOptions& opts) {
    double worst = 0.0;
    const auto profile = ntn_tdl_a();
    for (std::size_t n : {4u, 8u, 16u})
        for (std::uint64_t k = 0; k < 3; ++k) {
            SampleRng rng(opts.seed, 100 + k);
            const auto draw = draw_ntn_channel(n, profile, rng);
            const CMatrix G =
                opts.inject_transposed_g ? CMatrix(draw.lin.sensitivity.transpose()) : draw.lin.sensitivity;
            for (double eps : {1e-3, 1e-4}) {
                const CMatrix H = full_channel(draw.config, draw.taps, eps);
                const double rel = ((H - draw.lin.nominal) / eps - G).norm() / G.norm();
                worst = std::max(worst, rel / (10.0 * eps));
            }
        }
    return make_check("linearization_finite_difference", worst, 1.0, "max of rel_err / (10 eps)");
}

inline ValidationCheck check_lemma1(const ValidationOptions& opts) {
    double worst_rank = 0.0;
    double worst_align = 0.0;
    for (std::uint64_t k = 0; k < 70; ++k) {
        SampleRng rng(opts.seed, 200 + k);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(k % 7);
        const auto ch = random_channel(n, 0.0, rng);
        const auto pre = build_precoder(ch.F, ch.G);
        worst_rank = std::max(worst_rank, pre.rank_residual);
        const double scale = ch.F.norm() + ch.G.norm();
        for (int j = 0; j < 20; ++j) {
            const cplx s = rng.complex_normal(1.0) * 3.0;
            worst_align =
                std::max(worst_align, (pre.U_perp.adjoint() * (ch.F + s * ch.G) * pre.V).norm() / scale);
        }
    }
    return make_check("subspace_alignment", std::max(worst_rank, worst_align), 1e-8,
                      "rank residual and U_perp^H (F + sG) V");
}

inline ValidationCheck check_lmmse(const ValidationOptions& opts) {
    double worst = 0.0;
    constexpr std::size_t draws = 200000;
    for (std::uint64_t k = 0; k < 2; ++k) {
        SampleRng setup(opts.seed, 300 + k);
        const Eigen::Index n = 3;
        const auto ch = random_channel(n, 0.2, setup);
        const CMatrix A = setup.complex_normal_matrix(n, n);
        const InputCovariance q{A * A.adjoint()};
        const CMatrix C = lmmse_error_cov(ch, q);
        const CMatrix Cyy = ch.F * q.Q * ch.F.adjoint() + r0_matrix(ch, q);
        const CMatrix W = q.Q * ch.F.adjoint() * linalg::hpd_inverse(Cyy);
        const CMatrix L = linalg::psd_factor(q.Q);
        CMatrix acc = CMatrix::Zero(n, n);
        for (std::size_t i = 0; i < draws; ++i) {
            SampleRng rng(opts.seed ^ 0x5a5aULL, i + k * draws);
            const CVector x = L * rng.complex_normal_vector(n);
            const cplx s = rng.complex_normal(ch.sigma2);
            const CVector y = (ch.F + s * ch.G) * x + rng.complex_normal_vector(n);
            const CVector e = x - W * y;
            acc += e * e.adjoint();
        }
        acc /= static_cast<double>(draws);
        worst = std::max(worst, (acc - C).norm() / C.norm());
    }
    return make_check("lmmse_error_covariance", worst, 0.03, "relative Frobenius vs sample covariance");
}

inline ValidationCheck check_s_estimator(const ValidationOptions& opts) {
    SampleRng setup(opts.seed, 400);
    const Eigen::Index n = 4;
    const double sigma2 = 0.5;
    const auto ch = random_channel(n, sigma2, setup);
    const auto pre = build_precoder(ch.F, ch.G);
    const auto dir = choose_pilot_direction(ch.G, pre.U_perp);
    const double amp = 1.5;
    const CVector x_p = amp * dir.v_p;
    const CVector g_perp = pre.U_perp.adjoint() * ch.G * x_p;
    const CVector f_perp = pre.U_perp.adjoint() * ch.F * x_p;
    const double want = s_error_variance(g_perp.squaredNorm(), sigma2);
    constexpr std::size_t draws = 100000;
    double mse = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        SampleRng rng(opts.seed ^ 0xa5a5ULL, i);
        const cplx s = rng.complex_normal(sigma2);
        const CVector w = rng.complex_normal_vector(n - 1, 4.0);
        const CVector y = (ch.F + s * ch.G) * (x_p + pre.V * w) + rng.complex_normal_vector(n);
        const auto est = estimate_s(pre.U_perp.adjoint() * y - f_perp, g_perp, sigma2);
        mse += std::norm(s - est.s_hat);
    }
    mse /= static_cast<double>(draws);
    return make_check("s_estimator_mse", std::abs(mse - want) / want, 0.03);
}

inline ValidationCheck check_coherent_tightness(const ValidationOptions& opts) {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 6; ++k) {
        SampleRng rng(opts.seed, 500 + k);
        const Eigen::Index n = Eigen::Index{2} << (k % 3);
        const auto ch = random_channel(n, 0.0, rng);
        const double P = 10.0 * static_cast<double>(n);
        const auto ub = ub_logdet(ch, P);
        const auto lo = rate_gaussian_linear(ch, InputCovariance{ub.q_used});
        worst = std::max(worst, std::abs(ub.rate_nats - lo.rate_nats));
    }
    return make_check("coherent_tightness", worst, 1e-6);
}

inline ValidationCheck check_sandwich(const ValidationOptions& opts) {
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    MCConfig mc;
    mc.n_samples = 2000;
    for (std::uint64_t k = 0; k < 3; ++k) {
        SampleRng rng(opts.seed, 600 + k);
        const auto draw = draw_ntn_channel(8, ntn_tdl_a(), rng);
        const auto pre = build_precoder(draw.lin.nominal, draw.lin.sensitivity);
        for (double sigma : {0.1, 0.01})
            for (double snr : {0.0, 20.0, 40.0}) {
                const StructuredChannel ch{draw.lin.nominal, draw.lin.sensitivity, sigma * sigma, true};
                const double P = 8.0 * std::pow(10.0, snr / 10.0);
                const double ub = std::min(ub_logdet(ch, P).rate_nats, ub_dof(ch, P).rate_nats);
                mc.seed = stream_key(opts.seed, k);
                const auto iso = InputCovariance::isotropic(8, P);
                const auto opt = rate_gaussian_optimal(ch, iso, mc);
                SchemeSearchOptions so;
                so.search_samples = 500;
                const auto sa = optimize_scheme(ch, pre, P, mc, so).rate;
                const double lin = rate_gaussian_linear(ch, iso).rate_nats;
                for (auto [v, se] : {std::pair{opt.rate_nats, opt.std_err}, std::pair{sa.mean, sa.std_err},
                                     std::pair{lin, 0.0}}) {
                    const double excess = v - ub - 3.0 * se;
                    worst = std::max(worst, excess);
                    violations += excess > 0.0;
                }
            }
    }
    return make_check("sandwich_ordering", static_cast<double>(violations), 0.0,
                      "violations; worst excess " + std::to_string(worst) + " nats");
}

inline ValidationCheck check_dof(const ValidationOptions& opts) {
    SampleRng rng(opts.seed, 700);
    const auto ch = random_channel(4, 0.01, rng);
    const auto pre = build_precoder(ch.F, ch.G);
    MCConfig mc;
    mc.n_samples = 2000;
    mc.seed = opts.seed;
    SchemeSearchOptions so;
    so.search_samples = 500;
    std::vector<double> lp, dof, sa;
    for (double P : {1e3, 1e4, 1e5, 1e6}) {
        lp.push_back(std::log(P));
        dof.push_back(ub_dof(ch, P).rate_nats);
        sa.push_back(optimize_scheme(ch, pre, P, mc, so).rate.mean);
    }
    const double e_dof = std::abs(fit_line(lp, dof).slope - 3.0) / 3.0;
    const double e_sa = std::abs(fit_line(lp, sa).slope - 3.0) / 3.0;
    return make_check("degrees_of_freedom_slope", std::max(e_dof, e_sa), 0.1, "relative slope error vs N-1 at N=4");
}

} // namespace detail

/// Runs every module's self-checks. Failures are report entries, never throws.
inline ValidationReport validate(const ValidationOptions& opts = {}) {
    using Fn = ValidationCheck (*)(const ValidationOptions&);
    const std::vector<std::pair<const char*, Fn>> suite{
        {"ici_zero_doppler_identity", [](const ValidationOptions&) { return detail::check_zero_doppler_identity(); }},
        {"linearization_finite_difference", detail::check_finite_difference},
        {"subspace_alignment", detail::check_lemma1},
        {"lmmse_error_covariance", detail::check_lmmse},
        {"s_estimator_mse", detail::check_s_estimator},
        {"coherent_tightness", detail::check_coherent_tightness},
        {"sandwich_ordering", detail::check_sandwich},
        {"degrees_of_freedom_slope", detail::check_dof},
    };
    ValidationReport report;
    for (const auto& [name, fn] : suite) {
        try {
            report.checks.push_back(fn(opts));
        } catch (const std::exception& e) {
            report.checks.push_back({name, false, std::numeric_limits<double>::infinity(), 0.0, e.what()});
        }
    }
    return report;
}

} // namespace dopcap
