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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Reference values come from test-side oracles (time-domain
// OFDM link, water-filling, explicit estimators, regressions), not from the
// library paths under test.

#include "dopcap/dopcap.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace dopcap;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double logdet(const CMatrix& A) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (A + A.adjoint()));
    return es.eigenvalues().array().log().sum();
}

// Coherent capacity by water-filling over the singular values of F.
double waterfilling_capacity(const CMatrix& F, double P) {
    Eigen::JacobiSVD<CMatrix> svd(F);
    std::vector<double> g;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 0.0)
            g.push_back(svd.singularValues()(i) * svd.singularValues()(i));
    std::sort(g.rbegin(), g.rend());
    for (std::size_t k = g.size(); k >= 1; --k) {
        double inv = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            inv += 1.0 / g[i];
        const double mu = (P + inv) / static_cast<double>(k);
        if (mu > 1.0 / g[k - 1]) {
            double c = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                c += std::log(mu * g[i]);
            return c;
        }
    }
    return 0.0;
}

// CP-OFDM link simulated sample by sample: unitary IDFT, cyclic prefix of
// length L-1 first, Doppler ramp over sample index 1..N+L-1, CP removal, DFT.
CMatrix time_domain_channel(Eigen::Index N, Eigen::Index L, const CVector& h, double f_d) {
    const Eigen::Index cp = L - 1;
    const double nd = static_cast<double>(N);
    CMatrix H(N, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        CVector tx(N + cp);
        for (Eigen::Index m = 0; m < N + cp; ++m) {
            const Eigen::Index t = (m - cp + N) % N;
            tx(m) = std::polar(1.0 / std::sqrt(nd), 2.0 * pi * static_cast<double>(t * k) / nd);
        }
        CVector rx(N + cp);
        for (Eigen::Index m = 0; m < N + cp; ++m) {
            cplx acc{0.0, 0.0};
            for (Eigen::Index l = 0; l < h.size() && l <= m; ++l)
                acc += h(l) * tx(m - l);
            rx(m) = std::polar(1.0, 2.0 * pi * static_cast<double>(m + 1) * f_d / nd) * acc;
        }
        for (Eigen::Index i = 0; i < N; ++i) {
            cplx y{0.0, 0.0};
            for (Eigen::Index t = 0; t < N; ++t)
                y += rx(cp + t) * std::polar(1.0 / std::sqrt(nd), -2.0 * pi * static_cast<double>(t * i) / nd);
            H(i, k) = y;
        }
    }
    return H;
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) { return fit_line(x, y).slope; }

// 1
Outcome coherent_tightness() {
    double worst = 0.0, worst_oracle = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        SampleRng rng(101, k);
        const Eigen::Index n = Eigen::Index{2} << (k % 3);
        const auto ch = random_channel(n, 0.0, rng);
        const double P = std::pow(10.0, static_cast<double>(k % 5)) * static_cast<double>(n);
        const auto ub = ub_logdet(ch, P);
        const double opt = rate_gaussian_optimal(ch, ub.q_used).rate_nats;
        const double lin = rate_gaussian_linear(ch, ub.q_used).rate_nats;
        worst = std::max({worst, std::abs(opt - ub.rate_nats), std::abs(lin - ub.rate_nats)});
        worst_oracle = std::max(worst_oracle, std::abs(ub.rate_nats - waterfilling_capacity(ch.F, P)));
    }
    return {worst < 1e-6 && worst_oracle < 1e-6,
            "max |R_G - ub_logdet|, |R_lin - ub_logdet| = " + fmt(worst) + ", |ub_logdet - waterfilling| = " +
                fmt(worst_oracle) + " (< 1e-6)"};
}

// 2
Outcome sandwich() {
    int violations = 0, comparisons = 0;
    double worst = -1e300;
    std::string where;
    MCConfig mc;
    SchemeSearchOptions pilot_opts;
    SchemeSearchOptions sup_opts;
    sup_opts.mode = SchemeMode::superposition;
    sup_opts.search_samples = 300;
    MCConfig sup_mc;
    sup_mc.n_samples = 1000;
    for (Eigen::Index n : {4, 8})
        for (std::uint64_t draw_idx = 0; draw_idx < 10; ++draw_idx) {
            SampleRng rng(202, static_cast<std::uint64_t>(n) * 100 + draw_idx);
            const auto draw = draw_ntn_channel(static_cast<std::size_t>(n), ntn_tdl_a(), rng);
            const auto pre = build_precoder(draw.lin.nominal, draw.lin.sensitivity);
            for (double sigma : {0.1, 0.01})
                for (double snr : {0.0, 10.0, 20.0, 30.0, 40.0}) {
                    const StructuredChannel ch{draw.lin.nominal, draw.lin.sensitivity, sigma * sigma, true};
                    const double P = snr_to_power(snr, static_cast<std::size_t>(n), SnrConvention::per_subcarrier);
                    const auto iso = InputCovariance::isotropic(n, P);
                    mc.seed = stream_key(202, draw_idx);
                    sup_mc.seed = mc.seed;
                    std::vector<std::pair<std::string, Estimate>> lower{
                        {"gaussian_linear", exact_estimate(rate_gaussian_linear(ch, iso).rate_nats)},
                        {"sa_pilot", optimize_scheme(ch, pre, P, mc, pilot_opts).rate},
                        {"sa_superposition", optimize_scheme(ch, pre, P, sup_mc, sup_opts).rate},
                    };
                    const auto go = rate_gaussian_optimal(ch, iso, mc);
                    lower.push_back({"gaussian_optimal", Estimate{go.rate_nats, go.std_err, go.n_samples, mc.seed}});
                    const std::vector<std::pair<std::string, UpperBoundResult>> upper{
                        {"ub_logdet", ub_logdet(ch, P)}, {"ub_dof", ub_dof(ch, P)}, {"ub_general", ub_general_search(ch, P)}};
                    for (const auto& [ln, lo] : lower)
                        for (const auto& [un, up] : upper) {
                            if (!up.certified)
                                continue;
                            ++comparisons;
                            const double excess = lo.mean - up.rate_nats - 3.0 * lo.std_err;
                            if (excess > worst) {
                                worst = excess;
                                where = ln + " vs " + un + " N=" + std::to_string(n) + " sigma=" + fmt(sigma) +
                                        " snr=" + fmt(snr);
                            }
                            violations += excess > 0.0;
                        }
                }
        }
    return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(comparisons) +
                                 " comparisons; tightest margin " + fmt(-worst) + " nats (" + where + ")"};
}

// 3
Outcome lemma1() {
    double worst_rank = 0.0, worst_align = 0.0;
    for (std::uint64_t k = 0; k < 500; ++k) {
        SampleRng rng(303, k);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(k % 7);
        const CMatrix F = rng.complex_normal_matrix(n, n);
        const CMatrix G = rng.complex_normal_matrix(n, n);
        const auto pre = build_precoder(F, G);
        CMatrix C(n, 2 * (n - 1));
        C << F * pre.V, G * pre.V;
        Eigen::JacobiSVD<CMatrix> svd(C);
        const auto sv = svd.singularValues();
        worst_rank = std::max(worst_rank, sv(n - 1) / sv(0));
        const double scale = F.norm() + G.norm();
        for (int j = 0; j < 100; ++j) {
            const cplx s = rng.complex_normal(1.0) * (1.0 + 9.0 * rng.uniform());
            worst_align = std::max(worst_align, (pre.U_perp.adjoint() * (F + s * G) * pre.V).norm() / scale);
        }
    }
    return {worst_rank < 1e-8 && worst_align < 1e-8,
            "max sigma_N/sigma_1 = " + fmt(worst_rank) + ", max alignment residual / (|F|+|G|) = " + fmt(worst_align) +
                " (< 1e-8)"};
}

// 4
Outcome linearization() {
    double worst = 0.0;
    std::string where;
    for (std::size_t n : {4u, 8u, 16u})
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SampleRng rng(404, seed);
            const auto draw = draw_ntn_channel(n, ntn_tdl_a(), rng);
            const CMatrix& F = draw.lin.nominal;
            const CMatrix& G = draw.lin.sensitivity;
            const auto N = static_cast<Eigen::Index>(n);
            const auto L = static_cast<Eigen::Index>(draw.config.n_taps);
            const CMatrix H0 = time_domain_channel(N, L, draw.taps.coefficients, 0.0);
            if ((H0 - F).norm() > 1e-10 * F.norm())
                return {false, "nominal matrix disagrees with the time-domain link"};
            for (double eps : {1e-3, 1e-4}) {
                const CMatrix He = time_domain_channel(N, L, draw.taps.coefficients, eps);
                const double rel = ((He - F) / eps - G).norm() / G.norm();
                if (rel / (10.0 * eps) > worst) {
                    worst = rel / (10.0 * eps);
                    where = "N=" + std::to_string(n) + " eps=" + fmt(eps);
                }
            }
        }
    return {worst <= 1.0, "max rel_err / (10 eps) = " + fmt(worst) + " at " + where + " (<= 1)"};
}

// 5
Outcome dof() {
    SampleRng rng(505, 0);
    const auto ch = random_channel(4, 0.01, rng);
    const auto pre = build_precoder(ch.F, ch.G);
    MCConfig mc;
    std::vector<double> lp, sa, ud;
    for (double P : {1e3, 1e4, 1e5, 1e6}) {
        lp.push_back(std::log(P));
        sa.push_back(optimize_scheme(ch, pre, P, mc).rate.mean);
        ud.push_back(ub_dof(ch, P).rate_nats);
    }
    const double s_sa = slope_of(lp, sa), s_ud = slope_of(lp, ud);
    const bool ok = std::abs(s_sa - 3.0) <= 0.3 && std::abs(s_ud - 3.0) <= 0.3;
    return {ok, "slope sa_pilot = " + fmt(s_sa) + ", slope ub_dof = " + fmt(s_ud) + " (3 +- 0.3)"};
}

// 6
Outcome small_sigma() {
    SampleRng rng(606, 0);
    const auto base = random_channel(2, 0.0, rng);
    const double P = 10.0;
    const auto bracket = small_sigma_bracket(base, P);
    const double cg = waterfilling_capacity(base.F, P);
    if (std::abs(cg - bracket.coherent_capacity) > 1e-6)
        return {false, "C_G mismatch vs water-filling oracle"};
    std::vector<double> x, y;
    for (double sigma : {0.1, 0.03, 0.01, 0.003}) {
        const auto ch = base.with_sigma2(sigma * sigma);
        x.push_back(sigma * sigma);
        y.push_back(rate_gaussian_optimal_quadrature(ch, bracket.q_star, 64).rate_nats - cg);
    }
    const auto fit = fit_line(x, y);
    const bool ok = fit.r2 > 0.99 && fit.slope >= -bracket.lower_gap_coeff && fit.slope <= bracket.upper_gap_coeff;
    return {ok, "R^2 = " + fmt(fit.r2) + ", slope = " + fmt(fit.slope) + ", bracket [" +
                    fmt(-bracket.lower_gap_coeff) + ", " + fmt(bracket.upper_gap_coeff) +
                    "], exact second-order coefficient " + fmt(bracket.second_order_coeff)};
}

// 7
Outcome lmmse() {
    constexpr std::size_t draws = 1000000;
    double worst24 = 0.0, worst_ce = 0.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        SampleRng setup(707, k);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(k % 2);
        const auto ch = random_channel(n, 0.1 + 0.1 * static_cast<double>(k), setup);
        const CMatrix A = setup.complex_normal_matrix(n, n);
        const CMatrix Q = A * A.adjoint();
        const CMatrix C = lmmse_error_cov(ch, InputCovariance{Q});
        const CMatrix Cyy = CMatrix::Identity(n, n) + ch.F * Q * ch.F.adjoint() + ch.sigma2 * ch.G * Q * ch.G.adjoint();
        const CMatrix W = Q * ch.F.adjoint() * Cyy.inverse();
        const CMatrix L = Q.llt().matrixL();

        const auto ch3 = random_channel(3, 0.1 + 0.1 * static_cast<double>(k), setup);
        const auto pre = build_precoder(ch3.F, ch3.G);
        const CVector x_p = 1.5 * choose_pilot_direction(ch3.G, pre.U_perp).v_p;
        const cplx s_hat = setup.complex_normal(ch3.sigma2);
        const double es2 = 0.5 * ch3.sigma2;
        const CMatrix B = setup.complex_normal_matrix(2, 2);
        const CMatrix Qd = B * B.adjoint();
        const auto ref = refined_error_cov(ch3, pre, s_hat, x_p, Qd, es2);
        const CMatrix K = pre.U.adjoint() * (ch3.F + s_hat * ch3.G) * pre.V;
        const CMatrix UG = pre.U.adjoint() * ch3.G;
        const CMatrix R = CMatrix::Identity(pre.U.cols(), pre.U.cols()) +
                          es2 * UG * (x_p * x_p.adjoint() + pre.V * Qd * pre.V.adjoint()) * UG.adjoint();
        const CMatrix Wd = Qd * K.adjoint() * (K * Qd * K.adjoint() + R).inverse();
        const CMatrix Ld = Qd.llt().matrixL();

        CMatrix acc = CMatrix::Zero(n, n), acc_d = CMatrix::Zero(2, 2);
        for (std::size_t i = 0; i < draws; ++i) {
            SampleRng r(708 + k, i);
            const CVector x = L * r.complex_normal_vector(n);
            const cplx s = r.complex_normal(ch.sigma2);
            const CVector y = (ch.F + s * ch.G) * x + r.complex_normal_vector(n);
            const CVector e = x - W * y;
            acc += e * e.adjoint();

            const CVector w = Ld * r.complex_normal_vector(2);
            const cplx s3 = s_hat + r.complex_normal(es2);
            const CVector y3 = (ch3.F + s3 * ch3.G) * (x_p + pre.V * w) + r.complex_normal_vector(3);
            const CVector yu = pre.U.adjoint() * (y3 - (ch3.F + s_hat * ch3.G) * x_p);
            const CVector ed = w - Wd * yu;
            acc_d += ed * ed.adjoint();
        }
        acc /= static_cast<double>(draws);
        acc_d /= static_cast<double>(draws);
        worst24 = std::max(worst24, (acc - C).norm() / C.norm());
        worst_ce = std::max(worst_ce, (acc_d - ref.C_e).norm() / ref.C_e.norm());
    }
    return {worst24 < 0.02 && worst_ce < 0.02, "LMMSE error covariance rel. Frobenius " + fmt(worst24) +
                                                   ", conditional refined-layer " + fmt(worst_ce) + " (< 0.02)"};
}

// 8
Outcome s_estimator() {
    SampleRng setup(808, 0);
    const auto ch = random_channel(4, 0.3, setup);
    const auto pre = build_precoder(ch.F, ch.G);
    const CVector x_p = 2.0 * choose_pilot_direction(ch.G, pre.U_perp).v_p;
    const CVector g_perp = pre.U_perp.adjoint() * ch.G * x_p;
    const CVector f_perp = pre.U_perp.adjoint() * ch.F * x_p;
    const double want = 1.0 / (g_perp.squaredNorm() + 1.0 / ch.sigma2);
    constexpr std::size_t draws = 100000;
    double mse = 0.0, v_hat = 0.0;
    cplx cross{0.0, 0.0};
    for (std::size_t i = 0; i < draws; ++i) {
        SampleRng r(809, i);
        const cplx s = r.complex_normal(ch.sigma2);
        const CVector w = r.complex_normal_vector(3, 5.0);
        const CVector y = (ch.F + s * ch.G) * (x_p + pre.V * w) + r.complex_normal_vector(4);
        const cplx sh = estimate_s(pre.U_perp.adjoint() * y - f_perp, g_perp, ch.sigma2).s_hat;
        const cplx e = s - sh;
        mse += std::norm(e);
        v_hat += std::norm(sh);
        cross += sh * std::conj(e);
    }
    mse /= draws;
    v_hat /= draws;
    const double corr = std::abs(cross / static_cast<double>(draws)) / std::sqrt(mse * v_hat);
    const double rel = std::abs(mse - want) / want;
    return {rel < 0.02 && corr < 0.01,
            "MSE rel. error " + fmt(rel) + " (< 0.02), |corr(s_hat, e_s)| = " + fmt(corr) + " (< 0.01)"};
}

// 9
Outcome figure_shape() {
    SweepSpec spec;
    spec.n_subcarriers = 64;
    spec.snr_grid_db = {30.0, 40.0};
    spec.sigma_list = {0.1};
    spec.bounds = {"gaussian_linear", "sa_pilot", "ub_logdet", "ub_dof"};
    spec.n_channel_realizations = 10;
    spec.workers = std::max(1u, std::thread::hardware_concurrency());
    const auto rows = run_sweep(spec);
    auto get = [&](const std::string& b, double snr) {
        for (const auto& r : rows)
            if (r.bound_name == b && r.snr_db == snr)
                return r.rate_nats;
        return std::numeric_limits<double>::quiet_NaN();
    };
    const double lin_gain = get("gaussian_linear", 40) - get("gaussian_linear", 30);
    const double sa_gain = get("sa_pilot", 40) - get("sa_pilot", 30);
    const double need = 0.8 * 63.0 * std::log(10.0);
    const double ub = std::min(get("ub_logdet", 40), get("ub_dof", 40));
    const double track = (ub - get("sa_pilot", 40)) / ub;
    const bool ok = lin_gain < 0.5 && sa_gain >= need && std::abs(track) <= 0.15;
    return {ok, "gaussian_linear gain " + fmt(lin_gain) + " nats (< 0.5), sa_pilot gain " + fmt(sa_gain) +
                    " nats (>= " + fmt(need) + "), sa_pilot " + fmt(get("sa_pilot", 40)) + " vs min UB " + fmt(ub) +
                    " at 40 dB: gap " + fmt(100.0 * track) + "% (<= 15%)"};
}

// 10
Outcome cli_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "dopcap_acceptance";
    fs::create_directories(dir);
    const fs::path cfg = dir / "sweep.ini";
    {
        std::ofstream os(cfg);
        os << "[sweep]\nsnr_db = 0, 20, 40\nsigma = 0.1, 0.01\nn_subcarriers = 8\n"
              "bounds = gaussian_optimal, gaussian_linear, sa_pilot, sa_superposition, ub_logdet, ub_dof, ub_general\n"
              "realizations = 2\n[mc]\nsamples = 1000\nseed = 5\n[channel]\ntap_seed = 9\n";
    }
    auto run = [&](unsigned workers, int rep) {
        const fs::path out = dir / ("w" + std::to_string(workers) + "_" + std::to_string(rep) + ".csv");
        const std::string cmd = std::string(DOPCAP_CLI_PATH) + " bounds sweep --config " + cfg.string() +
                                " --workers " + std::to_string(workers) + " -o " + out.string();
        if (std::system(cmd.c_str()) != 0)
            return std::string("<run failed>");
        std::ifstream is(out, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    const std::string ref = run(1, 0);
    if (ref == "<run failed>")
        return {false, "CLI run failed"};
    bool same = run(1, 1) == ref;
    for (unsigned w : {4u, 8u})
        same = same && run(w, 0) == ref;
    const auto lines = std::count(ref.begin(), ref.end(), '\n');
    return {same, std::string(same ? "byte-identical" : "DIFFERENT") + " CSV (" + std::to_string(lines) +
                      " lines) for 1 (x2), 4 and 8 workers"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "coherent tightness", 60, coherent_tightness},
        {2, "sandwich ordering", 600, sandwich},
        {3, "subspace alignment construction", 60, lemma1},
        {4, "linearization fidelity", 60, linearization},
        {5, "degrees of freedom", 300, dof},
        {6, "small-sigma scaling", 300, small_sigma},
        {7, "LMMSE algebra", 300, lmmse},
        {8, "Doppler estimator", 60, s_estimator},
        {9, "figure shape at N=64", 1800, figure_shape},
        {10, "CLI determinism", 600, cli_determinism},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i)
        only.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool ok = o.passed && in_time;
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << "; " << fmt(secs)
                  << " s (budget " << fmt(c.budget_s) << " s" << (in_time ? "" : ", EXCEEDED") << ")" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
