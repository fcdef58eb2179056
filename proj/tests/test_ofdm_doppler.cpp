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

#include "dopcap/ofdm_doppler.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace dopcap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Independent CP-OFDM link: unitary IDFT, cyclic prefix of length L-1 sent
// first, Doppler phase ramp over the sample index 1..N+L-1, CP removal, DFT.
// Column k is the response to the k-th unit symbol.
CMatrix time_domain_channel(std::size_t n, std::size_t n_taps, const CVector& h, double f_d) {
    const auto N = static_cast<Eigen::Index>(n);
    const auto cp = static_cast<Eigen::Index>(n_taps - 1);
    const double nd = static_cast<double>(n);
    CMatrix H(N, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        CVector x(N);
        for (Eigen::Index t = 0; t < N; ++t)
            x(t) = std::polar(1.0 / std::sqrt(nd), 2.0 * pi * static_cast<double>(t * k) / nd);
        CVector tx(N + cp);
        for (Eigen::Index m = 0; m < N + cp; ++m)
            tx(m) = x((m - cp + N) % N);
        CVector rx = CVector::Zero(N + cp);
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

TapSet random_taps(std::size_t n_taps, std::uint64_t seed) {
    SampleRng rng(seed, 0);
    TapSet t;
    t.coefficients = rng.complex_normal_vector(static_cast<Eigen::Index>(n_taps));
    return t;
}

} // namespace

TEST_CASE("delay scaling of the NTN-TDL-A profile", "[ofdm]") {
    const double ts = 1.0 / (15e3 * 1024.0);
    CHECK(scale_delays(ntn_tdl_a(100.0), ts) == std::vector<std::size_t>{0, 2, 4});
    CHECK(scale_delays(ntn_tdl_a(200.0), ts) == std::vector<std::size_t>{0, 3, 9});
    CHECK(scale_delays(ntn_tdl_a(0.0), ts) == std::vector<std::size_t>{0, 0, 0});

    MultipathProfile bad = ntn_tdl_a();
    bad.normalized_delays[1] = -0.5;
    CHECK_THROWS_AS(scale_delays(bad, ts), ConfigError);
}

TEST_CASE("tap draws have the profile's second moments", "[ofdm]") {
    const auto profile = ntn_tdl_a();
    const std::vector<std::size_t> idx{0, 2, 4};
    const std::vector<double> want{1.0, std::pow(10.0, -0.4675), std::pow(10.0, -0.6482)};
    constexpr std::size_t draws = 100000;
    std::vector<double> acc(3, 0.0);
    for (std::size_t i = 0; i < draws; ++i) {
        SampleRng rng(11, i);
        const auto taps = draw_taps(profile, idx, rng);
        REQUIRE(taps.size() == 5);
        CHECK(taps.coefficients(1) == cplx{0.0, 0.0});
        CHECK(taps.coefficients(3) == cplx{0.0, 0.0});
        for (std::size_t k = 0; k < 3; ++k)
            acc[k] += std::norm(taps.coefficients(static_cast<Eigen::Index>(idx[k])));
    }
    for (std::size_t k = 0; k < 3; ++k)
        CHECK_THAT(acc[k] / draws, WithinRel(want[k], 0.02));

    MultipathProfile single;
    single.normalized_delays = {0.0};
    single.powers_db = {0.0};
    double p0 = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        SampleRng rng(12, i);
        p0 += std::norm(draw_taps(single, {0}, rng).coefficients(0));
    }
    CHECK_THAT(p0 / draws, WithinRel(1.0, 0.02));

    SampleRng a(5, 9), b(5, 9);
    CHECK(draw_taps(profile, idx, a).coefficients == draw_taps(profile, idx, b).coefficients);
}

TEST_CASE("ICI matrix is the identity without Doppler", "[ofdm]") {
    for (std::size_t n : {2u, 4u, 16u, 64u}) {
        const auto B = ici_matrix(OFDMConfig::ntn(n, 5), 0.0);
        CHECK((B - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ICI entries match a 50-digit reference", "[ofdm]") {
    // mpmath at 50 digits, N = 4, f_d = 0.1.
    const auto b1 = ici_matrix(OFDMConfig::ntn(4, 1), 0.1);
    CHECK_THAT(b1(1, 1).real(), WithinAbs(0.9096920938634016461921206, 1e-14));
    CHECK_THAT(b1(1, 1).imag(), WithinAbs(0.3768068028617995534603783, 1e-14));
    const auto b3 = ici_matrix(OFDMConfig::ntn(4, 3), 0.1);
    CHECK_THAT(b3(1, 1).real(), WithinAbs(0.7487288880105839850078883, 1e-14));
    CHECK_THAT(b3(1, 1).imag(), WithinAbs(0.639474881898378717308063, 1e-14));
    CHECK_THAT(b3(0, 1).real(), WithinAbs(0.1012828712710736582231132, 1e-14));
    CHECK_THAT(b3(0, 1).imag(), WithinAbs(-0.007971134841131609476712133, 1e-14));
    CHECK_THAT(b3(2, 0).real(), WithinAbs(0.05032776467687370837238864, 1e-14));
    CHECK_THAT(b3(2, 0).imag(), WithinAbs(-0.05892624143533155932743666, 1e-14));
}

TEST_CASE("ICI magnitudes are bounded by one for small Doppler", "[ofdm]") {
    for (std::size_t i = 0; i < 50; ++i) {
        SampleRng rng(21, i);
        const double f_d = rng.uniform() - 0.5;
        const auto B = ici_matrix(OFDMConfig::ntn(16, 5), f_d);
        CHECK(B.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("integer Doppler shift is a cyclic subcarrier shift", "[ofdm]") {
    const std::size_t n = 8;
    const auto B = ici_matrix(OFDMConfig::ntn(n, 1), 1.0);
    for (Eigen::Index i = 0; i < 8; ++i) {
        CHECK(std::abs(B(i, i)) < 1e-12);
        CHECK_THAT(std::abs(B((i + 1) % 8, i)), WithinAbs(1.0, 1e-12));
    }
    CVector h(1);
    h << 1.0;
    TapSet t{h};
    const CMatrix H = full_channel(OFDMConfig::ntn(n, 1), t, 1.0);
    const CMatrix ref = time_domain_channel(n, 1, h, 1.0);
    CHECK((H - ref).norm() / ref.norm() < 1e-10);
}

TEST_CASE("frequency-domain channel matches a time-domain CP-OFDM link", "[ofdm]") {
    for (std::size_t n : {4u, 8u, 16u})
        for (std::size_t taps : {1u, 3u, 5u})
            for (double f_d : {0.05, -0.2, 0.37}) {
                const auto t = random_taps(taps, 100 * n + taps);
                const CMatrix H = full_channel(OFDMConfig::ntn(n, taps), t, f_d);
                const CMatrix ref = time_domain_channel(n, taps, t.coefficients, f_d);
                INFO("N=" << n << " L=" << taps << " f_d=" << f_d);
                CHECK((H - ref).norm() / ref.norm() < 1e-10);
            }
}

TEST_CASE("zero-Doppler channel is diagonal with the tap DFT", "[ofdm]") {
    CVector one(1);
    one << 1.0;
    CHECK((full_channel(OFDMConfig::ntn(8, 1), TapSet{one}, 0.0) - CMatrix::Identity(8, 8)).norm() < 1e-12);

    const auto t = random_taps(5, 3);
    const CMatrix H = full_channel(OFDMConfig::ntn(16, 5), t, 0.0);
    for (Eigen::Index k = 0; k < 16; ++k) {
        cplx want{0.0, 0.0};
        for (Eigen::Index l = 0; l < 5; ++l)
            want += t.coefficients(l) * std::polar(1.0, -2.0 * pi * static_cast<double>(l * k) / 16.0);
        CHECK(std::abs(H(k, k) - want) < 1e-12);
    }
    CHECK((H - CMatrix(H.diagonal().asDiagonal())).norm() < 1e-12);
}

TEST_CASE("taps longer than the cyclic prefix are rejected", "[ofdm]") {
    CHECK_THROWS_AS(full_channel(OFDMConfig::ntn(8, 3), random_taps(4, 1), 0.1), ConfigError);
    CHECK_THROWS_AS(linearize(OFDMConfig::ntn(8, 3), random_taps(4, 1)), ConfigError);
}

TEST_CASE("linearization by hand at N = 2", "[ofdm]") {
    CVector one(1);
    one << 1.0;
    const auto lin = linearize(OFDMConfig::ntn(2, 1), TapSet{one});
    CHECK((lin.nominal - CMatrix::Identity(2, 2)).norm() < 1e-15);
    CHECK(std::abs(lin.sensitivity(0, 0) - cplx{0.0, 1.5 * pi}) < 1e-12);
    CHECK(std::abs(lin.sensitivity(1, 1) - cplx{0.0, 1.5 * pi}) < 1e-12);
    CHECK(std::abs(lin.sensitivity(0, 1) - cplx{0.0, -pi / 2}) < 1e-12);
    CHECK(std::abs(lin.sensitivity(1, 0) - cplx{0.0, -pi / 2}) < 1e-12);
}

TEST_CASE("sensitivity is the Doppler derivative", "[ofdm]") {
    for (std::size_t n : {4u, 8u, 16u})
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SampleRng rng(seed, 0);
            const auto draw = draw_ntn_channel(n, ntn_tdl_a(), rng);
            const CMatrix& F = draw.lin.nominal;
            const CMatrix& G = draw.lin.sensitivity;
            CHECK((F - CMatrix(F.diagonal().asDiagonal())).norm() < 1e-12 * F.norm());
            std::vector<double> log_eps, log_err;
            for (double eps : {1e-2, 1e-3, 1e-4}) {
                const CMatrix H = full_channel(draw.config, draw.taps, eps);
                const double rel = ((H - F) / eps - G).norm() / G.norm();
                if (eps < 1e-2)
                    CHECK(rel <= 10.0 * eps);
                log_eps.push_back(std::log(eps));
                log_err.push_back(std::log(rel));
            }
            const double slope = (log_err.back() - log_err.front()) / (log_eps.back() - log_eps.front());
            CHECK_THAT(slope, WithinAbs(1.0, 0.2));
        }
}

TEST_CASE("null taps give a null channel", "[ofdm]") {
    TapSet zero{CVector::Zero(3)};
    const auto lin = linearize(OFDMConfig::ntn(8, 3), zero);
    CHECK(lin.nominal.norm() == 0.0);
    CHECK(lin.sensitivity.norm() == 0.0);
}

TEST_CASE("NTN draw uses five taps at desk scale", "[ofdm]") {
    SampleRng rng(1, 0);
    const auto draw = draw_ntn_channel(64, ntn_tdl_a(), rng);
    CHECK(draw.config.n_taps == 5);
    CHECK(draw.lin.nominal.rows() == 64);
}
