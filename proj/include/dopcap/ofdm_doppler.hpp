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

#include "dopcap/linalg.hpp"
#include "dopcap/mc_engine.hpp"

#include <vector>

namespace dopcap {

/// Physical-layer numerology of one OFDM symbol.
struct OFDMConfig {
    std::size_t n_subcarriers = 64;
    std::size_t n_taps = 1;
    double carrier_freq_hz = 2e9;
    double subcarrier_spacing_hz = 15e3;
    double sample_period_s = 1.0 / (15e3 * 1024.0);

    std::size_t cp_length() const { return n_taps - 1; }

    void validate() const {
        if (n_subcarriers < 2)
            throw ConfigError("OFDMConfig: need at least 2 subcarriers");
        if (n_taps < 1)
            throw ConfigError("OFDMConfig: need at least one tap");
        if (!(sample_period_s > 0.0))
            throw ConfigError("OFDMConfig: sample period must be positive");
    }

    /// 2 GHz carrier, 15 kHz spacing, T_s = 1/(15 kHz * 1024) regardless of N.
    static OFDMConfig ntn(std::size_t n_subcarriers, std::size_t n_taps) {
        OFDMConfig c;
        c.n_subcarriers = n_subcarriers;
        c.n_taps = n_taps;
        return c;
    }
};

struct MultipathProfile {
    std::vector<double> normalized_delays;
    std::vector<double> powers_db;
    double desired_rms_delay_spread_ns = 100.0;

    void validate() const {
        if (normalized_delays.empty())
            throw ConfigError("MultipathProfile: no taps");
        if (normalized_delays.size() != powers_db.size())
            throw ConfigError("MultipathProfile: delay and power lists differ in length");
        if (normalized_delays.front() != 0.0)
            throw ConfigError("MultipathProfile: first normalized delay must be 0");
        for (double d : normalized_delays)
            if (d < 0.0 || !std::isfinite(d))
                throw ConfigError("MultipathProfile: negative or non-finite delay");
        if (desired_rms_delay_spread_ns < 0.0)
            throw ConfigError("MultipathProfile: negative delay spread");
    }
};

/// 3GPP NTN-TDL-A: three Rayleigh taps.
inline MultipathProfile ntn_tdl_a(double rms_delay_spread_ns = 100.0) {
    return MultipathProfile{{0.0, 1.0811, 2.8416}, {0.0, -4.675, -6.482}, rms_delay_spread_ns};
}

/// Channel impulse response indexed by sample delay.
struct TapSet {
    CVector coefficients;

    std::size_t size() const { return static_cast<std::size_t>(coefficients.size()); }
};

/// Sample index of every tap: round(tau_model * DS / T_s), ties away from zero.
inline std::vector<std::size_t> scale_delays(const MultipathProfile& profile, double sample_period_s) {
    profile.validate();
    if (!(sample_period_s > 0.0))
        throw ConfigError("scale_delays: sample period must be positive");
    std::vector<std::size_t> idx;
    idx.reserve(profile.normalized_delays.size());
    for (double d : profile.normalized_delays) {
        const double tau_s = d * profile.desired_rms_delay_spread_ns * 1e-9;
        idx.push_back(static_cast<std::size_t>(std::round(tau_s / sample_period_s)));
    }
    return idx;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Rayleigh tap draw: alpha_k = sqrt(P_k) g_k, g_k ~ CN(0,1), placed at n_k.
/// Taps that land on the same index add.
inline TapSet draw_taps(const MultipathProfile& profile, const std::vector<std::size_t>& indices,
                        SampleRng& rng) {
    profile.validate();
    if (indices.size() != profile.powers_db.size())
        throw ConfigError("draw_taps: one index per tap required");
    const std::size_t len = *std::max_element(indices.begin(), indices.end()) + 1;
    TapSet taps{CVector::Zero(static_cast<Eigen::Index>(len))};
    for (std::size_t k = 0; k < indices.size(); ++k)
        taps.coefficients(static_cast<Eigen::Index>(indices[k])) +=
            std::sqrt(db_to_linear(profile.powers_db[k])) * rng.complex_normal(1.0);
    return taps;
}

/// Tap DFT: H_k = sum_l h_l exp(-j 2 pi l k / N), evaluated directly.
inline CVector tap_dft(const TapSet& taps, std::size_t n) {
    CVector out = CVector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t l = 0; l < taps.size(); ++l) {
            const double ang = -2.0 * pi * static_cast<double>((l * k) % n) / static_cast<double>(n);
            acc += taps.coefficients(static_cast<Eigen::Index>(l)) * std::polar(1.0, ang);
        }
        out(static_cast<Eigen::Index>(k)) = acc;
    }
    return out;
}

namespace detail {

/// sin(pi x) / sin(pi x / N), with the removable singularity at x = 0 mod N
/// replaced by the L'Hopital limit N cos(pi x) / cos(pi x / N).
inline double dirichlet_ratio(double x, double n) {
    const double den = std::sin(pi * x / n);
    if (std::abs(den) < 1e-9)
        return n * std::cos(pi * x) / std::cos(pi * x / n);
    return std::sin(pi * x) / den;
}

} // namespace detail

/// Inter-carrier interference matrix B(f_d) of one CP-OFDM symbol.
inline CMatrix ici_matrix(const OFDMConfig& config, double f_d) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n_subcarriers);
    const double nd = static_cast<double>(n);
    const double len = static_cast<double>(config.n_taps);
    CMatrix B(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double d = static_cast<double>(k - i);
            const double x = f_d + d;
            const double psi = 0.5 * (((2.0 * len - 1.0) / nd + 1.0) * f_d + (1.0 - 1.0 / nd) * d);
            B(i, k) = (detail::dirichlet_ratio(x, nd) / nd) * std::polar(1.0, 2.0 * pi * psi);
        }
    }
    return B;
}

inline void check_taps_fit(const OFDMConfig& config, const TapSet& taps) {
    config.validate();
    if (taps.size() > config.cp_length() + 1)
        throw ConfigError("tap set longer than cyclic prefix + 1");
}

/// Frequency-domain channel H(i,k) = H_k B(i,k).
inline CMatrix full_channel(const OFDMConfig& config, const TapSet& taps, double f_d) {
    check_taps_fit(config, taps);
    const CVector h = tap_dft(taps, config.n_subcarriers);
    return ici_matrix(config, f_d) * h.asDiagonal();
}

/// First-order expansion H(f_d) ~ F + f_d G around f_d = 0.
struct DopplerLinearization {
    CMatrix nominal;
    CMatrix sensitivity;
    bool nominal_is_diagonal = true;
};

/// dB/df_d at f_d = 0.
inline CMatrix ici_derivative(const OFDMConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n_subcarriers);
    const double nd = static_cast<double>(n);
    const double len = static_cast<double>(config.n_taps);
    CMatrix D(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == i) {
                D(i, k) = cplx{0.0, pi * (1.0 + (2.0 * len - 1.0) / nd)};
            } else {
                const double d = static_cast<double>(k - i);
                D(i, k) = (pi / nd) * std::polar(1.0, -pi * d / nd) / std::sin(pi * d / nd);
            }
        }
    }
    return D;
}

inline DopplerLinearization linearize(const OFDMConfig& config, const TapSet& taps) {
    check_taps_fit(config, taps);
    const CVector h = tap_dft(taps, config.n_subcarriers);
    DopplerLinearization lin;
    lin.nominal = h.asDiagonal();
    lin.sensitivity = ici_derivative(config) * h.asDiagonal();
    lin.nominal_is_diagonal = true;
    return lin;
}

/// Everything needed to turn a profile into (F, G) for N subcarriers.
struct NtnChannelDraw {
    OFDMConfig config;
    TapSet taps;
    DopplerLinearization lin;
};

/// Draws one NTN-TDL-A realization for the given stream.
inline NtnChannelDraw draw_ntn_channel(std::size_t n_subcarriers, const MultipathProfile& profile,
                                       SampleRng& rng, double sample_period_s = 1.0 / (15e3 * 1024.0)) {
    const auto idx = scale_delays(profile, sample_period_s);
    NtnChannelDraw out;
    out.taps = draw_taps(profile, idx, rng);
    out.config = OFDMConfig::ntn(n_subcarriers, out.taps.size());
    out.config.sample_period_s = sample_period_s;
    out.lin = linearize(out.config, out.taps);
    return out;
}

} // namespace dopcap
