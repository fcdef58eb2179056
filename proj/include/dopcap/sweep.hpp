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
#include "dopcap/matrix_io.hpp"
#include "dopcap/mc_engine.hpp"
#include "dopcap/ofdm_doppler.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace dopcap {

enum class ChannelSource { ntn_tdl_a, synthetic_file };
enum class SnrConvention { per_subcarrier, total };
/// Input covariance for the Gaussian lower bounds: (P/N) I, or the maximizer
/// of the log-det bound (optimal when sigma = 0).
enum class LowerBoundQ { isotropic, logdet_opt };

inline const std::vector<std::string>& known_bounds() {
    static const std::vector<std::string> names{"gaussian_optimal", "gaussian_linear", "sa_pilot", "sa_superposition",
                                                "ub_logdet",        "ub_dof",          "ub_general"};
    return names;
}

struct SweepSpec {
    std::vector<double> snr_grid_db{0.0, 10.0, 20.0, 30.0, 40.0};
    std::vector<double> sigma_list{0.1, 0.01};
    std::size_t n_subcarriers = 64;
    std::vector<std::string> bounds{"gaussian_optimal", "gaussian_linear", "sa_pilot", "ub_logdet", "ub_dof"};
    ChannelSource channel_source = ChannelSource::ntn_tdl_a;
    std::string f_matrix_path;
    std::string g_matrix_path;
    double delay_spread_ns = 100.0;
    std::uint64_t tap_seed = 1;
    std::uint64_t mc_seed = 2;
    MCConfig mc{};
    std::size_t n_channel_realizations = 20;
    SnrConvention snr_convention = SnrConvention::per_subcarrier;
    LowerBoundQ lower_bound_q = LowerBoundQ::isotropic;
    /// Cells run in parallel on this many threads; results do not depend on it.
    unsigned workers = 1;
    /// wall_ms is written as 0 unless set, keeping the CSV reproducible.
    bool record_timing = false;
    /// Input radius for envelope-mode duality bounds: r = factor * sqrt(P).
    double ub_radius_factor = 10.0;

    void validate() const {
        if (snr_grid_db.empty())
            throw ConfigError("sweep: empty SNR grid");
        if (sigma_list.empty())
            throw ConfigError("sweep: empty sigma list");
        if (bounds.empty())
            throw ConfigError("sweep: empty bound list");
        for (const auto& b : bounds)
            if (std::find(known_bounds().begin(), known_bounds().end(), b) == known_bounds().end())
                throw ConfigError("sweep: unknown bound '" + b + "'");
        for (double s : sigma_list)
            if (!(s >= 0.0))
                throw ConfigError("sweep: sigma must be nonnegative");
        if (n_channel_realizations < 1)
            throw ConfigError("sweep: need at least one channel realization");
        if (channel_source == ChannelSource::ntn_tdl_a && n_subcarriers < 2)
            throw ConfigError("sweep: need at least 2 subcarriers");
        if (channel_source == ChannelSource::synthetic_file && (f_matrix_path.empty() || g_matrix_path.empty()))
            throw ConfigError("sweep: synthetic_file source needs both matrix paths");
        if (mc.n_samples < 1)
            throw ConfigError("sweep: mc samples must be >= 1");
    }
};

inline double snr_to_power(double snr_db, std::size_t n, SnrConvention conv) {
    const double lin = std::pow(10.0, snr_db / 10.0);
    return conv == SnrConvention::per_subcarrier ? static_cast<double>(n) * lin : lin;
}

struct ResultRow {
    double snr_db = 0.0;
    double sigma = 0.0;
    std::size_t n = 0;
    std::string bound_name;
    double rate_nats = 0.0;
    double rate_bits = 0.0;
    double stderr_nats = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t tap_seed = 0;
    std::uint64_t mc_seed = 0;
    std::string q_policy;
    double wall_ms = 0.0;
    /// "true" / "false" for upper bounds, "na" for lower bounds, "error" on failure.
    std::string certified;
};

inline const char* csv_header() {
    return "snr_db,sigma,n,bound_name,rate_nats,rate_bits,stderr_nats,n_samples,tap_seed,mc_seed,q_policy,wall_ms,"
           "certified";
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << csv_header() << '\n';
    for (const auto& r : rows) {
        os << format_double(r.snr_db) << ',' << format_double(r.sigma) << ',' << r.n << ',' << r.bound_name << ','
           << format_double(r.rate_nats) << ',' << format_double(r.rate_bits) << ',' << format_double(r.stderr_nats)
           << ',' << r.n_samples << ',' << r.tap_seed << ',' << r.mc_seed << ',' << r.q_policy << ','
           << format_double(r.wall_ms) << ',' << r.certified << '\n';
    }
}

/// Sidecar key=value description of a sweep: everything a row does not carry.
inline void write_metadata(std::ostream& os, const SweepSpec& spec) {
    os << "snr_convention=" << (spec.snr_convention == SnrConvention::per_subcarrier ? "per-subcarrier" : "total")
       << '\n';
    os << "power_mapping=" << (spec.snr_convention == SnrConvention::per_subcarrier ? "P=N*10^(snr/10)" : "P=10^(snr/10)")
       << '\n';
    os << "noise=unit\n";
    os << "channel_source=" << (spec.channel_source == ChannelSource::ntn_tdl_a ? "ntn_tdl_a" : "synthetic_file")
       << '\n';
    os << "delay_spread_ns=" << format_double(spec.delay_spread_ns) << '\n';
    os << "sample_period_s=" << format_double(1.0 / (15e3 * 1024.0)) << '\n';
    os << "realizations=" << spec.n_channel_realizations << '\n';
    os << "mc_samples=" << spec.mc.n_samples << '\n';
    os << "lower_bound_q=" << (spec.lower_bound_q == LowerBoundQ::isotropic ? "isotropic" : "logdet_opt") << '\n';
    os << "sa_qd=isotropic;rho=grid_search\n";
    os << "sa_superposition=mixture_entropy_estimator;inner=1000;biased\n";
    os << "sa_superposition_order=s_hat_after_coarse_decoding\n";
    os << "ub_radius=" << format_double(spec.ub_radius_factor) << "*sqrt(P)\n";
    os << "rate_unit=nats;bits=nats/ln2\n";
}

namespace detail {

struct Realization {
    StructuredChannel channel;
    AlignmentPrecoder precoder;
    std::string precoder_error;
};

inline std::vector<Realization> build_realizations(const SweepSpec& spec) {
    std::vector<Realization> out;
    if (spec.channel_source == ChannelSource::synthetic_file) {
        Realization r;
        r.channel = load_channel(spec.f_matrix_path, spec.g_matrix_path, 0.0);
        try {
            r.precoder = build_precoder(r.channel.F, r.channel.G);
        } catch (const Error& e) {
            r.precoder_error = e.what();
        }
        out.push_back(std::move(r));
        return out;
    }
    const auto profile = ntn_tdl_a(spec.delay_spread_ns);
    for (std::size_t k = 0; k < spec.n_channel_realizations; ++k) {
        SampleRng rng(spec.tap_seed, k);
        const auto draw = draw_ntn_channel(spec.n_subcarriers, profile, rng);
        Realization r;
        r.channel = StructuredChannel{draw.lin.nominal, draw.lin.sensitivity, 0.0, true};
        try {
            r.precoder = build_precoder(r.channel.F, r.channel.G);
        } catch (const Error& e) {
            r.precoder_error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

struct CellValue {
    Estimate estimate;
    std::string q_policy;
    std::string certified;
};

inline CellValue evaluate_bound(const std::string& bound, const Realization& real, double sigma, double P,
                                const SweepSpec& spec, std::size_t realization_index) {
    const StructuredChannel ch = real.channel.with_sigma2(sigma * sigma);
    MCConfig mc = spec.mc;
    mc.workers = 1;
    mc.seed = stream_key(spec.mc_seed, realization_index);
    if (bound == "gaussian_linear" || bound == "gaussian_optimal") {
        const bool iso = spec.lower_bound_q == LowerBoundQ::isotropic;
        const InputCovariance q = iso ? InputCovariance::isotropic(ch.dim(), P) : ub_logdet(ch, P).q_used;
        const char* policy = iso ? "isotropic" : "logdet_opt";
        if (bound == "gaussian_linear")
            return {exact_estimate(rate_gaussian_linear(ch, q).rate_nats), policy, "na"};
        const auto r = rate_gaussian_optimal(ch, q, mc);
        return {Estimate{r.rate_nats, r.std_err, r.n_samples, mc.seed}, policy, "na"};
    }
    if (bound == "sa_pilot" || bound == "sa_superposition") {
        if (!real.precoder_error.empty())
            throw Error(real.precoder_error);
        SchemeSearchOptions opts;
        opts.mode = bound == "sa_pilot" ? SchemeMode::pilot : SchemeMode::superposition;
        const auto res = optimize_scheme(ch, real.precoder, P, mc, opts);
        return {res.rate, "isotropic_qd;rho_grid", "na"};
    }
    if (bound == "ub_logdet") {
        const auto r = ub_logdet(ch, P);
        return {exact_estimate(r.rate_nats), r.q_description, r.certified ? "true" : "false"};
    }
    if (bound == "ub_dof") {
        const auto r = ub_dof(ch, P);
        return {exact_estimate(r.rate_nats), r.q_description, r.certified ? "true" : "false"};
    }
    if (bound == "ub_general") {
        GeneralSearchOptions opts;
        opts.r = spec.ub_radius_factor * std::sqrt(P);
        const auto r = ub_general_search(ch, P, opts);
        return {exact_estimate(r.rate_nats), r.q_description + ";r=" + format_double(opts.r),
                r.certified ? "true" : "false"};
    }
    throw ConfigError("unknown bound " + bound);
}

} // namespace detail

/// One row per (sigma, snr, bound), each averaged over the channel
/// realizations. Failing cells become rows with rate "nan" and certified
/// "error"; the sweep carries on.
inline std::vector<ResultRow> run_sweep(const SweepSpec& spec) {
    spec.validate();
    const auto realizations = detail::build_realizations(spec);
    const std::size_t n = static_cast<std::size_t>(realizations.front().channel.dim());

    struct Cell {
        double sigma;
        double snr;
        std::string bound;
    };
    std::vector<Cell> cells;
    for (double sigma : spec.sigma_list)
        for (double snr : spec.snr_grid_db)
            for (const auto& b : spec.bounds)
                cells.push_back({sigma, snr, b});

    std::vector<ResultRow> rows(cells.size());
    auto run_cell = [&](std::size_t idx) {
        const auto& c = cells[idx];
        ResultRow row;
        row.snr_db = c.snr;
        row.sigma = c.sigma;
        row.n = n;
        row.bound_name = c.bound;
        row.tap_seed = spec.tap_seed;
        row.mc_seed = spec.mc_seed;
        const double P = snr_to_power(c.snr, n, spec.snr_convention);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            std::vector<Estimate> parts;
            std::string policy;
            std::string certified = "na";
            for (std::size_t k = 0; k < realizations.size(); ++k) {
                auto v = detail::evaluate_bound(c.bound, realizations[k], c.sigma, P, spec, k);
                parts.push_back(v.estimate);
                policy = v.q_policy;
                if (v.certified == "false" || certified == "na")
                    certified = certified == "false" ? certified : v.certified;
            }
            const Estimate avg = combine_mean(parts);
            row.rate_nats = avg.mean;
            row.rate_bits = avg.mean / std::numbers::ln2;
            row.stderr_nats = avg.std_err;
            row.n_samples = parts.front().n_samples;
            row.q_policy = policy;
            row.certified = certified;
        } catch (const std::exception&) {
            row.rate_nats = std::numeric_limits<double>::quiet_NaN();
            row.rate_bits = row.rate_nats;
            row.stderr_nats = row.rate_nats;
            row.q_policy = "error";
            row.certified = "error";
        }
        if (spec.record_timing)
            row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        rows[idx] = std::move(row);
    };

    const unsigned workers = std::max(1u, spec.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++)
                    run_cell(i);
            });
        for (auto& t : pool)
            t.join();
    }
    return rows;
}

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos)
            continue;
        try {
            out.push_back(std::stod(item.substr(b)));
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + item + "'");
        }
    }
    return out;
}

inline std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

} // namespace detail

inline LowerBoundQ parse_lower_bound_q(const std::string& s) {
    if (s == "isotropic")
        return LowerBoundQ::isotropic;
    if (s == "logdet_opt")
        return LowerBoundQ::logdet_opt;
    throw ConfigError("unknown lower-bound Q policy '" + s + "' (expected isotropic or logdet_opt)");
}

inline ChannelSource parse_channel_source(const std::string& s) {
    if (s == "ntn_tdl_a")
        return ChannelSource::ntn_tdl_a;
    if (s == "synthetic_file")
        return ChannelSource::synthetic_file;
    throw ConfigError("unknown channel source '" + s + "'");
}

inline SnrConvention parse_snr_convention(const std::string& s) {
    if (s == "per-subcarrier")
        return SnrConvention::per_subcarrier;
    if (s == "total")
        return SnrConvention::total;
    throw ConfigError("unknown SNR convention '" + s + "' (expected total or per-subcarrier)");
}

/// Reads a sweep config:
///
///   [sweep]   snr_db, sigma, n_subcarriers, bounds, realizations,
///             snr_convention, lower_bound_q, workers, ub_radius_factor
///   [channel] source, f_matrix, g_matrix, tap_seed, delay_spread_ns
///   [mc]      samples, seed, batch_size
///
/// Lists are comma separated. Missing keys keep their defaults.
namespace detail {

/// Present-but-malformed numeric keys are errors rather than silently ignored.
template <class T>
std::optional<T> get_number(const boost::property_tree::ptree& tree, const std::string& key) {
    if (!tree.get_child_optional(key))
        return std::nullopt;
    return tree.get<T>(key);
}

} // namespace detail

inline SweepSpec load_sweep_config(std::istream& is, SweepSpec spec = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        if (auto v = tree.get_optional<std::string>("sweep.snr_db"))
            spec.snr_grid_db = detail::parse_double_list(*v);
        if (auto v = tree.get_optional<std::string>("sweep.sigma"))
            spec.sigma_list = detail::parse_double_list(*v);
        if (auto v = detail::get_number<std::size_t>(tree, "sweep.n_subcarriers"))
            spec.n_subcarriers = *v;
        if (auto v = tree.get_optional<std::string>("sweep.bounds"))
            spec.bounds = detail::parse_string_list(*v);
        if (auto v = detail::get_number<std::size_t>(tree, "sweep.realizations"))
            spec.n_channel_realizations = *v;
        if (auto v = tree.get_optional<std::string>("sweep.snr_convention"))
            spec.snr_convention = parse_snr_convention(*v);
        if (auto v = tree.get_optional<std::string>("sweep.lower_bound_q"))
            spec.lower_bound_q = parse_lower_bound_q(*v);
        if (auto v = detail::get_number<unsigned>(tree, "sweep.workers"))
            spec.workers = *v;
        if (auto v = detail::get_number<double>(tree, "sweep.ub_radius_factor"))
            spec.ub_radius_factor = *v;
        if (auto v = tree.get_optional<std::string>("channel.source"))
            spec.channel_source = parse_channel_source(*v);
        if (auto v = tree.get_optional<std::string>("channel.f_matrix"))
            spec.f_matrix_path = *v;
        if (auto v = tree.get_optional<std::string>("channel.g_matrix"))
            spec.g_matrix_path = *v;
        if (auto v = detail::get_number<std::uint64_t>(tree, "channel.tap_seed"))
            spec.tap_seed = *v;
        if (auto v = detail::get_number<double>(tree, "channel.delay_spread_ns"))
            spec.delay_spread_ns = *v;
        if (auto v = detail::get_number<std::size_t>(tree, "mc.samples"))
            spec.mc.n_samples = *v;
        if (auto v = detail::get_number<std::uint64_t>(tree, "mc.seed"))
            spec.mc_seed = *v;
        if (auto v = detail::get_number<std::size_t>(tree, "mc.batch_size"))
            spec.mc.batch_size = *v;
    } catch (const pt::ptree_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return spec;
}

} // namespace dopcap
