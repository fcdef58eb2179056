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

#include "dopcap/dopcap.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace dopcap;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_validation = 2;

struct ChannelArgs {
    std::size_t n = 64;
    std::uint64_t tap_seed = 1;
    std::uint64_t realization = 0;
    double delay_spread_ns = 100.0;
    std::string f_matrix;
    std::string g_matrix;
};

void add_channel_args(CLI::App* cmd, ChannelArgs& a) {
    cmd->add_option("-n,--subcarriers", a.n, "Number of subcarriers");
    cmd->add_option("--tap-seed", a.tap_seed, "Seed for the tap draw");
    cmd->add_option("--realization", a.realization, "Realization index within the tap seed");
    cmd->add_option("--delay-spread-ns", a.delay_spread_ns, "RMS delay spread");
    cmd->add_option("--f-matrix", a.f_matrix, "Load F from a text matrix file instead of drawing");
    cmd->add_option("--g-matrix", a.g_matrix, "Load G from a text matrix file instead of drawing");
}

StructuredChannel channel_from_args(const ChannelArgs& a) {
    if (!a.f_matrix.empty() || !a.g_matrix.empty()) {
        if (a.f_matrix.empty() || a.g_matrix.empty())
            throw ConfigError("--f-matrix and --g-matrix must be given together");
        return load_channel(a.f_matrix, a.g_matrix, 0.0);
    }
    SampleRng rng(a.tap_seed, a.realization);
    const auto draw = draw_ntn_channel(a.n, ntn_tdl_a(a.delay_spread_ns), rng);
    return {draw.lin.nominal, draw.lin.sensitivity, 0.0, true};
}

void print_named(std::ostream& os, const char* name, const CMatrix& m) {
    os << "# " << name << '\n';
    write_matrix(os, m);
}

struct SweepArgs {
    std::string config;
    std::string out;
    std::vector<double> snr;
    std::vector<double> sigma;
    std::vector<std::string> bounds;
    std::size_t n = 0;
    std::size_t realizations = 0;
    std::size_t samples = 0;
    std::uint64_t tap_seed = 0;
    std::uint64_t mc_seed = 0;
    unsigned workers = 0;
    std::string snr_convention;
    std::string lower_bound_q;
    std::string f_matrix;
    std::string g_matrix;
    bool full_scale = false;
    bool record_timing = false;
};

void add_sweep_args(CLI::App* cmd, SweepArgs& a) {
    cmd->add_option("-c,--config", a.config, "INI config file; flags override its keys");
    cmd->add_option("-o,--out", a.out, "Output CSV path (default: stdout)");
    cmd->add_option("--snr", a.snr, "SNR grid in dB")->delimiter(',');
    cmd->add_option("--sigma", a.sigma, "Doppler uncertainty levels")->delimiter(',');
    cmd->add_option("--bounds", a.bounds, "Bound names")->delimiter(',');
    cmd->add_option("-n,--subcarriers", a.n, "Number of subcarriers");
    cmd->add_option("--realizations", a.realizations, "Channel realizations per cell");
    cmd->add_option("--samples", a.samples, "Monte Carlo samples per estimate");
    cmd->add_option("--tap-seed", a.tap_seed, "Seed for tap draws");
    cmd->add_option("--mc-seed", a.mc_seed, "Seed for Monte Carlo streams");
    cmd->add_option("--workers", a.workers, "Worker threads (output does not depend on it)");
    cmd->add_option("--snr-convention", a.snr_convention, "total or per-subcarrier")
        ->check(CLI::IsMember({"total", "per-subcarrier"}));
    cmd->add_option("--lower-bound-q", a.lower_bound_q, "Q for Gaussian lower bounds: isotropic or logdet_opt");
    cmd->add_option("--f-matrix", a.f_matrix, "Synthetic channel: F matrix file");
    cmd->add_option("--g-matrix", a.g_matrix, "Synthetic channel: G matrix file");
    cmd->add_flag("--full-scale", a.full_scale, "Use N = 1024 (long running)");
    cmd->add_flag("--record-timing", a.record_timing, "Fill wall_ms (breaks byte reproducibility)");
}

SweepSpec spec_from_args(const SweepArgs& a, SweepSpec spec) {
    if (!a.config.empty()) {
        std::ifstream is(a.config);
        if (!is)
            throw ConfigError("cannot open config " + a.config);
        spec = load_sweep_config(is, spec);
    }
    if (!a.snr.empty())
        spec.snr_grid_db = a.snr;
    if (!a.sigma.empty())
        spec.sigma_list = a.sigma;
    if (!a.bounds.empty())
        spec.bounds = a.bounds;
    if (a.n)
        spec.n_subcarriers = a.n;
    if (a.realizations)
        spec.n_channel_realizations = a.realizations;
    if (a.samples)
        spec.mc.n_samples = a.samples;
    if (a.tap_seed)
        spec.tap_seed = a.tap_seed;
    if (a.mc_seed)
        spec.mc_seed = a.mc_seed;
    if (a.workers)
        spec.workers = a.workers;
    if (!a.snr_convention.empty())
        spec.snr_convention = parse_snr_convention(a.snr_convention);
    if (!a.lower_bound_q.empty())
        spec.lower_bound_q = parse_lower_bound_q(a.lower_bound_q);
    if (!a.f_matrix.empty() || !a.g_matrix.empty()) {
        spec.channel_source = ChannelSource::synthetic_file;
        spec.f_matrix_path = a.f_matrix;
        spec.g_matrix_path = a.g_matrix;
    }
    if (a.full_scale) {
        spec.n_subcarriers = 1024;
        std::cerr << "warning: --full-scale uses N = 1024; expect hours of runtime per sweep\n";
    }
    spec.record_timing = a.record_timing;
    return spec;
}

void emit_sweep(const SweepSpec& spec, const std::string& out) {
    const auto rows = run_sweep(spec);
    if (out.empty()) {
        write_csv(std::cout, rows);
        return;
    }
    std::ofstream os(out, std::ios::binary);
    if (!os)
        throw ConfigError("cannot write " + out);
    write_csv(os, rows);
    std::ofstream meta(out + ".meta", std::ios::binary);
    write_metadata(meta, spec);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity bounds for Doppler-impaired OFDM channels"};
    app.require_subcommand(1);

    auto* channel = app.add_subcommand("channel", "Channel construction");
    channel->require_subcommand(1);
    auto* build = channel->add_subcommand("build", "Dump F, G and H(f_d) as text matrices");
    ChannelArgs build_args;
    double f_d = 0.0;
    std::string out_dir = ".";
    add_channel_args(build, build_args);
    build->add_option("--fd", f_d, "Normalized Doppler for the H(f_d) dump");
    build->add_option("--out-dir", out_dir, "Directory for F.txt, G.txt, H.txt");

    auto* bounds = app.add_subcommand("bounds", "Capacity bounds");
    bounds->require_subcommand(1);
    auto* sweep = bounds->add_subcommand("sweep", "Run a bound sweep and write CSV");
    SweepArgs sweep_args;
    add_sweep_args(sweep, sweep_args);

    auto* precoder = app.add_subcommand("precoder", "Alignment precoder");
    precoder->require_subcommand(1);
    auto* inspect = precoder->add_subcommand("inspect", "Print V, U, U_perp and residuals");
    ChannelArgs inspect_args;
    add_channel_args(inspect, inspect_args);

    auto* validate_cmd = app.add_subcommand("validate", "Run the self-check suite");
    ValidationOptions vopts;
    validate_cmd->add_option("--seed", vopts.seed, "Seed for randomized checks");
    validate_cmd->add_flag("--inject-transposed-g", vopts.inject_transposed_g, "Negative control");

    auto* figure = app.add_subcommand("figure", "Write the two-panel figure CSV (sigma 0.1 and 0.01)");
    SweepArgs figure_args;
    add_sweep_args(figure, figure_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*build) {
            ChannelArgs a = build_args;
            if (!a.f_matrix.empty() || !a.g_matrix.empty())
                throw ConfigError("channel build draws taps; matrix inputs are not accepted");
            SampleRng rng(a.tap_seed, a.realization);
            const auto draw = draw_ntn_channel(a.n, ntn_tdl_a(a.delay_spread_ns), rng);
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir(out_dir);
            save_matrix((dir / "F.txt").string(), draw.lin.nominal);
            save_matrix((dir / "G.txt").string(), draw.lin.sensitivity);
            save_matrix((dir / "H.txt").string(), full_channel(draw.config, draw.taps, f_d));
            std::cout << "wrote F.txt G.txt H.txt to " << out_dir << " (N=" << a.n << ", taps L=" << draw.config.n_taps
                      << ")\n";
        } else if (*sweep) {
            emit_sweep(spec_from_args(sweep_args, SweepSpec{}), sweep_args.out);
        } else if (*figure) {
            SweepSpec base;
            base.sigma_list = {0.1, 0.01};
            base.snr_grid_db = {0, 10, 20, 30, 40};
            base.bounds = {"gaussian_optimal", "gaussian_linear", "sa_pilot", "ub_logdet", "ub_dof"};
            emit_sweep(spec_from_args(figure_args, base), figure_args.out);
        } else if (*inspect) {
            const auto ch = channel_from_args(inspect_args);
            const auto pre = build_precoder(ch.F, ch.G);
            std::cout << std::setprecision(10);
            std::cout << "construction=" << pre.construction << '\n';
            std::cout << "t_star=" << pre.t_star.real() << (pre.t_star.imag() < 0 ? "" : "+") << pre.t_star.imag()
                      << "j\n";
            std::cout << "d_perp=" << pre.d_perp << '\n';
            std::cout << "rank_residual=" << pre.rank_residual << '\n';
            std::cout << "unitarity_residual=" << pre.unitarity_residual << '\n';
            std::cout << "alignment_residual_s1="
                      << (pre.U_perp.adjoint() * (ch.F + ch.G) * pre.V).norm() / (ch.F.norm() + ch.G.norm()) << '\n';
            print_named(std::cout, "V", pre.V);
            print_named(std::cout, "U", pre.U);
            print_named(std::cout, "U_perp", pre.U_perp);
        } else if (*validate_cmd) {
            const auto report = validate(vopts);
            print_report(std::cout, report);
            return report.all_passed() ? exit_ok : exit_validation;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}
