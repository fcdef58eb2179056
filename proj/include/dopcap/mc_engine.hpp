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

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <thread>
#include <vector>

namespace dopcap {

struct MCConfig {
    std::size_t n_samples = 10000;
    std::uint64_t seed = 20240601;
    std::size_t batch_size = 256;
    unsigned workers = 1;
};

/// Monte Carlo result. `std_err` is sample-std / sqrt(n) for i.i.d. estimators
/// and 0 for closed forms or quadrature.
struct Estimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

inline Estimate exact_estimate(double value) { return Estimate{value, 0.0, 0, 0}; }

/// Sum of two independent estimates; errors add in quadrature.
inline Estimate combine_sum(const Estimate& a, const Estimate& b) {
    return Estimate{a.mean + b.mean, std::hypot(a.std_err, b.std_err),
                    std::max(a.n_samples, b.n_samples), a.seed};
}

/// Average of independent estimates.
inline Estimate combine_mean(std::span<const Estimate> parts) {
    if (parts.empty())
        return {};
    double m = 0.0;
    double v = 0.0;
    std::size_t n = 0;
    for (const auto& p : parts) {
        m += p.mean;
        v += p.std_err * p.std_err;
        n += p.n_samples;
    }
    const double k = static_cast<double>(parts.size());
    return Estimate{m / k, std::sqrt(v) / k, n, parts.front().seed};
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Key of the random stream for sample `index` under `seed`.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Per-sample generator. Its output depends only on (seed, index), which is
/// what makes parallel estimates reproducible.
class SampleRng {
  public:
    SampleRng(std::uint64_t seed, std::uint64_t index) : engine_(stream_key(seed, index)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    /// CN(0, variance): independent real normals scaled by sqrt(variance/2).
    cplx complex_normal(double variance = 1.0) {
        const double scale = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {scale * re, scale * im};
    }

    CVector complex_normal_vector(Eigen::Index n, double variance = 1.0) {
        CVector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = complex_normal(variance);
        return v;
    }

    CMatrix complex_normal_matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
        CMatrix m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                m(i, j) = complex_normal(variance);
        return m;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Pairwise summation with a topology fixed by the input length only.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double acc = 0.0;
        for (double x : v)
            acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline Estimate summarize(std::span<const double> values, std::uint64_t seed) {
    const std::size_t n = values.size();
    if (n == 0)
        throw ConfigError("Monte Carlo needs at least one sample");
    const double mean = pairwise_sum(values) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i)
        sq[i] = (values[i] - mean) * (values[i] - mean);
    const double var = n > 1 ? pairwise_sum(sq) / static_cast<double>(n - 1) : 0.0;
    return Estimate{mean, std::sqrt(var / static_cast<double>(n)), n, seed};
}

/// Evaluates `fn(index)` for index in [0, n) and stores the results. Work is
/// split into batches handed to `workers` threads; the output does not depend
/// on the split.
template <class Fn>
std::vector<double> evaluate_samples(Fn&& fn, std::size_t n, std::size_t batch_size, unsigned workers) {
    std::vector<double> values(n);
    batch_size = std::max<std::size_t>(batch_size, 1);
    const std::size_t n_batches = (n + batch_size - 1) / batch_size;
    auto run_batch = [&](std::size_t b) {
        const std::size_t lo = b * batch_size;
        const std::size_t hi = std::min(n, lo + batch_size);
        for (std::size_t i = lo; i < hi; ++i)
            values[i] = fn(i);
    };
    if (workers <= 1 || n_batches <= 1) {
        for (std::size_t b = 0; b < n_batches; ++b)
            run_batch(b);
    } else {
        const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, n_batches));
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(used);
        for (unsigned w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t b = w; b < n_batches; b += used)
                        run_batch(b);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool)
            t.join();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(values[i])) {
            std::ostringstream os;
            os << "non-finite integrand value " << values[i] << " at sample " << i;
            throw Error(os.str());
        }
    }
    return values;
}

/// E[fn(rng)] where `rng` is the stream of the current sample.
template <class Fn>
Estimate expect(Fn&& fn, const MCConfig& mc) {
    if (mc.n_samples < 1)
        throw ConfigError("MCConfig.n_samples must be >= 1");
    auto values = evaluate_samples(
        [&](std::size_t i) {
            SampleRng rng(mc.seed, i);
            return static_cast<double>(fn(rng));
        },
        mc.n_samples, mc.batch_size, mc.workers);
    return summarize(values, mc.seed);
}

/// E[f(s)] for s ~ CN(0, variance). variance == 0 evaluates f(0) once.
template <class Fn>
Estimate expect_complex_gaussian(Fn&& f, double variance, const MCConfig& mc) {
    if (variance < 0.0)
        throw ConfigError("variance must be nonnegative");
    if (variance == 0.0) {
        const double v = f(cplx{0.0, 0.0});
        if (!std::isfinite(v))
            throw Error("non-finite integrand value at s = 0");
        return Estimate{v, 0.0, 1, mc.seed};
    }
    return expect([&](SampleRng& rng) { return f(rng.complex_normal(variance)); }, mc);
}

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-t^2) (Golub-Welsch).
inline QuadratureRule gauss_hermite_rule(std::size_t n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k < n; ++k) {
        const double b = std::sqrt(static_cast<double>(k) / 2.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        rule.weights[k] = std::sqrt(pi) * v0 * v0;
    }
    return rule;
}

/// E[f(s)] for s ~ CN(0, variance) by a product Gauss-Hermite rule on
/// (Re s, Im s).
template <class Fn>
double gauss_hermite_2d(Fn&& f, double variance, std::size_t nodes) {
    if (nodes < 16)
        throw ConfigError("gauss_hermite_2d needs at least 16 nodes per axis");
    if (variance < 0.0)
        throw ConfigError("variance must be nonnegative");
    const auto rule = gauss_hermite_rule(nodes);
    const double scale = std::sqrt(variance);
    std::vector<double> terms;
    terms.reserve(nodes * nodes);
    for (std::size_t a = 0; a < nodes; ++a)
        for (std::size_t b = 0; b < nodes; ++b)
            terms.push_back(rule.weights[a] * rule.weights[b] / pi *
                            f(cplx{scale * rule.nodes[a], scale * rule.nodes[b]}));
    return pairwise_sum(terms);
}

} // namespace dopcap
