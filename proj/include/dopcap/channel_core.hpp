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

namespace dopcap {

/// H = F + s G with s ~ CN(0, sigma2), F and G known at both ends.
struct StructuredChannel {
    CMatrix F;
    CMatrix G;
    double sigma2 = 0.0;
    /// Set when F is known to be diagonal (the OFDM front end); enables fast paths.
    bool nominal_diagonal = false;

    Eigen::Index dim() const { return F.rows(); }

    void validate() const {
        require_square(F, "F");
        require_square(G, "G");
        require_dim(G.rows(), F.rows(), "G");
        if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
            throw ConfigError("StructuredChannel: sigma2 must be a finite nonnegative number");
    }

    StructuredChannel with_sigma2(double s2) const {
        StructuredChannel c = *this;
        c.sigma2 = s2;
        return c;
    }
};

struct InputCovariance {
    CMatrix Q;

    double power() const { return linalg::real_trace(Q); }
    Eigen::Index dim() const { return Q.rows(); }

    static InputCovariance isotropic(Eigen::Index n, double total_power) {
        return InputCovariance{CMatrix::Identity(n, n) * (total_power / static_cast<double>(n))};
    }

    static InputCovariance zero(Eigen::Index n) { return InputCovariance{CMatrix::Zero(n, n)}; }

    /// Hermitian, PSD and within the power budget, all up to `tol`.
    bool is_valid(double power_cap, double tol = 1e-9) const {
        if (Q.rows() != Q.cols())
            return false;
        const double scale = std::max(1.0, Q.norm());
        if ((Q - Q.adjoint()).norm() > tol * scale)
            return false;
        if (Q.rows() > 0 && linalg::lambda_min(Q) < -tol * scale)
            return false;
        return power() <= power_cap + tol * std::max(1.0, power_cap);
    }
};

struct ChannelSample {
    cplx s;
    CVector y;
    CVector x;
};

/// Sigma_{y|x} = I + sigma2 (Gx)(Gx)^H.
inline CMatrix cond_output_cov(const StructuredChannel& ch, const CVector& x) {
    ch.validate();
    require_dim(x.size(), ch.dim(), "x");
    const CVector gx = ch.G * x;
    return CMatrix::Identity(ch.dim(), ch.dim()) + ch.sigma2 * gx * gx.adjoint();
}

/// h(y | x) in nats for a fixed input x.
inline double h_y_given_x(const StructuredChannel& ch, const CVector& x) {
    ch.validate();
    require_dim(x.size(), ch.dim(), "x");
    const double n = static_cast<double>(ch.dim());
    return n * std::log(pi * std::numbers::e) + std::log1p(ch.sigma2 * (ch.G * x).squaredNorm());
}

inline void require_input(const StructuredChannel& ch, const InputCovariance& q) {
    require_square(q.Q, "Q");
    require_dim(q.Q.rows(), ch.dim(), "Q");
}

/// Sigma_{y|s} = I + (F + sG) Q (F + sG)^H.
inline CMatrix cond_cov_given_s(const StructuredChannel& ch, const InputCovariance& q, cplx s) {
    ch.validate();
    require_input(ch, q);
    const CMatrix H = ch.F + s * ch.G;
    return CMatrix::Identity(ch.dim(), ch.dim()) + H * q.Q * H.adjoint();
}

/// Sigma_y = I + F Q F^H + sigma2 G Q G^H.
inline CMatrix output_cov(const StructuredChannel& ch, const InputCovariance& q) {
    ch.validate();
    require_input(ch, q);
    return CMatrix::Identity(ch.dim(), ch.dim()) + ch.F * q.Q * ch.F.adjoint() +
           ch.sigma2 * ch.G * q.Q * ch.G.adjoint();
}

/// One channel use. With `noiseless` the additive noise is omitted.
inline ChannelSample sample_output(const StructuredChannel& ch, const CVector& x, SampleRng& rng,
                                   bool noiseless = false) {
    ch.validate();
    require_dim(x.size(), ch.dim(), "x");
    ChannelSample out;
    out.x = x;
    out.s = ch.sigma2 > 0.0 ? rng.complex_normal(ch.sigma2) : cplx{0.0, 0.0};
    out.y = (ch.F + out.s * ch.G) * x;
    if (!noiseless)
        out.y += rng.complex_normal_vector(ch.dim(), 1.0);
    return out;
}

/// Quadratic expansion of s -> I + (F + sG) Q (F + sG)^H, precomputed so each
/// evaluation costs O(N^2) plus the log det.
class ConditionalCovariance {
  public:
    ConditionalCovariance(const StructuredChannel& ch, const InputCovariance& q) {
        ch.validate();
        require_input(ch, q);
        const CMatrix L = linalg::psd_factor(q.Q);
        const CMatrix A = ch.F * L;
        const CMatrix B = ch.G * L;
        base_ = CMatrix::Identity(ch.dim(), ch.dim()) + A * A.adjoint();
        cross_ = B * A.adjoint();
        quad_ = B * B.adjoint();
    }

    CMatrix at(cplx s) const {
        CMatrix m = base_;
        m.noalias() += s * cross_;
        m.noalias() += std::conj(s) * cross_.adjoint();
        m.noalias() += std::norm(s) * quad_;
        return m;
    }

    double logdet_at(cplx s) const { return linalg::logdet_hpd(at(s)); }

  private:
    CMatrix base_;
    CMatrix cross_;
    CMatrix quad_;
};

/// F, G with i.i.d. CN(0, 1) entries; generic (full rank, distinct pencil roots) with probability one.
inline StructuredChannel random_channel(Eigen::Index n, double sigma2, SampleRng& rng) {
    StructuredChannel ch;
    ch.F = rng.complex_normal_matrix(n, n);
    ch.G = rng.complex_normal_matrix(n, n);
    ch.sigma2 = sigma2;
    return ch;
}

} // namespace dopcap
