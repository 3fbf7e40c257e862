// SPDX-License-Identifier: Apache-2.0
//
// cfisac — Cell-Free massive MIMO ISAC simulator and transmit-design toolkit
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

#pragma once

#include <vector>

#include "cfisac/channel.hpp"
#include "cfisac/pairing.hpp"

namespace cfisac {

/// Sampled directions spanning [-pi/2, pi/2] with cached steering vectors.
struct DirectionGrid {
    Vec thetas;                        ///< N angles, strictly increasing
    std::vector<CVec> steering_cache;  ///< N vectors of length n_t
    CMat projector;                    ///< N x n_t, row n = a(theta_n)^H

    int size() const { return static_cast<int>(thetas.size()); }
    int antennas() const { return static_cast<int>(projector.cols()); }

    static DirectionGrid build(int n_dirs, int n_t, double ratio) {
        if (n_dirs < 2) throw std::invalid_argument("DirectionGrid: need at least 2 directions");
        DirectionGrid g;
        g.thetas = Vec::LinSpaced(n_dirs, -kPi / 2, kPi / 2);
        g.steering_cache.reserve(n_dirs);
        g.projector.resize(n_dirs, n_t);
        for (int n = 0; n < n_dirs; ++n) {
            g.steering_cache.push_back(steering(g.thetas(n), n_t, ratio));
            g.projector.row(n) = g.steering_cache.back().adjoint();
        }
        return g;
    }
};

/// Joint transmit design: per-(AP, user) beamformers, per-sensing-AP
/// covariances and beampattern scaling factors (aligned with M_T order).
struct Beamformer {
    int M = 0, K = 0, N_T = 0;
    std::vector<CVec> w;  ///< M*K
    std::vector<CMat> Z;  ///< one per sensing AP, in M_T order
    Vec eta;              ///< one per sensing AP, in M_T order

    const CVec& at(int m, int k) const { return w[m * K + k]; }
    CVec& at(int m, int k) { return w[m * K + k]; }

    double comm_power(int m) const {
        double p = 0.0;
        for (int k = 0; k < K; ++k) p += w[m * K + k].squaredNorm();
        return p;
    }

    static Beamformer zero(int M, int K, int N_T, int num_sensing) {
        Beamformer bf;
        bf.M = M;
        bf.K = K;
        bf.N_T = N_T;
        bf.w.assign(M * K, CVec::Zero(N_T));
        bf.Z.assign(num_sensing, CMat::Zero(N_T, N_T));
        bf.eta = Vec::Zero(num_sensing);
        return bf;
    }
};

/// Power/PSD violations of the transmit model; empty means valid.
inline std::vector<std::string> beamformer_violations(const Beamformer& bf,
                                                      const SensingAssignment& assignment) {
    std::vector<std::string> v;
    for (int m : assignment.M_I)
        if (bf.comm_power(m) > 1.0 + 1e-8)
            v.push_back("communication AP " + std::to_string(m) + " exceeds unit power");
    for (size_t i = 0; i < assignment.M_T.size(); ++i) {
        const int m = assignment.M_T[i];
        const CMat& z = bf.Z[i];
        const double total = bf.comm_power(m) + z.trace().real();
        if (std::abs(total - 1.0) > 1e-6)
            v.push_back("sensing AP " + std::to_string(m) + " violates the power equality");
        if ((z - z.adjoint()).norm() > 1e-9 * std::max(1.0, z.norm()))
            v.push_back("Z of sensing AP " + std::to_string(m) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(z));
        if (eig.eigenvalues().minCoeff() < -1e-9)
            v.push_back("Z of sensing AP " + std::to_string(m) + " is not PSD");
    }
    return v;
}

/// Coherent downlink signal amplitude sum_m sqrt(p_m) h_hat_mk^H w_mk.
inline cdouble signal_amplitude(int k, const Beamformer& bf, const std::vector<CVec>& h_hat,
                                const Vec& p_linear) {
    cdouble f = 0.0;
    for (int m = 0; m < bf.M; ++m)
        f += std::sqrt(p_linear(m)) * h_hat[m * bf.K + k].dot(bf.at(m, k));
    return f;
}

/// Amplitude of user k2's data stream as received through user k's channel
/// estimate (the coherent inter-user interference path).
inline cdouble signal_amplitude_for(int k, int k2, const Beamformer& bf,
                                    const std::vector<CVec>& h_hat, const Vec& p_linear) {
    cdouble f = 0.0;
    for (int m = 0; m < bf.M; ++m)
        f += std::sqrt(p_linear(m)) * h_hat[m * bf.K + k].dot(bf.at(m, k2));
    return f;
}

/// Interference-plus-noise power at user k: estimation-error self and cross
/// terms, coherent and error inter-user terms, sensing leakage, and AWGN.
inline double interference_power(int k, const Beamformer& bf, const SensingAssignment& assignment,
                                 const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                                 const Vec& p_linear) {
    const int M = bf.M, K = bf.K;
    cdouble acc = 0.0;
    for (int k2 = 0; k2 < K; ++k2) {
        for (int m = 0; m < M; ++m) {
            const CVec& wm = bf.at(m, k2);
            acc += p_linear(m) * wm.dot(stats.theta(m, k) * wm);
            for (int m2 = 0; m2 < M; ++m2) {
                if (m2 == m) continue;
                acc += std::sqrt(p_linear(m) * p_linear(m2)) *
                       wm.dot(stats.theta_pair(m, m2, k) * bf.at(m2, k2));
            }
        }
        if (k2 != k) acc += std::norm(signal_amplitude_for(k, k2, bf, h_hat, p_linear));
    }
    for (size_t i = 0; i < assignment.M_T.size(); ++i) {
        const int m = assignment.M_T[i];
        const CMat& z = bf.Z[i];
        if ((z - z.adjoint()).norm() > 1e-9 * std::max(1.0, z.norm()))
            throw std::invalid_argument("interference_power: non-Hermitian sensing covariance");
        const CVec& hat = h_hat[m * K + k];
        acc += p_linear(m) * (hat.dot(z * hat) + (stats.theta(m, k) * z).trace());
    }
    acc += 1.0;
    if (std::abs(acc.imag()) > 1e-8 * std::max(1.0, std::abs(acc.real())))
        throw std::logic_error("interference_power: non-real accumulation");
    return acc.real();
}

/// Ergodic-rate lower bound of user k in bits/s/Hz.
inline double rate_lower_bound(int k, const Beamformer& bf, const SensingAssignment& assignment,
                               const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                               const Vec& p_linear) {
    const double sig = std::norm(signal_amplitude(k, bf, h_hat, p_linear));
    const double denom = interference_power(k, bf, assignment, stats, h_hat, p_linear);
    return std::log2(1.0 + sig / denom);
}

inline double sum_rate(const Beamformer& bf, const SensingAssignment& assignment,
                       const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                       const Vec& p_linear) {
    double r = 0.0;
    for (int k = 0; k < bf.K; ++k)
        r += rate_lower_bound(k, bf, assignment, stats, h_hat, p_linear);
    return r;
}

/// Transmit beampattern of AP m over the grid:
/// P(theta_n) = p_m sum_k |a_n^H w_mk|^2 + p_m a_n^H Z a_n.
inline Vec beampattern(int m, const Beamformer& bf, const SensingAssignment& assignment,
                       const DirectionGrid& grid, const Vec& p_linear) {
    const int t = assignment.target_of(m);
    if (t < 0) throw std::invalid_argument("beampattern: AP has no sensing task");
    int zi = 0;
    while (assignment.M_T[zi] != m) ++zi;
    const int N = grid.size();
    Vec p(N);
    for (int n = 0; n < N; ++n) {
        const CVec& a = grid.steering_cache[n];
        double val = std::real(a.dot(bf.Z[zi] * a));
        for (int k = 0; k < bf.K; ++k) val += std::norm(a.dot(bf.at(m, k)));
        p(n) = p_linear(m) * val;
    }
    return p;
}

/// Rectangular ideal beampattern centered on one direction.
inline Vec ideal_beampattern(double center, const DirectionGrid& grid, double delta_theta) {
    const int N = grid.size();
    Vec p = Vec::Zero(N);
    for (int n = 0; n < N; ++n)
        if (std::abs(grid.thetas(n) - center) <= delta_theta / 2.0 + 1e-12) p(n) = 1.0;
    return p;
}

/// Union of per-target windows (cellular baseline with several mainlobes).
inline Vec ideal_beampattern_union(const std::vector<double>& centers, const DirectionGrid& grid,
                                   double delta_theta) {
    Vec p = Vec::Zero(grid.size());
    for (double c : centers) p = p.cwiseMax(ideal_beampattern(c, grid, delta_theta));
    return p;
}

/// Beampattern matching MSE between eta-scaled ideal and generated patterns.
inline double pattern_mse(const Vec& ideal, const Vec& generated, double eta) {
    return (eta * ideal - generated).squaredNorm() / static_cast<double>(ideal.size());
}

/// Least-squares optimal scaling factor for a given generated pattern.
inline double eta_least_squares(const Vec& ideal, const Vec& generated) {
    const double denom = ideal.squaredNorm();
    if (denom <= 0.0) return 0.0;
    return std::max(ideal.dot(generated) / denom, 0.0);
}

/// Matching MSE of sensing AP m with its assigned target's ideal window.
inline double beampattern_mse(int m, double eta_m, const Beamformer& bf,
                              const SensingAssignment& assignment, const NetworkLayout& layout,
                              const DirectionGrid& grid, double delta_theta, const Vec& p_linear) {
    if (eta_m < 0.0) throw std::invalid_argument("beampattern_mse: eta must be >= 0");
    const int t = assignment.target_of(m);
    if (t < 0) throw std::invalid_argument("beampattern_mse: AP has no sensing task");
    const double center = doa_to_grid_angle(doa(layout.ap_xy[m], layout.target_xy_prior[t]));
    const Vec ideal = ideal_beampattern(center, grid, delta_theta);
    const Vec gen = beampattern(m, bf, assignment, grid, p_linear);
    return pattern_mse(ideal, gen, eta_m);
}

/// Average of per-AP matching MSE normalized by eta^2.
inline double normalized_mse(const SensingAssignment& assignment, const Beamformer& bf,
                             const NetworkLayout& layout, const DirectionGrid& grid,
                             double delta_theta, const Vec& p_linear) {
    if (assignment.M_T.empty())
        throw std::invalid_argument("normalized_mse: no sensing APs");
    const double mt = static_cast<double>(assignment.M_T.size());
    double acc = 0.0;
    for (size_t i = 0; i < assignment.M_T.size(); ++i) {
        const double eta = bf.eta(static_cast<Eigen::Index>(i));
        if (eta == 0.0) throw std::domain_error("normalized_mse: eta must be nonzero");
        acc += beampattern_mse(assignment.M_T[i], eta, bf, assignment, layout, grid, delta_theta,
                               p_linear) /
               (mt * eta * eta);
    }
    return acc;
}

/// Downlink payload: symbols available after training times the sum rate.
inline double transmit_data_volume(double sum_rate_bits, int tau_c, int tau_p) {
    if (tau_p > tau_c) throw std::invalid_argument("transmit_data_volume: tau_p > tau_c");
    return static_cast<double>(tau_c - tau_p) * sum_rate_bits;
}

}  // namespace cfisac
