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

#include "cfisac/common.hpp"
#include "cfisac/pilot.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

/// Closed-form second-order statistics of the aggregated channels, the
/// LMMSE gains, and the estimation errors.  Cross arrays are indexed by
/// ordered AP pairs; the diagonal slots hold the auto matrices, which is
/// consistent with the defining expectations.
struct ChannelStatistics {
    int M = 0, K = 0, N_T = 0;
    double pp_taup = 0.0;  ///< p_p * tau_p, linear

    std::vector<CMat> phi_auto;     ///< M*K, auto-correlation of h_mk
    std::vector<CMat> phi_cross;    ///< M*M*K, cross-correlation over AP pairs
    std::vector<CMat> c_gain;       ///< M*K, LMMSE gain
    std::vector<CMat> theta_auto;   ///< M*K, error auto-correlation
    std::vector<CMat> theta_cross;  ///< M*M*K, error cross-correlation

    const CMat& phi(int m, int k) const { return phi_auto[m * K + k]; }
    const CMat& phi_pair(int m, int m2, int k) const {
        return phi_cross[(m * M + m2) * K + k];
    }
    const CMat& gain(int m, int k) const { return c_gain[m * K + k]; }
    const CMat& theta(int m, int k) const { return theta_auto[m * K + k]; }
    const CMat& theta_pair(int m, int m2, int k) const {
        return theta_cross[(m * M + m2) * K + k];
    }

    /// E{h_hat h_hat^H} in closed form.
    CMat estimate_covariance(int m, int k) const {
        return std::sqrt(pp_taup) * gain(m, k) * phi(m, k);
    }
};

/// One realization of the true channels and (after estimation) the LMMSE
/// estimates and errors.
struct ChannelInstance {
    int M = 0, K = 0, T = 0, N_T = 0;
    std::vector<CVec> h_direct;  ///< M*K, direct AP-user links
    std::vector<CVec> h_TA;      ///< M*T, target-AP links
    std::vector<cdouble> h_UT;   ///< K*T, user-target scalar links
    std::vector<CVec> h_agg;     ///< M*K, aggregated channels
    std::vector<CVec> h_hat;     ///< M*K, LMMSE estimates (empty until estimated)
    std::vector<CVec> e;         ///< M*K, estimation errors (empty until estimated)

    const CVec& agg(int m, int k) const { return h_agg[m * K + k]; }
    const CVec& hat(int m, int k) const { return h_hat[m * K + k]; }
    const CVec& err(int m, int k) const { return e[m * K + k]; }
};

namespace detail {

/// Gaussian amplitude truncated at zero by resampling; the model's
/// variances are tiny, so truncation is a safety net for stressed configs.
inline double truncated_gaussian_amplitude(Rng& rng, double mean, double variance) {
    if (variance <= 0.0) return std::max(mean, 0.0);
    const double std_dev = std::sqrt(variance);
    for (int i = 0; i < 1000; ++i) {
        const double v = mean + std_dev * rng.gaussian();
        if (v >= 0.0) return v;
    }
    return 0.0;  // mean heavily negative; amplitude pinned at zero
}

}  // namespace detail

/// Draw one realization of all true channels (aggregates included).
inline ChannelInstance draw_channels(const NetworkLayout& layout, const SystemConfig& config,
                                     Rng& rng) {
    ChannelInstance inst;
    inst.M = config.M;
    inst.K = config.K;
    inst.T = config.T;
    inst.N_T = config.N_T;
    const int M = config.M, K = config.K, T = config.T, N = config.N_T;

    inst.h_direct.resize(M * K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const double beta = path_loss((layout.iu_xy[k] - layout.ap_xy[m]).norm());
            inst.h_direct[m * K + k] = beta * rng.cn_vector(N);
        }
    }

    inst.h_TA.resize(M * T);
    const double chi = std::sqrt(config.chi2());
    for (int m = 0; m < M; ++m) {
        for (int t = 0; t < T; ++t) {
            const double dbar = (layout.target_xy_prior[t] - layout.ap_xy[m]).norm();
            const double amp =
                detail::truncated_gaussian_amplitude(rng, path_loss(dbar), config.sigma2_TA());
            const CVec qbar = steering(doa(layout.ap_xy[m], layout.target_xy_prior[t]), N,
                                       config.antenna_ratio);
            inst.h_TA[m * T + t] = amp * (qbar + chi * rng.cn_vector(N));
        }
    }

    inst.h_UT.resize(K * T);
    for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
            const double dbar = (layout.iu_xy[k] - layout.target_xy_prior[t]).norm();
            const double amp =
                detail::truncated_gaussian_amplitude(rng, path_loss(dbar), config.sigma2_UT());
            inst.h_UT[k * T + t] = amp * rng.cgaussian();
        }
    }

    inst.h_agg.resize(M * K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            CVec h = inst.h_direct[m * K + k];
            for (int t = 0; t < T; ++t)
                h += config.alpha[t] * inst.h_UT[k * T + t] * inst.h_TA[m * T + t];
            inst.h_agg[m * K + k] = std::move(h);
        }
    }
    return inst;
}

/// Closed-form statistics for a layout and pilot plan.
inline ChannelStatistics compute_statistics(const NetworkLayout& layout,
                                            const SystemConfig& config, const PilotPlan& plan) {
    ChannelStatistics s;
    const int M = config.M, K = config.K, T = config.T, N = config.N_T;
    s.M = M;
    s.K = K;
    s.N_T = N;
    s.pp_taup = config.p_p() * static_cast<double>(config.tau_p);

    // Per-pair propagation constants measured to the prior target positions.
    Mat beta_TA(M, T);
    std::vector<CVec> qbar(M * T);
    for (int m = 0; m < M; ++m) {
        for (int t = 0; t < T; ++t) {
            beta_TA(m, t) = path_loss((layout.target_xy_prior[t] - layout.ap_xy[m]).norm());
            qbar[m * T + t] = steering(doa(layout.ap_xy[m], layout.target_xy_prior[t]), N,
                                       config.antenna_ratio);
        }
    }
    Mat beta_UT(K, T);
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t)
            beta_UT(k, t) = path_loss((layout.iu_xy[k] - layout.target_xy_prior[t]).norm());

    const CMat eye = CMat::Identity(N, N);
    const double chi2 = config.chi2();
    const double s2_TA = config.sigma2_TA();
    const double s2_UT = config.sigma2_UT();

    s.phi_auto.resize(M * K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const double beta_UA = path_loss((layout.iu_xy[k] - layout.ap_xy[m]).norm());
            CMat phi = beta_UA * beta_UA * eye;
            for (int t = 0; t < T; ++t) {
                const double a2 = config.alpha[t] * config.alpha[t];
                const double cu = beta_UT(k, t) * beta_UT(k, t) + s2_UT;
                const double ca = beta_TA(m, t) * beta_TA(m, t) + s2_TA;
                const CVec& q = qbar[m * T + t];
                phi += a2 * cu * ca * (q * q.adjoint() + chi2 * eye);
            }
            s.phi_auto[m * K + k] = std::move(phi);
        }
    }

    s.phi_cross.assign(M * M * K, CMat());
    for (int m = 0; m < M; ++m) {
        for (int m2 = 0; m2 < M; ++m2) {
            for (int k = 0; k < K; ++k) {
                if (m2 == m) {
                    s.phi_cross[(m * M + m2) * K + k] = s.phi_auto[m * K + k];
                    continue;
                }
                if (m2 < m) {
                    s.phi_cross[(m * M + m2) * K + k] =
                        s.phi_cross[(m2 * M + m) * K + k].adjoint();
                    continue;
                }
                CMat phi = CMat::Zero(N, N);
                for (int t = 0; t < T; ++t) {
                    const double a2 = config.alpha[t] * config.alpha[t];
                    const double cu = beta_UT(k, t) * beta_UT(k, t) + s2_UT;
                    phi += a2 * cu * beta_TA(m, t) * beta_TA(m2, t) * qbar[m * T + t] *
                           qbar[m2 * T + t].adjoint();
                }
                s.phi_cross[(m * M + m2) * K + k] = std::move(phi);
            }
        }
    }

    // LMMSE gains via a Hermitian solve per (AP, pilot cluster).
    const double pt = s.pp_taup;
    const double sqrt_pt = std::sqrt(pt);
    s.c_gain.resize(M * K);
    std::vector<std::vector<int>> clusters(plan.tau_p());
    for (int k = 0; k < K; ++k) clusters[plan.cluster_of[k]].push_back(k);
    for (int m = 0; m < M; ++m) {
        for (const auto& members : clusters) {
            if (members.empty()) continue;
            CMat sum = eye;
            for (int k2 : members) sum += pt * s.phi_auto[m * K + k2];
            Eigen::LLT<CMat> llt(sum);
            for (int k : members)
                s.c_gain[m * K + k] = sqrt_pt * llt.solve(s.phi_auto[m * K + k]).adjoint();
        }
    }

    s.theta_auto.resize(M * K);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k)
            s.theta_auto[m * K + k] = hermitian_part(
                s.phi_auto[m * K + k] - sqrt_pt * s.c_gain[m * K + k] * s.phi_auto[m * K + k]);

    s.theta_cross.assign(M * M * K, CMat());
    for (int m = 0; m < M; ++m) {
        for (int m2 = 0; m2 < M; ++m2) {
            for (int k = 0; k < K; ++k) {
                if (m2 == m) {
                    s.theta_cross[(m * M + m2) * K + k] = s.theta_auto[m * K + k];
                    continue;
                }
                if (m2 < m) {
                    s.theta_cross[(m * M + m2) * K + k] =
                        s.theta_cross[(m2 * M + m) * K + k].adjoint();
                    continue;
                }
                const CMat& phi_mm2 = s.phi_cross[(m * M + m2) * K + k];
                CMat contaminated = CMat::Zero(N, N);
                for (int k2 : clusters[plan.cluster_of[k]])
                    contaminated += s.phi_cross[(m * M + m2) * K + k2];
                s.theta_cross[(m * M + m2) * K + k] =
                    phi_mm2 - sqrt_pt * phi_mm2 * s.c_gain[m2 * K + k].adjoint() -
                    sqrt_pt * s.c_gain[m * K + k] * phi_mm2 +
                    pt * s.c_gain[m * K + k] * contaminated * s.c_gain[m2 * K + k].adjoint();
            }
        }
    }
    return s;
}

/// Deviation metrics between a batch of instances and closed-form
/// statistics.  Cross-AP deviations are normalized by the geometric mean of
/// the corresponding auto-correlation norms; everything else by the norm of
/// its own closed form.
struct ConsistencyReport {
    int samples = 0;
    double max_rel_phi = 0.0;          ///< E{h h^H} vs Phi
    double max_rel_estimate_cov = 0.0; ///< E{h_hat h_hat^H} vs sqrt(pt) C Phi
    double max_rel_theta = 0.0;        ///< E{e e^H} vs Theta
    double max_rel_theta_cross = 0.0;  ///< E{e e'^H} vs Theta_mm'k, m != m'
    double max_rel_theta_cross_strict = 0.0;  ///< same, but vs its own norm
    double max_orthogonality = 0.0;    ///< ||E{e h_hat^H}|| / ||Theta||
    double max_orthogonality_scaled = 0.0;  ///< vs sqrt(||Theta|| ||E{h_hat h_hat^H}||)
    double max_user_cross = 0.0;  ///< ||E{h_mk h_mk'^H}|| / sqrt(||Phi_mk|| ||Phi_mk'||)
    bool degenerate_rank_le_1 = false;
};

/// Streaming accumulator so large batches never need to be materialized.
class ConsistencyAccumulator {
public:
    explicit ConsistencyAccumulator(const ChannelStatistics& stats)
        : stats_(stats), M_(stats.M), K_(stats.K), N_(stats.N_T) {
        hh_.assign(M_ * K_, CMat::Zero(N_, N_));
        hathat_.assign(M_ * K_, CMat::Zero(N_, N_));
        ee_.assign(M_ * K_, CMat::Zero(N_, N_));
        ehat_.assign(M_ * K_, CMat::Zero(N_, N_));
        ee_cross_.assign(M_ * M_ * K_, CMat::Zero(N_, N_));
        hh_user_.assign(M_ * K_ * K_, CMat::Zero(N_, N_));
        h_mean_.assign(M_ * K_, CVec::Zero(N_));
    }

    void add(const ChannelInstance& inst) {
        if (inst.h_hat.empty()) throw std::invalid_argument("consistency: instance not estimated");
        ++n_;
        for (int m = 0; m < M_; ++m) {
            for (int k = 0; k < K_; ++k) {
                const CVec& h = inst.agg(m, k);
                const CVec& hat = inst.hat(m, k);
                const CVec& err = inst.err(m, k);
                hh_[m * K_ + k] += h * h.adjoint();
                hathat_[m * K_ + k] += hat * hat.adjoint();
                ee_[m * K_ + k] += err * err.adjoint();
                ehat_[m * K_ + k] += err * hat.adjoint();
                h_mean_[m * K_ + k] += h;
                for (int m2 = m + 1; m2 < M_; ++m2)
                    ee_cross_[(m * M_ + m2) * K_ + k] += err * inst.err(m2, k).adjoint();
                for (int k2 = k + 1; k2 < K_; ++k2)
                    hh_user_[(m * K_ + k) * K_ + k2] += h * inst.agg(m, k2).adjoint();
            }
        }
    }

    ConsistencyReport finalize() const {
        if (n_ == 0) throw std::invalid_argument("consistency: empty batch");
        ConsistencyReport r;
        r.samples = static_cast<int>(n_);
        const double inv = 1.0 / static_cast<double>(n_);
        double max_rank2_level = 0.0;
        for (int m = 0; m < M_; ++m) {
            for (int k = 0; k < K_; ++k) {
                const int i = m * K_ + k;
                const double phi_norm = stats_.phi(m, k).norm();
                const double theta_norm = stats_.theta(m, k).norm();
                r.max_rel_phi = std::max(r.max_rel_phi,
                                         rel_frobenius(inv * hh_[i], stats_.phi(m, k), phi_norm));
                const CMat hatcov = stats_.estimate_covariance(m, k);
                r.max_rel_estimate_cov = std::max(
                    r.max_rel_estimate_cov,
                    rel_frobenius(inv * hathat_[i], hatcov, std::max(hatcov.norm(), 1e-300)));
                r.max_rel_theta = std::max(
                    r.max_rel_theta, rel_frobenius(inv * ee_[i], stats_.theta(m, k), theta_norm));
                r.max_orthogonality =
                    std::max(r.max_orthogonality, (inv * ehat_[i]).norm() / theta_norm);
                r.max_orthogonality_scaled =
                    std::max(r.max_orthogonality_scaled,
                             (inv * ehat_[i]).norm() / std::sqrt(theta_norm * hatcov.norm()));
                for (int m2 = m + 1; m2 < M_; ++m2) {
                    const CMat& closed = stats_.theta_pair(m, m2, k);
                    const double scale =
                        std::sqrt(theta_norm * stats_.theta(m2, k).norm());
                    const CMat emp = inv * ee_cross_[(m * M_ + m2) * K_ + k];
                    r.max_rel_theta_cross =
                        std::max(r.max_rel_theta_cross, rel_frobenius(emp, closed, scale));
                    r.max_rel_theta_cross_strict = std::max(
                        r.max_rel_theta_cross_strict, rel_frobenius(emp, closed, closed.norm()));
                }
                for (int k2 = k + 1; k2 < K_; ++k2)
                    r.max_user_cross = std::max(
                        r.max_user_cross,
                        (inv * hh_user_[(m * K_ + k) * K_ + k2]).norm() /
                            std::sqrt(phi_norm * stats_.phi(m, k2).norm()));

                // Second eigenvalue of the centered second moment, relative
                // to the model scale; a batch of identical instances leaves
                // it at roundoff level for every (m, k).
                CMat centered =
                    inv * hh_[i] - (inv * h_mean_[i]) * (inv * h_mean_[i]).adjoint();
                Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(centered));
                const Vec ev = eig.eigenvalues();
                const double second = N_ >= 2 ? std::abs(ev(N_ - 2)) : 0.0;
                max_rank2_level = std::max(max_rank2_level, second / phi_norm);
            }
        }
        r.degenerate_rank_le_1 = max_rank2_level < 1e-9;
        return r;
    }

private:
    const ChannelStatistics& stats_;
    int M_, K_, N_;
    std::size_t n_ = 0;
    std::vector<CMat> hh_, hathat_, ee_, ehat_, ee_cross_, hh_user_;
    std::vector<CVec> h_mean_;
};

inline ConsistencyReport estimation_consistency_report(
    const std::vector<ChannelInstance>& instances, const ChannelStatistics& stats) {
    if (instances.empty()) throw std::invalid_argument("consistency: empty batch");
    ConsistencyAccumulator acc(stats);
    for (const auto& inst : instances) acc.add(inst);
    return acc.finalize();
}

}  // namespace cfisac
