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

#include <optional>
#include <vector>

#include "cfisac/convex.hpp"
#include "cfisac/metrics.hpp"

namespace cfisac {

inline constexpr double kLn2 = 0.693147180559945309417232121458;

struct SolverOptions {
    double outer_tol = 1e-4;
    double inner_tol = 1e-4;
    int max_outer = 50;
    int max_inner = 100;
    double penalty_q = 0.0;  ///< 0 selects 10x the initial surrogate magnitude
    ConicOptions conic{};
    double smin_hint = -1.0;              ///< sensing-only optimum, if already known
    const Beamformer* warm_start = nullptr;
};

// ---------------------------------------------------------------------------
// Surrogate objectives of the fractional reformulations
// ---------------------------------------------------------------------------

/// Surrogate after the Lagrangian dual transform: concave in the auxiliary
/// SINR variables, recovers the sum rate at their optimum.
inline double dual_surrogate(const Vec& sinr_aux, const Beamformer& bf,
                             const SensingAssignment& assignment, const ChannelStatistics& stats,
                             const std::vector<CVec>& h_hat, const Vec& p_linear) {
    double val = 0.0;
    for (int k = 0; k < bf.K; ++k) {
        const double g = sinr_aux(k);
        const double sig = std::norm(signal_amplitude(k, bf, h_hat, p_linear));
        const double a = interference_power(k, bf, assignment, stats, h_hat, p_linear);
        val += std::log2(1.0 + g) - g / kLn2 + (1.0 + g) / kLn2 * sig / (a + sig);
    }
    return val;
}

/// Surrogate after the quadratic fractional transform; covers both the
/// communication-only case (Z = 0) and the joint case.
inline double fractional_surrogate(const Vec& sinr_aux, const CVec& scale_aux,
                                   const Beamformer& bf, const SensingAssignment& assignment,
                                   const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                                   const Vec& p_linear) {
    double val = 0.0;
    for (int k = 0; k < bf.K; ++k) {
        const double g = sinr_aux(k);
        const cdouble y = scale_aux(k);
        const cdouble f = signal_amplitude(k, bf, h_hat, p_linear);
        const double a = interference_power(k, bf, assignment, stats, h_hat, p_linear);
        val += std::log2(1.0 + g) - g / kLn2 +
               (2.0 / kLn2) * std::sqrt(1.0 + g) * std::real(std::conj(y) * f) -
               std::norm(y) / kLn2 * (a + std::norm(f));
    }
    return val;
}

/// Closed-form optimum of the SINR auxiliaries (they equal the SINRs).
inline Vec optimal_sinr_aux(const Beamformer& bf, const SensingAssignment& assignment,
                            const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                            const Vec& p_linear) {
    Vec g(bf.K);
    for (int k = 0; k < bf.K; ++k) {
        const double sig = std::norm(signal_amplitude(k, bf, h_hat, p_linear));
        const double a = interference_power(k, bf, assignment, stats, h_hat, p_linear);
        g(k) = sig / a;
    }
    return g;
}

/// Closed-form optimum of the complex scale auxiliaries.
inline CVec optimal_scale_aux(const Vec& sinr_aux, const Beamformer& bf,
                              const SensingAssignment& assignment, const ChannelStatistics& stats,
                              const std::vector<CVec>& h_hat, const Vec& p_linear) {
    CVec y(bf.K);
    for (int k = 0; k < bf.K; ++k) {
        const cdouble f = signal_amplitude(k, bf, h_hat, p_linear);
        const double a = interference_power(k, bf, assignment, stats, h_hat, p_linear);
        y(k) = std::sqrt(1.0 + sinr_aux(k)) * f / (a + std::norm(f));
    }
    return y;
}

// ---------------------------------------------------------------------------
// Difference-of-convex split of the interference power
// ---------------------------------------------------------------------------

struct InterferenceSplit {
    double majorant = 0.0;    ///< jointly convex part (completed squares)
    double correction = 0.0;  ///< convex part subtracted from the majorant
};

/// Writes A_k = majorant - correction with both parts convex in the
/// beamformers; the cross-AP bilinear terms are completed into squares.
inline InterferenceSplit interference_split(int k, const Beamformer& bf,
                                            const SensingAssignment& assignment,
                                            const ChannelStatistics& stats,
                                            const std::vector<CVec>& h_hat, const Vec& p_linear) {
    const int M = bf.M, K = bf.K;
    InterferenceSplit s;
    double b = 1.0;
    for (int k2 = 0; k2 < K; ++k2) {
        if (k2 != k) b += std::norm(signal_amplitude_for(k, k2, bf, h_hat, p_linear));
        for (int m = 0; m < M; ++m) {
            const CVec& wm = bf.at(m, k2);
            b += p_linear(m) * std::real(wm.dot(stats.theta(m, k) * wm));
            for (int m2 = m + 1; m2 < M; ++m2) {
                const CVec u = std::sqrt(p_linear(m)) * (stats.theta_pair(m, m2, k).adjoint() * wm) +
                               std::sqrt(p_linear(m2)) * bf.at(m2, k2);
                b += u.squaredNorm();
                s.correction +=
                    p_linear(m) * (stats.theta_pair(m, m2, k).adjoint() * wm).squaredNorm() +
                    p_linear(m2) * bf.at(m2, k2).squaredNorm();
            }
        }
    }
    for (size_t i = 0; i < assignment.M_T.size(); ++i) {
        const int m = assignment.M_T[i];
        const CVec& hat = h_hat[m * K + k];
        b += p_linear(m) *
             std::real(hat.dot(bf.Z[i] * hat) + (stats.theta(m, k) * bf.Z[i]).trace());
    }
    s.majorant = b;
    return s;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct BaselineResult {
    Beamformer bf;
    bool regularized = false;  ///< ZF fell back to a regularized inverse
};

namespace detail {

inline Vec comm_power_budget(const SensingAssignment& assignment, int M,
                             const std::vector<CMat>& z_fixed) {
    Vec budget = Vec::Ones(M);
    for (size_t i = 0; i < assignment.M_T.size(); ++i)
        budget(assignment.M_T[i]) -= z_fixed.empty() ? 0.0 : z_fixed[i].trace().real();
    return budget.cwiseMax(0.0);
}

}  // namespace detail

/// Maximum-ratio transmission toward the channel estimates, equal per-user
/// power split, per-AP budget met with equality.
inline BaselineResult mrt_beamformer(const std::vector<CVec>& h_hat,
                                     const SensingAssignment& assignment, int M, int K, int N_T,
                                     const std::vector<CMat>& z_fixed) {
    BaselineResult out;
    out.bf = Beamformer::zero(M, K, N_T, static_cast<int>(assignment.M_T.size()));
    out.bf.Z = z_fixed.empty()
                   ? std::vector<CMat>(assignment.M_T.size(), CMat::Zero(N_T, N_T))
                   : z_fixed;
    const Vec budget = detail::comm_power_budget(assignment, M, z_fixed);
    for (int m = 0; m < M; ++m) {
        const double per_user = budget(m) / static_cast<double>(K);
        for (int k = 0; k < K; ++k) {
            const CVec& hat = h_hat[m * K + k];
            const double n = hat.norm();
            if (n > 0.0) out.bf.at(m, k) = std::sqrt(per_user) * hat / n;
        }
    }
    return out;
}

/// Zero-forcing from the right pseudo-inverse of the stacked estimates,
/// jointly power-normalized per AP.  Rank deficiency falls back to a
/// regularized inverse and is flagged.
inline BaselineResult zf_beamformer(const std::vector<CVec>& h_hat,
                                    const SensingAssignment& assignment, int M, int K, int N_T,
                                    const std::vector<CMat>& z_fixed) {
    BaselineResult out;
    out.bf = Beamformer::zero(M, K, N_T, static_cast<int>(assignment.M_T.size()));
    out.bf.Z = z_fixed.empty()
                   ? std::vector<CMat>(assignment.M_T.size(), CMat::Zero(N_T, N_T))
                   : z_fixed;
    const Vec budget = detail::comm_power_budget(assignment, M, z_fixed);
    for (int m = 0; m < M; ++m) {
        CMat stacked(N_T, K);
        for (int k = 0; k < K; ++k) stacked.col(k) = h_hat[m * K + k];
        CMat gram = stacked.adjoint() * stacked;
        const double trace = gram.trace().real();
        Eigen::LLT<CMat> llt(gram);
        CMat raw;
        if (llt.info() == Eigen::Success && trace > 0.0 &&
            gram.fullPivLu().rank() == K) {
            raw = stacked * llt.solve(CMat::Identity(K, K));
        } else {
            out.regularized = true;
            const double eps = std::max(trace, 1e-300) * 1e-10 / K;
            raw = stacked *
                  (gram + eps * CMat::Identity(K, K)).llt().solve(CMat::Identity(K, K));
        }
        double total = raw.squaredNorm();
        if (total > 0.0) {
            const double scale = std::sqrt(budget(m) / total);
            for (int k = 0; k < K; ++k) out.bf.at(m, k) = scale * raw.col(k);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sensing-only design (per-AP convex program over the spectrahedron)
// ---------------------------------------------------------------------------

struct SensingOnlyResult {
    double eta = 0.0;
    CMat z;
    double mse = 0.0;
    SolveReport report;
};

/// Minimize the beampattern matching MSE of one AP over (eta >= 0, Z in the
/// unit-trace PSD set), with the communication beams fixed at zero.
inline SensingOnlyResult solve_sensing_only(const Vec& ideal, const DirectionGrid& grid,
                                            double beam_power, const SolverOptions& options,
                                            const CMat* z_init = nullptr) {
    const int n = grid.size();
    const int n_t = grid.antennas();
    const double inv_n = 1.0 / static_cast<double>(n);

    ConicProblem prob;
    prob.shape.n_reals = 1;
    prob.shape.mat_dims = {n_t};
    prob.objective = [&, inv_n](const VarPack& p, VarPack* grad) {
        const double eta = p.reals(0);
        const CMat& z = p.matrices[0];
        const CMat pz = grid.projector * z;
        const Vec zquad = pz.cwiseProduct(grid.projector.conjugate()).rowwise().sum().real();
        const Vec residual = eta * ideal - beam_power * zquad;
        if (grad) {
            grad->reals(0) += -2.0 * inv_n * ideal.dot(residual);
            grad->matrices[0] += 2.0 * inv_n * beam_power *
                                 (grid.projector.adjoint() * residual.asDiagonal() *
                                  grid.projector);
        }
        return -inv_n * residual.squaredNorm();
    };
    prob.project = [](VarPack& p) {
        p.reals(0) = std::max(p.reals(0), 0.0);
        p.matrices[0] = project_spectrahedron(p.matrices[0]);
    };

    VarPack x = VarPack::zero(prob.shape);
    x.matrices[0] = z_init ? *z_init : CMat::Identity(n_t, n_t) / static_cast<double>(n_t);
    x.reals(0) = 1.0;
    ConicOptions copts = options.conic;
    const SolveReport rep = solve_conic(prob, copts, x);

    SensingOnlyResult out;
    out.eta = x.reals(0);
    out.z = project_spectrahedron(x.matrices[0]);
    out.mse = -rep.objective;
    out.report = rep;
    return out;
}

struct SensingDesign {
    Vec eta;                ///< per sensing AP (M_T order)
    std::vector<CMat> Z;    ///< per sensing AP
    Vec mse;                ///< per sensing AP optimal matching MSE
    double s_min = 0.0;     ///< average of the optimal MSEs
    std::vector<SolveReport> reports;
};

/// Ideal windows of the sensing APs, centered on the grid angle of each
/// target's prior DOA.
inline std::vector<Vec> sensing_ideal_patterns(const NetworkLayout& layout,
                                               const SensingAssignment& assignment,
                                               const DirectionGrid& grid, double delta_theta) {
    std::vector<Vec> ideal;
    ideal.reserve(assignment.M_T.size());
    for (int m : assignment.M_T) {
        const int t = assignment.target_of(m);
        const double center = doa_to_grid_angle(doa(layout.ap_xy[m], layout.target_xy_prior[t]));
        ideal.push_back(ideal_beampattern(center, grid, delta_theta));
    }
    return ideal;
}

/// Sensing-only transmit design: the problem decouples across sensing APs.
inline SensingDesign solve_p1(const NetworkLayout& layout, const SensingAssignment& assignment,
                              const DirectionGrid& grid, double delta_theta, const Vec& p_beam,
                              const SolverOptions& options) {
    if (assignment.M_T.empty()) throw std::invalid_argument("solve_p1: no sensing APs");
    const std::vector<Vec> ideal = sensing_ideal_patterns(layout, assignment, grid, delta_theta);
    SensingDesign d;
    const int mt = static_cast<int>(assignment.M_T.size());
    d.eta = Vec::Zero(mt);
    d.mse = Vec::Zero(mt);
    d.Z.resize(mt);
    for (int i = 0; i < mt; ++i) {
        const SensingOnlyResult r =
            solve_sensing_only(ideal[i], grid, p_beam(assignment.M_T[i]), options);
        d.eta(i) = r.eta;
        d.Z[i] = r.z;
        d.mse(i) = r.mse;
        d.s_min += r.mse / mt;
        d.reports.push_back(r.report);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Communication-only design (block-coordinate ascent with exact per-AP
// ball-constrained solves)
// ---------------------------------------------------------------------------

struct CommResult {
    Beamformer bf;
    double sum_rate = 0.0;
    std::vector<double> surrogate_history;  ///< value after every block update
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/// Quadratic model of the fractional surrogate in AP m's beamformers with
/// every other AP fixed: f = const + sum_j (2 Re{b_j^H w_mj} - w_mj^H Q w_mj).
struct ApBlockModel {
    CMat q;  ///< shared PSD block
    CMat b;  ///< N_T x K, column j is the linear term of user j's block
};

inline ApBlockModel build_ap_block_model(int m, const Vec& sinr_aux, const CVec& scale_aux,
                                         const Beamformer& bf, const ChannelStatistics& stats,
                                         const std::vector<CVec>& h_hat, const Vec& p_linear) {
    const int K = bf.K, M = bf.M, n_t = bf.N_T;
    const double pm = p_linear(m);
    ApBlockModel model;
    model.q = CMat::Zero(n_t, n_t);
    model.b = CMat::Zero(n_t, K);

    for (int k = 0; k < K; ++k) {
        const double w2 = std::norm(scale_aux(k)) / kLn2;
        const CVec& hat = h_hat[m * K + k];
        model.q += (w2 * pm) * (stats.theta(m, k) + hat * hat.adjoint());

        // Remote contributions of user j's stream through user k's channel.
        for (int j = 0; j < K; ++j) {
            cdouble remote = 0.0;
            for (int m2 = 0; m2 < M; ++m2)
                if (m2 != m)
                    remote += std::sqrt(p_linear(m2)) * h_hat[m2 * K + k].dot(bf.at(m2, j));
            model.b.col(j) -= (w2 * std::sqrt(pm)) * remote * hat;
        }
        for (int m2 = 0; m2 < M; ++m2) {
            if (m2 == m) continue;
            const double cross = std::sqrt(pm * p_linear(m2)) * w2;
            for (int j = 0; j < K; ++j)
                model.b.col(j) -= cross * (stats.theta_pair(m, m2, k) * bf.at(m2, j));
        }
    }
    for (int j = 0; j < K; ++j)
        model.b.col(j) += (std::sqrt(1.0 + sinr_aux(j)) / kLn2) * scale_aux(j) *
                          std::sqrt(pm) * h_hat[m * K + j];
    return model;
}

}  // namespace detail

/// Communication-only sum-rate maximization (Z = 0).  Block-coordinate
/// ascent: auxiliary variables by their closed forms, each AP's beamformers
/// by an exact concave-quadratic maximization over the unit power ball.
/// APs are updated sequentially so every step is a monotone ascent.
inline CommResult solve_p2(const ChannelStatistics& stats, const std::vector<CVec>& h_hat,
                           const Vec& p_linear, const SolverOptions& options) {
    const int M = stats.M, K = stats.K, n_t = stats.N_T;
    SensingAssignment comm_only;  // empty sensing set
    for (int m = 0; m < M; ++m) comm_only.M_I.push_back(m);

    CommResult out;
    // Feasible start: better of the two classical baselines.
    {
        const BaselineResult mrt = mrt_beamformer(h_hat, comm_only, M, K, n_t, {});
        const BaselineResult zf = zf_beamformer(h_hat, comm_only, M, K, n_t, {});
        const double r_mrt = sum_rate(mrt.bf, comm_only, stats, h_hat, p_linear);
        const double r_zf = sum_rate(zf.bf, comm_only, stats, h_hat, p_linear);
        out.bf = r_zf > r_mrt ? zf.bf : mrt.bf;
    }
    if (options.warm_start) {
        const double r_warm =
            sum_rate(*options.warm_start, comm_only, stats, h_hat, p_linear);
        if (r_warm > sum_rate(out.bf, comm_only, stats, h_hat, p_linear))
            out.bf = *options.warm_start;
    }

    Vec sinr = optimal_sinr_aux(out.bf, comm_only, stats, h_hat, p_linear);
    CVec scale = optimal_scale_aux(sinr, out.bf, comm_only, stats, h_hat, p_linear);
    double f2 = fractional_surrogate(sinr, scale, out.bf, comm_only, stats, h_hat, p_linear);
    out.surrogate_history.push_back(f2);

    for (int outer = 0; outer < options.max_outer; ++outer) {
        const double f2_outer_start = f2;
        for (int m = 0; m < M; ++m) {
            sinr = optimal_sinr_aux(out.bf, comm_only, stats, h_hat, p_linear);
            scale = optimal_scale_aux(sinr, out.bf, comm_only, stats, h_hat, p_linear);
            f2 = fractional_surrogate(sinr, scale, out.bf, comm_only, stats, h_hat, p_linear);
            out.surrogate_history.push_back(f2);
            for (int inner = 0; inner < options.max_inner; ++inner) {
                const double f2_prev = f2;
                const detail::ApBlockModel model =
                    detail::build_ap_block_model(m, sinr, scale, out.bf, stats, h_hat, p_linear);
                const CMat w_opt = max_quadratic_over_ball_blocks(model.q, model.b, 1.0);
                for (int k = 0; k < K; ++k) out.bf.at(m, k) = w_opt.col(k);
                ++out.iterations;
                f2 = fractional_surrogate(sinr, scale, out.bf, comm_only, stats, h_hat,
                                          p_linear);
                out.surrogate_history.push_back(f2);

                sinr = optimal_sinr_aux(out.bf, comm_only, stats, h_hat, p_linear);
                scale = optimal_scale_aux(sinr, out.bf, comm_only, stats, h_hat, p_linear);
                f2 = fractional_surrogate(sinr, scale, out.bf, comm_only, stats, h_hat,
                                          p_linear);
                out.surrogate_history.push_back(f2);
                if (f2 - f2_prev <= options.inner_tol * std::max(1.0, std::abs(f2))) break;
            }
        }
        if (f2 - f2_outer_start <= options.outer_tol * std::max(1.0, std::abs(f2))) {
            out.converged = true;
            break;
        }
    }
    out.sum_rate = sum_rate(out.bf, comm_only, stats, h_hat, p_linear);
    return out;
}

}  // namespace cfisac
