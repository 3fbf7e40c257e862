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
#include "cfisac/pilot.hpp"

namespace cfisac {

/// Projected pilot observations y_{p,mk}.  Users sharing a pilot see the
/// identical observation vector at a given AP.
struct PilotObservation {
    int M = 0, K = 0, N_T = 0;
    std::vector<CVec> y;  ///< M*K
    const CVec& at(int m, int k) const { return y[m * K + k]; }
};

/// Direct synthesis: one noise projection per (AP, pilot cluster),
/// observation = sqrt(p_p tau_p) * sum of co-pilot aggregated channels + noise.
inline PilotObservation synthesize_pilot_observation(const ChannelInstance& inst,
                                                     const PilotPlan& plan,
                                                     const SystemConfig& config, Rng& rng) {
    PilotObservation obs;
    obs.M = inst.M;
    obs.K = inst.K;
    obs.N_T = inst.N_T;
    obs.y.resize(inst.M * inst.K);
    const double amp = std::sqrt(config.p_p() * static_cast<double>(config.tau_p));

    std::vector<std::vector<int>> clusters(plan.tau_p());
    for (int k = 0; k < inst.K; ++k) clusters[plan.cluster_of[k]].push_back(k);

    for (int m = 0; m < inst.M; ++m) {
        for (const auto& members : clusters) {
            if (members.empty()) continue;
            CVec y = rng.cn_vector(inst.N_T);
            for (int k2 : members) y += amp * inst.agg(m, k2);
            for (int k : members) obs.y[m * inst.K + k] = y;
        }
    }
    return obs;
}

/// Full received pilot block at AP m for an externally supplied noise
/// matrix: Y = sqrt(p_p tau_p) * sum_k h_mk phi_k^H + N.
inline CMat pilot_block(const ChannelInstance& inst, const PilotPlan& plan,
                        const SystemConfig& config, int m, const CMat& noise) {
    const double amp = std::sqrt(config.p_p() * static_cast<double>(config.tau_p));
    CMat y = noise;
    for (int k = 0; k < inst.K; ++k)
        y += amp * inst.agg(m, k) * plan.pilots.col(plan.cluster_of[k]).adjoint();
    return y;
}

/// Projection of a received pilot block onto user k's pilot.
inline CVec project_pilot_block(const CMat& block, const PilotPlan& plan, int k) {
    return block * plan.pilots.col(plan.cluster_of[k]);
}

/// Direct-path observation with the same noise matrix as pilot_block, for
/// checking the algebraic equivalence of the two synthesis routes.
inline CVec direct_observation_from_noise(const ChannelInstance& inst, const PilotPlan& plan,
                                          const SystemConfig& config, int m, int k,
                                          const CMat& noise) {
    const double amp = std::sqrt(config.p_p() * static_cast<double>(config.tau_p));
    CVec y = noise * plan.pilots.col(plan.cluster_of[k]);
    for (int k2 = 0; k2 < inst.K; ++k2)
        if (plan.cluster_of[k2] == plan.cluster_of[k]) y += amp * inst.agg(m, k2);
    return y;
}

/// LMMSE estimates h_hat_mk = C_mk y_mk.
inline std::vector<CVec> lmmse_estimate(const PilotObservation& obs,
                                        const ChannelStatistics& stats) {
    if (obs.M != stats.M || obs.K != stats.K || obs.N_T != stats.N_T)
        throw std::invalid_argument("lmmse_estimate: shape mismatch");
    std::vector<CVec> hat(obs.M * obs.K);
    for (int m = 0; m < obs.M; ++m)
        for (int k = 0; k < obs.K; ++k)
            hat[m * obs.K + k] = stats.gain(m, k) * obs.at(m, k);
    return hat;
}

/// Fill estimates and errors of an instance from its pilot observation.
inline void estimate_instance(ChannelInstance& inst, const PilotObservation& obs,
                              const ChannelStatistics& stats) {
    inst.h_hat = lmmse_estimate(obs, stats);
    inst.e.resize(inst.M * inst.K);
    for (int i = 0; i < inst.M * inst.K; ++i) inst.e[i] = inst.h_agg[i] - inst.h_hat[i];
}

}  // namespace cfisac
