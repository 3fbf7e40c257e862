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

#include <algorithm>
#include <limits>
#include <vector>

#include <json.hpp>

#include "cfisac/common.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

/// Pilot assignment: users in the same cluster transmit the same pilot.
struct PilotPlan {
    std::vector<int> cluster_of;  ///< user k -> cluster index in [0, tau_p)
    CMat pilots;                  ///< tau_p x tau_p; column c is the pilot of cluster c

    int tau_p() const { return static_cast<int>(pilots.cols()); }

    bool share_pilot(int k, int k2) const { return cluster_of[k] == cluster_of[k2]; }

    /// Indices of users sharing user k's pilot (including k itself).
    std::vector<int> copilot_set(int k) const {
        std::vector<int> out;
        for (int k2 = 0; k2 < static_cast<int>(cluster_of.size()); ++k2)
            if (cluster_of[k2] == cluster_of[k]) out.push_back(k2);
        return out;
    }
};

inline void to_json(nlohmann::json& j, const PilotPlan& p) {
    j = nlohmann::json{{"cluster_of", p.cluster_of}};
}

/// Columns of the unitary DFT matrix: an orthonormal pilot basis.
inline CMat dft_pilot_basis(int tau_p) {
    CMat f(tau_p, tau_p);
    const double scale = 1.0 / std::sqrt(static_cast<double>(tau_p));
    for (int r = 0; r < tau_p; ++r)
        for (int c = 0; c < tau_p; ++c)
            f(r, c) = scale * std::exp(-kJ * (2.0 * kPi * r * c / static_cast<double>(tau_p)));
    return f;
}

/// Hierarchical agglomerative clustering for pilot allocation.  Starting
/// from singletons, repeatedly merges the two clusters with MAXIMUM
/// single-linkage distance until tau_p clusters survive, so that users
/// sharing a pilot end up far apart.  Equal distances are broken toward the
/// lexicographically smallest (min-member, min-member) pair of clusters.
inline PilotPlan allocate_pilots_hac(const NetworkLayout& layout, int tau_p) {
    const int K = static_cast<int>(layout.iu_xy.size());
    if (K < 1) throw std::invalid_argument("allocate_pilots_hac: K must be >= 1");
    if (tau_p < 1) throw std::invalid_argument("allocate_pilots_hac: tau_p must be >= 1");

    std::vector<std::vector<int>> clusters(K);
    for (int k = 0; k < K; ++k) clusters[k] = {k};

    auto linkage = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double d = std::numeric_limits<double>::infinity();
        for (int i : a)
            for (int j : b) d = std::min(d, (layout.iu_xy[i] - layout.iu_xy[j]).norm());
        return d;
    };

    while (static_cast<int>(clusters.size()) > tau_p) {
        double best = -1.0;
        std::pair<int, int> best_pair{-1, -1};
        std::pair<int, int> best_label{0, 0};
        for (int i = 0; i < static_cast<int>(clusters.size()); ++i) {
            for (int j = i + 1; j < static_cast<int>(clusters.size()); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                std::pair<int, int> label{clusters[i].front(), clusters[j].front()};
                if (label.first > label.second) std::swap(label.first, label.second);
                if (d > best || (d == best && label < best_label)) {
                    best = d;
                    best_pair = {i, j};
                    best_label = label;
                }
            }
        }
        auto& dst = clusters[best_pair.first];
        auto& src = clusters[best_pair.second];
        dst.insert(dst.end(), src.begin(), src.end());
        std::sort(dst.begin(), dst.end());
        clusters.erase(clusters.begin() + best_pair.second);
    }

    // Stable pilot indexing: clusters ordered by their smallest member.
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    PilotPlan plan;
    plan.cluster_of.assign(K, -1);
    for (int c = 0; c < static_cast<int>(clusters.size()); ++c)
        for (int k : clusters[c]) plan.cluster_of[k] = c;
    plan.pilots = dft_pilot_basis(tau_p);
    return plan;
}

}  // namespace cfisac
