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

#include <map>
#include <vector>

#include <json.hpp>

#include "cfisac/common.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

/// Target-to-AP assignment.  Sensing APs carry exactly one target each.
struct SensingAssignment {
    std::vector<int> ap_of_target;  ///< target t -> AP index
    std::vector<int> M_T;           ///< sensing APs, ascending
    std::vector<int> M_I;           ///< communication-only APs, ascending

    int target_of(int m) const {
        for (int t = 0; t < static_cast<int>(ap_of_target.size()); ++t)
            if (ap_of_target[t] == m) return t;
        return -1;
    }
    bool is_sensing(int m) const { return target_of(m) >= 0; }
    int num_sensing() const { return static_cast<int>(M_T.size()); }
};

inline void to_json(nlohmann::json& j, const SensingAssignment& a) {
    nlohmann::json target_of = nlohmann::json::object();
    for (int t = 0; t < static_cast<int>(a.ap_of_target.size()); ++t)
        target_of[std::to_string(a.ap_of_target[t])] = t;
    j = nlohmann::json{{"target_of", target_of}};
}

namespace detail {

/// Hungarian algorithm (Jonker-style O(n^3) shortest augmenting paths) for
/// an n_rows <= n_cols rectangular min-cost assignment.  Returns per-row
/// column indices.
inline std::vector<int> hungarian_min_cost(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    // 1-based potentials; standard formulation.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(m + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = -1;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

inline double assignment_cost(const Mat& dist, const std::vector<int>& ap_of_target) {
    double c = 0.0;
    for (int t = 0; t < static_cast<int>(ap_of_target.size()); ++t)
        c += dist(t, ap_of_target[t]);
    return c;
}

inline SensingAssignment make_assignment(int M, std::vector<int> ap_of_target) {
    SensingAssignment a;
    a.ap_of_target = std::move(ap_of_target);
    std::vector<char> sensing(M, false);
    for (int ap : a.ap_of_target) sensing[ap] = true;
    for (int m = 0; m < M; ++m) (sensing[m] ? a.M_T : a.M_I).push_back(m);
    return a;
}

/// Prior target-AP distance matrix, T x M.
inline Mat prior_distance_matrix(const NetworkLayout& layout) {
    const int T = static_cast<int>(layout.target_xy_prior.size());
    const int M = static_cast<int>(layout.ap_xy.size());
    Mat d(T, M);
    for (int t = 0; t < T; ++t)
        for (int m = 0; m < M; ++m)
            d(t, m) = (layout.target_xy_prior[t] - layout.ap_xy[m]).norm();
    return d;
}

}  // namespace detail

/// Optimal target-AP pairing minimizing the summed prior distances, with
/// ties broken toward the lexicographically smallest assignment vector.
inline SensingAssignment pair_targets(const NetworkLayout& layout) {
    const int T = static_cast<int>(layout.target_xy_prior.size());
    const int M = static_cast<int>(layout.ap_xy.size());
    if (M < T) throw std::invalid_argument("pair_targets: need at least as many APs as targets");
    if (T == 0) return detail::make_assignment(M, {});

    const Mat dist = detail::prior_distance_matrix(layout);
    const double best_cost = detail::assignment_cost(dist, detail::hungarian_min_cost(dist));

    // Fix targets in order to the smallest AP that preserves optimality.
    std::vector<int> choice(T, -1);
    std::vector<char> used(M, false);
    double fixed_cost = 0.0;
    const double tol = 1e-9 * (1.0 + std::abs(best_cost));
    for (int t = 0; t < T; ++t) {
        for (int m = 0; m < M; ++m) {
            if (used[m]) continue;
            // Cost of the remaining subproblem with t -> m fixed.
            std::vector<int> rows, cols;
            for (int t2 = t + 1; t2 < T; ++t2) rows.push_back(t2);
            for (int m2 = 0; m2 < M; ++m2)
                if (!used[m2] && m2 != m) cols.push_back(m2);
            double rest = 0.0;
            if (!rows.empty()) {
                Mat sub(rows.size(), cols.size());
                for (size_t i = 0; i < rows.size(); ++i)
                    for (size_t j = 0; j < cols.size(); ++j) sub(i, j) = dist(rows[i], cols[j]);
                std::vector<int> sol = detail::hungarian_min_cost(sub);
                for (size_t i = 0; i < rows.size(); ++i) rest += sub(i, sol[i]);
            }
            if (fixed_cost + dist(t, m) + rest <= best_cost + tol) {
                choice[t] = m;
                used[m] = true;
                fixed_cost += dist(t, m);
                break;
            }
        }
        if (choice[t] < 0) throw std::logic_error("pair_targets: internal assignment failure");
    }
    return detail::make_assignment(M, choice);
}

/// Exhaustive-minimum pairing oracle; refuses more than 8 targets.
inline SensingAssignment brute_force_pairing(const NetworkLayout& layout) {
    const int T = static_cast<int>(layout.target_xy_prior.size());
    const int M = static_cast<int>(layout.ap_xy.size());
    if (T > 8) throw std::invalid_argument("brute_force_pairing: T must be <= 8");
    if (M < T) throw std::invalid_argument("brute_force_pairing: need M >= T");
    if (T == 0) return detail::make_assignment(M, {});

    const Mat dist = detail::prior_distance_matrix(layout);
    std::vector<int> current(T, -1), best;
    std::vector<char> used(M, false);
    double best_cost = std::numeric_limits<double>::infinity();

    // Depth-first over assignment vectors in lexicographic order; strict
    // improvement keeps the lexicographically smallest optimum.
    auto recurse = [&](auto&& self, int t, double cost) -> void {
        if (t == T) {
            if (cost < best_cost) {
                best_cost = cost;
                best = current;
            }
            return;
        }
        for (int m = 0; m < M; ++m) {
            if (used[m]) continue;
            used[m] = true;
            current[t] = m;
            self(self, t + 1, cost + dist(t, m));
            used[m] = false;
        }
    };
    recurse(recurse, 0, 0.0);
    return detail::make_assignment(M, best);
}

}  // namespace cfisac
