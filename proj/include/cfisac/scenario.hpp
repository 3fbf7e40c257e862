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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfisac/common.hpp"
#include "cfisac/rng.hpp"

namespace cfisac {

/// Scenario parameters.  dB fields are power-like and convert with
/// 10^(x/10); angles are stored in degrees here and used in radians
/// everywhere else.
struct SystemConfig {
    int M = 6;               ///< AP count
    int K = 9;               ///< information-user count
    int T = 3;               ///< target count
    int N_T = 12;            ///< antennas per AP
    int tau_p = 5;           ///< pilot length (symbols)
    int tau_c = 40;          ///< coherence length (symbols)
    double p_p_db = 150.0;   ///< normalized pilot SNR (dB)
    double p_m_db = 125.0;   ///< normalized per-AP downlink power (dB)
    double D_km = 2.0;       ///< square side length (km)
    std::vector<double> alpha = {0.8, 0.8, 0.8};  ///< per-target reflection coefficients
    double delta_theta_deg = 10.0;  ///< ideal mainlobe width
    int N_dirs = 181;               ///< sampled directions over [-90, 90] deg
    double sigma2_TA_db = -160.0;   ///< target-AP path-loss-uncertainty variance (dB)
    double sigma2_UT_db = -160.0;   ///< user-target path-loss-uncertainty variance (dB)
    double chi2_db = -30.0;         ///< steering-uncertainty variance (dB)
    double antenna_ratio = 0.5;     ///< antenna spacing over wavelength
    std::uint64_t rng_seed = 1;

    // Prior target coordinates are truth plus an isotropic Gaussian with
    // this standard deviation (km).  0 makes priors coincide with truth.
    double prior_std_km = 0.0;

    // Cellular-baseline BS position; defaults to the square's center.
    std::optional<std::array<double, 2>> cellular_bs_xy;

    double p_p() const { return db_to_linear(p_p_db); }
    double p_m() const { return db_to_linear(p_m_db); }
    double sigma2_TA() const { return db_to_linear(sigma2_TA_db); }
    double sigma2_UT() const { return db_to_linear(sigma2_UT_db); }
    double chi2() const { return db_to_linear(chi2_db); }
    double delta_theta_rad() const { return deg_to_rad(delta_theta_deg); }

    /// Field-level validation; empty result means the config is usable.
    std::vector<std::string> validate() const {
        std::vector<std::string> errs;
        if (M < 1) errs.push_back("M: must be >= 1");
        if (T < 0) errs.push_back("T: must be >= 0");
        if (M < T) errs.push_back("M: must be >= T (one AP senses at most one target)");
        if (K < 1) errs.push_back("K: must be >= 1");
        if (N_T < 1) errs.push_back("N_T: must be >= 1");
        if (tau_p < 1) errs.push_back("tau_p: must be >= 1");
        if (tau_p > tau_c) errs.push_back("tau_p: must be <= tau_c");
        if (static_cast<int>(alpha.size()) != T)
            errs.push_back("alpha: length must equal T");
        for (double a : alpha)
            if (!(a > 0.0 && a <= 1.0)) errs.push_back("alpha: entries must lie in (0, 1]");
        if (!(D_km > 0.0)) errs.push_back("D_km: must be > 0");
        if (N_dirs < 2) errs.push_back("N_dirs: must be >= 2");
        if (!(delta_theta_deg >= 0.0)) errs.push_back("delta_theta_deg: must be >= 0");
        if (!(antenna_ratio > 0.0)) errs.push_back("antenna_ratio: must be > 0");
        if (prior_std_km < 0.0) errs.push_back("prior_std_km: must be >= 0");
        return errs;
    }
};

inline void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = nlohmann::json{{"M", c.M},
                       {"K", c.K},
                       {"T", c.T},
                       {"N_T", c.N_T},
                       {"tau_p", c.tau_p},
                       {"tau_c", c.tau_c},
                       {"p_p_db", c.p_p_db},
                       {"p_m_db", c.p_m_db},
                       {"D_km", c.D_km},
                       {"alpha", c.alpha},
                       {"delta_theta_deg", c.delta_theta_deg},
                       {"N_dirs", c.N_dirs},
                       {"sigma2_TA_db", c.sigma2_TA_db},
                       {"sigma2_UT_db", c.sigma2_UT_db},
                       {"chi2_db", c.chi2_db},
                       {"antenna_ratio", c.antenna_ratio},
                       {"rng_seed", c.rng_seed},
                       {"prior_std_km", c.prior_std_km}};
    if (c.cellular_bs_xy) j["cellular_bs_xy"] = *c.cellular_bs_xy;
}

inline void from_json(const nlohmann::json& j, SystemConfig& c) {
    c = SystemConfig{};
    j.at("M").get_to(c.M);
    j.at("K").get_to(c.K);
    j.at("T").get_to(c.T);
    j.at("N_T").get_to(c.N_T);
    j.at("tau_p").get_to(c.tau_p);
    j.at("tau_c").get_to(c.tau_c);
    j.at("p_p_db").get_to(c.p_p_db);
    j.at("p_m_db").get_to(c.p_m_db);
    j.at("D_km").get_to(c.D_km);
    j.at("alpha").get_to(c.alpha);
    j.at("delta_theta_deg").get_to(c.delta_theta_deg);
    j.at("N_dirs").get_to(c.N_dirs);
    j.at("sigma2_TA_db").get_to(c.sigma2_TA_db);
    j.at("sigma2_UT_db").get_to(c.sigma2_UT_db);
    j.at("chi2_db").get_to(c.chi2_db);
    j.at("antenna_ratio").get_to(c.antenna_ratio);
    j.at("rng_seed").get_to(c.rng_seed);
    if (j.contains("prior_std_km")) j.at("prior_std_km").get_to(c.prior_std_km);
    if (j.contains("cellular_bs_xy")) {
        std::array<double, 2> xy{};
        j.at("cellular_bs_xy").get_to(xy);
        c.cellular_bs_xy = xy;
    }
}

/// Entity coordinates in km.  Priors are the only target positions the
/// network knows; distances written d-bar elsewhere are measured to them.
struct NetworkLayout {
    std::vector<Vec2> ap_xy;
    std::vector<Vec2> iu_xy;
    std::vector<Vec2> target_xy_true;
    std::vector<Vec2> target_xy_prior;
};

/// Distance-dependent amplitude path-loss gain; d in km.
inline double path_loss(double d) {
    if (!(d > 0.0)) throw std::domain_error("path_loss: distance must be > 0");
    return std::pow(10.0, -(128.1 + 37.6 * std::log10(d)) / 20.0);
}

/// Direction of arrival from an AP toward a (prior) target position,
/// measured from the +y axis; result in [0, pi].
inline double doa(const Vec2& ap_xy, const Vec2& target_prior_xy) {
    const Vec2 diff = ap_xy - target_prior_xy;
    const double dist = diff.norm();
    if (dist < 1e-12)
        throw std::domain_error("doa: AP and target positions coincide");
    double c = diff.y() / dist;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

/// Uniform-linear-array steering vector; entry i is exp(j*2*pi*ratio*i*sin(theta)).
inline CVec steering(double theta, int n_t, double ratio) {
    if (n_t < 1) throw std::invalid_argument("steering: n_t must be >= 1");
    CVec a(n_t);
    const double step = 2.0 * kPi * ratio * std::sin(theta);
    for (int i = 0; i < n_t; ++i) a(i) = std::exp(kJ * (step * static_cast<double>(i)));
    return a;
}

/// Direction of a ULA broadside-grid angle that produces the same steering
/// vector as a north-referenced DOA in [0, pi].
inline double doa_to_grid_angle(double theta) { return std::asin(std::sin(theta)); }

namespace detail {

inline constexpr double kMinPlacementKm = 1e-3;  // 1 m

inline Vec2 sample_point_away_from(Rng& rng, double d_km,
                                   const std::vector<const std::vector<Vec2>*>& groups) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Vec2 p(rng.uniform(0.0, d_km), rng.uniform(0.0, d_km));
        bool ok = true;
        for (const auto* g : groups) {
            for (const auto& q : *g) {
                if ((p - q).norm() < kMinPlacementKm) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (ok) return p;
    }
    throw std::runtime_error("sample_layout: cannot satisfy minimum placement distance");
}

}  // namespace detail

/// Draw a layout with all entities i.i.d. uniform on [0, D]^2, keeping every
/// pair of placed points at least 1 m apart.
inline NetworkLayout sample_layout(const SystemConfig& config, Rng& rng) {
    NetworkLayout layout;
    std::vector<const std::vector<Vec2>*> placed = {&layout.ap_xy, &layout.iu_xy,
                                                    &layout.target_xy_true};
    for (int m = 0; m < config.M; ++m)
        layout.ap_xy.push_back(detail::sample_point_away_from(rng, config.D_km, placed));
    for (int k = 0; k < config.K; ++k)
        layout.iu_xy.push_back(detail::sample_point_away_from(rng, config.D_km, placed));
    for (int t = 0; t < config.T; ++t)
        layout.target_xy_true.push_back(detail::sample_point_away_from(rng, config.D_km, placed));

    for (int t = 0; t < config.T; ++t) {
        Vec2 prior = layout.target_xy_true[t];
        if (config.prior_std_km > 0.0) {
            for (int attempt = 0; attempt < 100000; ++attempt) {
                prior = layout.target_xy_true[t] +
                        config.prior_std_km * Vec2(rng.gaussian(), rng.gaussian());
                bool ok = true;
                for (const auto& q : layout.ap_xy)
                    if ((prior - q).norm() < detail::kMinPlacementKm) ok = false;
                for (const auto& q : layout.iu_xy)
                    if ((prior - q).norm() < detail::kMinPlacementKm) ok = false;
                if (ok) break;
            }
        }
        layout.target_xy_prior.push_back(prior);
    }
    return layout;
}

}  // namespace cfisac
