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

#include <catch2/catch_amalgamated.hpp>

#include "cfisac/channel.hpp"
#include "cfisac/uplink.hpp"

using namespace cfisac;

namespace {

SystemConfig small_config(int M, int K, int T, int N_T, int tau_p) {
    SystemConfig cfg;
    cfg.M = M;
    cfg.K = K;
    cfg.T = T;
    cfg.N_T = N_T;
    cfg.tau_p = tau_p;
    cfg.tau_c = std::max(40, tau_p);
    cfg.alpha.assign(T, 0.8);
    return cfg;
}

struct Pipeline {
    SystemConfig cfg;
    NetworkLayout layout;
    PilotPlan plan;
    ChannelStatistics stats;
};

Pipeline make_pipeline(const SystemConfig& cfg, std::uint64_t seed) {
    Pipeline p{cfg, {}, {}, {}};
    Rng rng(seed);
    p.layout = sample_layout(cfg, rng);
    p.plan = allocate_pilots_hac(p.layout, cfg.tau_p);
    p.stats = compute_statistics(p.layout, cfg, p.plan);
    return p;
}

}  // namespace

TEST_CASE("phi reduces to beta^2 I without targets") {
    const SystemConfig cfg = small_config(2, 3, 0, 4, 2);
    const Pipeline p = make_pipeline(cfg, 1);
    for (int m = 0; m < cfg.M; ++m) {
        for (int k = 0; k < cfg.K; ++k) {
            const double beta = path_loss((p.layout.iu_xy[k] - p.layout.ap_xy[m]).norm());
            CHECK((p.stats.phi(m, k) - beta * beta * CMat::Identity(4, 4)).norm() < 1e-18);
            if (m > 0) CHECK(p.stats.phi_pair(m, m - 1, k).norm() == 0.0);
        }
    }
}

TEST_CASE("scalar single-user closed form") {
    // T = 0, singleton cluster, N_T = 1: C = sqrt(pt) b^2 / (pt b^2 + 1),
    // Theta = b^2 / (pt b^2 + 1).
    SECTION("moderate pilot SNR, no cancellation") {
        SystemConfig cfg = small_config(1, 1, 0, 1, 1);
        cfg.p_p_db = 125.0;  // pt * b^2 = O(1)
        const Pipeline p = make_pipeline(cfg, 2);
        const double b2 = std::real(p.stats.phi(0, 0)(0, 0));
        const double pt = p.stats.pp_taup;
        CHECK_THAT(std::real(p.stats.gain(0, 0)(0, 0)),
                   Catch::Matchers::WithinRel(std::sqrt(pt) * b2 / (pt * b2 + 1.0), 1e-12));
        CHECK_THAT(std::real(p.stats.theta(0, 0)(0, 0)),
                   Catch::Matchers::WithinRel(b2 / (pt * b2 + 1.0), 1e-12));
    }
    SECTION("high pilot SNR; Theta cancels to pt*b^2 ulps") {
        SystemConfig cfg = small_config(1, 1, 0, 1, 1);
        const Pipeline p = make_pipeline(cfg, 2);
        const double b2 = std::real(p.stats.phi(0, 0)(0, 0));
        const double pt = p.stats.pp_taup;
        CHECK_THAT(std::real(p.stats.gain(0, 0)(0, 0)),
                   Catch::Matchers::WithinRel(std::sqrt(pt) * b2 / (pt * b2 + 1.0), 1e-12));
        CHECK_THAT(std::real(p.stats.theta(0, 0)(0, 0)),
                   Catch::Matchers::WithinRel(b2 / (pt * b2 + 1.0), 1e-9));
    }
}

TEST_CASE("statistics invariants on a contaminated instance") {
    SystemConfig cfg = small_config(3, 5, 2, 4, 2);
    const Pipeline p = make_pipeline(cfg, 3);
    for (int m = 0; m < cfg.M; ++m) {
        for (int k = 0; k < cfg.K; ++k) {
            const CMat& phi = p.stats.phi(m, k);
            CHECK((phi - phi.adjoint()).norm() < 1e-12 * phi.norm());
            Eigen::SelfAdjointEigenSolver<CMat> eig(phi);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * phi.norm());

            const CMat& theta = p.stats.theta(m, k);
            CHECK((theta - theta.adjoint()).norm() < 1e-12 * std::max(theta.norm(), 1e-300));
            CHECK(theta.trace().real() <= phi.trace().real() + 1e-9);

            for (int m2 = 0; m2 < cfg.M; ++m2) {
                if (m2 == m) continue;
                CHECK((p.stats.phi_pair(m, m2, k) - p.stats.phi_pair(m2, m, k).adjoint()).norm() ==
                      0.0);
                CHECK((p.stats.theta_pair(m, m2, k) - p.stats.theta_pair(m2, m, k).adjoint())
                          .norm() == 0.0);
            }

            // Theta via Proposition-3 form equals Phi minus the closed-form
            // estimate covariance.
            const CMat alt = phi - p.stats.estimate_covariance(m, k);
            CHECK((theta - alt).norm() <= 1e-10 * std::max(phi.norm(), 1.0));
        }
    }
}

TEST_CASE("zero-variance collapse makes the target-AP channel deterministic") {
    SystemConfig cfg = small_config(2, 2, 1, 4, 2);
    cfg.sigma2_TA_db = -1000.0;
    cfg.sigma2_UT_db = -1000.0;
    cfg.chi2_db = -1000.0;
    Rng rng(4);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const ChannelInstance inst = draw_channels(layout, cfg, rng);
    for (int m = 0; m < cfg.M; ++m) {
        const double beta = path_loss((layout.target_xy_prior[0] - layout.ap_xy[m]).norm());
        const CVec expect =
            beta * steering(doa(layout.ap_xy[m], layout.target_xy_prior[0]), cfg.N_T,
                            cfg.antenna_ratio);
        CHECK((inst.h_TA[m] - expect).norm() < 1e-12 * expect.norm());
    }
}

TEST_CASE("aggregate equals direct plus cascades exactly") {
    SystemConfig cfg = small_config(2, 3, 2, 4, 2);
    Rng rng(5);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const ChannelInstance inst = draw_channels(layout, cfg, rng);
    for (int m = 0; m < cfg.M; ++m) {
        for (int k = 0; k < cfg.K; ++k) {
            CVec expect = inst.h_direct[m * cfg.K + k];
            for (int t = 0; t < cfg.T; ++t)
                expect += cfg.alpha[t] * inst.h_UT[k * cfg.T + t] * inst.h_TA[m * cfg.T + t];
            CHECK((inst.agg(m, k) - expect).norm() == 0.0);
        }
    }

    SystemConfig no_targets = small_config(2, 3, 0, 4, 2);
    Rng rng2(6);
    const NetworkLayout l2 = sample_layout(no_targets, rng2);
    const ChannelInstance i2 = draw_channels(l2, no_targets, rng2);
    for (int i = 0; i < no_targets.M * no_targets.K; ++i)
        CHECK((i2.h_agg[i] - i2.h_direct[i]).norm() == 0.0);
}

TEST_CASE("target-AP channel sample mean matches beta * steering") {
    SystemConfig cfg = small_config(1, 1, 1, 3, 1);
    cfg.D_km = 0.5;
    Rng rng(7);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const int S = 100000;
    CVec mean = CVec::Zero(cfg.N_T);
    for (int s = 0; s < S; ++s) {
        const ChannelInstance inst = draw_channels(layout, cfg, rng);
        mean += inst.h_TA[0];
    }
    mean /= static_cast<double>(S);
    const double beta = path_loss((layout.target_xy_prior[0] - layout.ap_xy[0]).norm());
    const CVec expect =
        beta * steering(doa(layout.ap_xy[0], layout.target_xy_prior[0]), cfg.N_T,
                        cfg.antenna_ratio);
    // Entry std ~ beta * sqrt((chi^2 + rel-sigma)/S); allow 4 standard errors.
    const double entry_std =
        std::sqrt((beta * beta * cfg.chi2() + cfg.sigma2_TA() * (1.0 + cfg.chi2())) / S);
    for (int i = 0; i < cfg.N_T; ++i)
        CHECK(std::abs(mean(i) - expect(i)) < 4.0 * std::max(entry_std, 1e-30) + 1e-12 * beta);
}

TEST_CASE("pilot observation noise-free and contamination structure") {
    SystemConfig cfg = small_config(2, 4, 1, 4, 2);
    Rng rng(8);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const PilotPlan plan = allocate_pilots_hac(layout, cfg.tau_p);
    const ChannelInstance inst = draw_channels(layout, cfg, rng);
    const double amp = std::sqrt(cfg.p_p() * cfg.tau_p);

    const CMat zero_noise = CMat::Zero(cfg.N_T, cfg.tau_p);
    for (int m = 0; m < cfg.M; ++m) {
        for (int k = 0; k < cfg.K; ++k) {
            const CVec y = direct_observation_from_noise(inst, plan, cfg, m, k, zero_noise);
            CVec expect = CVec::Zero(cfg.N_T);
            for (int k2 = 0; k2 < cfg.K; ++k2)
                if (plan.share_pilot(k, k2)) expect += amp * inst.agg(m, k2);
            CHECK((y - expect).norm() < 1e-9 * expect.norm());
        }
    }
}

TEST_CASE("full-matrix and direct synthesis agree with shared noise") {
    SystemConfig cfg = small_config(2, 5, 1, 4, 3);
    Rng rng(9);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const PilotPlan plan = allocate_pilots_hac(layout, cfg.tau_p);
    const ChannelInstance inst = draw_channels(layout, cfg, rng);
    for (int m = 0; m < cfg.M; ++m) {
        CMat noise(cfg.N_T, cfg.tau_p);
        for (int i = 0; i < cfg.N_T; ++i)
            for (int j = 0; j < cfg.tau_p; ++j) noise(i, j) = rng.cgaussian();
        const CMat block = pilot_block(inst, plan, cfg, m, noise);
        for (int k = 0; k < cfg.K; ++k) {
            const CVec via_block = project_pilot_block(block, plan, k);
            const CVec direct = direct_observation_from_noise(inst, plan, cfg, m, k, noise);
            CHECK((via_block - direct).norm() <= 1e-10 * std::max(1.0, direct.norm()));
        }
    }
}

TEST_CASE("lmmse estimate basics") {
    SystemConfig cfg = small_config(1, 1, 0, 3, 1);
    const Pipeline p = make_pipeline(cfg, 10);
    PilotObservation obs;
    obs.M = 1;
    obs.K = 1;
    obs.N_T = 3;
    obs.y = {CVec::Zero(3)};
    const auto zero = lmmse_estimate(obs, p.stats);
    CHECK(zero[0].norm() == 0.0);

    ChannelStatistics identity = p.stats;
    identity.c_gain[0] = CMat::Identity(3, 3);
    obs.y[0] = CVec::Ones(3);
    const auto passthrough = lmmse_estimate(obs, identity);
    CHECK((passthrough[0] - CVec::Ones(3)).norm() == 0.0);

    PilotObservation bad = obs;
    bad.K = 2;
    bad.y = {CVec::Zero(3), CVec::Zero(3)};
    CHECK_THROWS_AS(lmmse_estimate(bad, p.stats), std::invalid_argument);
}

TEST_CASE("high pilot power drives the estimate to the channel") {
    SystemConfig cfg = small_config(1, 1, 0, 2, 1);
    cfg.p_p_db = 260.0;  // pt beta^2 >> 1
    Rng rng(11);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const PilotPlan plan = allocate_pilots_hac(layout, cfg.tau_p);
    const ChannelStatistics stats = compute_statistics(layout, cfg, plan);
    ChannelInstance inst = draw_channels(layout, cfg, rng);
    const PilotObservation obs = synthesize_pilot_observation(inst, plan, cfg, rng);
    estimate_instance(inst, obs, stats);
    CHECK((inst.hat(0, 0) - inst.agg(0, 0)).norm() < 1e-3 * inst.agg(0, 0).norm());
    CHECK((inst.err(0, 0) - (inst.agg(0, 0) - inst.hat(0, 0))).norm() == 0.0);
}

TEST_CASE("Monte-Carlo oracle at a cascade-dominant scale validates every closed form") {
    // Handcrafted sub-meter geometry where path loss is near unity: the
    // cascade links carry power comparable to the direct ones and the pilot
    // SNR sits at O(1), so Theta_mm'k and the orthogonality residual are
    // measurable against their own norms.
    SystemConfig cfg = small_config(2, 4, 2, 4, 2);
    cfg.p_p_db = -6.0;
    cfg.alpha = {1.0, 0.9};
    cfg.sigma2_TA_db = -300.0;
    cfg.sigma2_UT_db = -300.0;
    cfg.chi2_db = -300.0;

    NetworkLayout layout;
    layout.ap_xy = {Vec2(0.0, 0.0), Vec2(0.0008, 0.0)};
    layout.target_xy_true = {Vec2(0.0004, 0.0003), Vec2(0.0005, -0.00035)};
    layout.target_xy_prior = layout.target_xy_true;
    layout.iu_xy = {Vec2(0.0001, -0.0005), Vec2(0.0001, 0.0006), Vec2(0.0007, 0.0005),
                    Vec2(0.0009, -0.0005)};

    const PilotPlan plan = allocate_pilots_hac(layout, cfg.tau_p);
    const ChannelStatistics stats = compute_statistics(layout, cfg, plan);

    // The quantity under strict test must be non-trivial at this scale.
    double cross_ratio = 1e300;
    for (int k = 0; k < cfg.K; ++k)
        cross_ratio = std::min(cross_ratio, stats.theta_pair(0, 1, k).norm() /
                                                std::sqrt(stats.theta(0, k).norm() *
                                                          stats.theta(1, k).norm()));
    REQUIRE(cross_ratio > 0.1);

    ConsistencyAccumulator acc(stats);
    const int S = 40000;
    Rng rng(12);
    for (int s = 0; s < S; ++s) {
        ChannelInstance inst = draw_channels(layout, cfg, rng);
        const PilotObservation obs = synthesize_pilot_observation(inst, plan, cfg, rng);
        estimate_instance(inst, obs, stats);
        acc.add(inst);
    }
    const ConsistencyReport r = acc.finalize();
    CHECK(r.samples == S);
    CHECK(r.max_rel_phi < 0.05);
    CHECK(r.max_rel_estimate_cov < 0.05);
    CHECK(r.max_rel_theta < 0.05);
    CHECK(r.max_rel_theta_cross < 0.05);
    CHECK(r.max_rel_theta_cross_strict < 0.05);
    CHECK(r.max_orthogonality < 0.05);
    CHECK(r.max_user_cross < 0.05);
    CHECK_FALSE(r.degenerate_rank_le_1);
}

TEST_CASE("Monte-Carlo oracle at a realistic scale") {
    SystemConfig cfg = small_config(2, 4, 1, 4, 2);
    cfg.D_km = 0.5;
    Rng rng(12);
    const NetworkLayout layout = sample_layout(cfg, rng);
    const PilotPlan plan = allocate_pilots_hac(layout, cfg.tau_p);
    const ChannelStatistics stats = compute_statistics(layout, cfg, plan);

    ConsistencyAccumulator acc(stats);
    const int S = 10000;
    for (int s = 0; s < S; ++s) {
        ChannelInstance inst = draw_channels(layout, cfg, rng);
        const PilotObservation obs = synthesize_pilot_observation(inst, plan, cfg, rng);
        estimate_instance(inst, obs, stats);
        acc.add(inst);
    }
    const ConsistencyReport r = acc.finalize();
    CHECK(r.max_rel_phi < 0.05);
    CHECK(r.max_rel_estimate_cov < 0.05);
    CHECK(r.max_rel_theta < 0.05);
    CHECK(r.max_rel_theta_cross < 0.05);
    CHECK(r.max_orthogonality_scaled < 0.05);
    CHECK(r.max_user_cross < 0.05);  // different users decorrelate (Appendix-A check)
    CHECK_FALSE(r.degenerate_rank_le_1);
}

TEST_CASE("consistency report edge cases") {
    SystemConfig cfg = small_config(2, 2, 0, 3, 2);
    const Pipeline p = make_pipeline(cfg, 13);
    CHECK_THROWS_AS(estimation_consistency_report({}, p.stats), std::invalid_argument);

    Rng rng(14);
    ChannelInstance inst = draw_channels(p.layout, cfg, rng);
    const PilotObservation obs = synthesize_pilot_observation(inst, p.plan, cfg, rng);
    estimate_instance(inst, obs, p.stats);
    std::vector<ChannelInstance> repeated(50, inst);
    const ConsistencyReport r = estimation_consistency_report(repeated, p.stats);
    CHECK(r.degenerate_rank_le_1);
}
